use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use vesselforge::image::is_image_path;

use crate::error::CliError;

/// Image files directly inside `dir`, keyed by stem in sorted order.
pub fn images_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?
            .path();
        if path.is_file() && is_image_path(&path) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}
