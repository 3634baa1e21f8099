//! Directory layouts, split manifests and the model-grid resize.
//!
//! ```text
//! drive:  training/images  training/1st_manual  [training/mask]
//!         test/images      test/1st_manual      [test/mask]
//! stare:  images  labels  [mask]     split from a manifest or generated
//! flat:   images  labels  [mask]     split from a manifest or all train
//! ```
//! Files pair up by stem (`images/03.ppm` with `labels/03.pgm`); PGM, PPM
//! and PNG are accepted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::atomic::write_atomic;
use crate::error::{Error, Result};
use crate::image::{is_image_path, read_image, resize, to_grayscale, ImageBuffer, Interp};
use crate::par;

use super::Sample;

/// Manifest file written next to a generated STARE split.
pub const MANIFEST_FILE: &str = "split.txt";
/// Side of the square grid the generator works on.
pub const MODEL_SIZE: usize = 256;
/// Largest train share of a generated STARE split.
pub const STARE_TRAIN: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Drive,
    Stare,
    Flat,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "drive" => Ok(Layout::Drive),
            "stare" => Ok(Layout::Stare),
            "flat" => Ok(Layout::Flat),
            other => Err(Error::param(format!("unknown dataset layout `{other}` (drive, stare, flat)"))),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Drive => "drive",
            Layout::Stare => "stare",
            Layout::Flat => "flat",
        })
    }
}

/// Ordered train and test ids.
///
/// Text form: an optional `# source: <tag>` line, then `[train]` and
/// `[test]` sections with one id per line.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitManifest {
    pub source: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    pub fn new(source: impl Into<String>, train: Vec<String>, test: Vec<String>) -> Result<Self> {
        let m = SplitManifest {
            source: source.into(),
            train,
            test,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in self.train.iter().chain(&self.test) {
            if !seen.insert(id.as_str()) {
                return Err(Error::param(format!("manifest lists `{id}` twice")));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = SplitManifest::default();
        let mut section: Option<bool> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(tag) = rest.trim().strip_prefix("source:") {
                    m.source = tag.trim().to_string();
                }
                continue;
            }
            match line {
                "" => {}
                "[train]" => section = Some(true),
                "[test]" => section = Some(false),
                id => match section {
                    Some(true) => m.train.push(id.to_string()),
                    Some(false) => m.test.push(id.to_string()),
                    None => {
                        return Err(Error::param(format!(
                            "manifest line {}: id `{id}` before any [train]/[test] section",
                            n + 1
                        )))
                    }
                },
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.source.is_empty() {
            out.push_str(&format!("# source: {}\n", self.source));
        }
        out.push_str("[train]\n");
        self.train.iter().for_each(|id| out.push_str(&format!("{id}\n")));
        out.push_str("[test]\n");
        self.test.iter().for_each(|id| out.push_str(&format!("{id}\n")));
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_text().as_bytes())
    }
}

/// Image files in `dir` keyed by stem, sorted.
fn files_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() || !is_image_path(&path) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            if let Some(prev) = out.insert(stem.to_string(), path.clone()) {
                return Err(Error::Ingestion {
                    id: stem.to_string(),
                    message: format!("both {} and {} match", prev.display(), path.display()),
                });
            }
        }
    }
    Ok(out)
}

fn gray(img: ImageBuffer) -> Result<ImageBuffer> {
    if img.channels() == 3 {
        to_grayscale(&img)
    } else {
        Ok(img)
    }
}

/// Threshold at 127, warning when the file was not already binary.
fn binarize_gt(id: &str, img: ImageBuffer) -> Result<ImageBuffer> {
    let g = gray(img)?;
    if g.is_binary() {
        return Ok(g);
    }
    log::warn!("ground truth for `{id}` is not binary; thresholding at 127");
    let (w, h) = g.dims();
    let data = g.data().iter().map(|&v| if v > 127 { 255 } else { 0 }).collect();
    ImageBuffer::new(w, h, 1, data)
}

/// Load every sample under `images`/`labels`/`mask` directories of `dir`.
fn load_dir(dir: &Path, gt_dir: &str) -> Result<Vec<Sample>> {
    let images = files_by_stem(&dir.join("images"))?;
    let gts = files_by_stem(&dir.join(gt_dir))?;
    let mask_dir = dir.join("mask");
    let masks = if mask_dir.is_dir() {
        files_by_stem(&mask_dir)?
    } else {
        BTreeMap::new()
    };
    let items: Vec<(&String, &PathBuf)> = images.iter().collect();
    let loaded = par::map_range(items.len(), |i| -> Result<Sample> {
        let (id, path) = items[i];
        let gt_path = gts.get(id).ok_or_else(|| Error::Ingestion {
            id: id.clone(),
            message: format!("no ground truth in {}", dir.join(gt_dir).display()),
        })?;
        let image = read_image(path)?;
        let gt = binarize_gt(id, read_image(gt_path)?)?;
        let fov = masks.get(id).map(|p| read_image(p).and_then(gray)).transpose()?;
        Sample::new(id.clone(), image, gt, fov)
    });
    loaded.into_iter().collect()
}

fn split_by(mut all: Vec<Sample>, m: &SplitManifest) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let listed: BTreeSet<&str> = m.train.iter().chain(&m.test).map(String::as_str).collect();
    if let Some(s) = all.iter().find(|s| !listed.contains(s.id.as_str())) {
        return Err(Error::Ingestion {
            id: s.id.clone(),
            message: "present on disk but missing from the manifest".into(),
        });
    }
    let mut take = |ids: &[String]| -> Result<Vec<Sample>> {
        ids.iter()
            .map(|id| {
                let pos = all.iter().position(|s| &s.id == id).ok_or_else(|| Error::Ingestion {
                    id: id.clone(),
                    message: "listed in the manifest but not found".into(),
                })?;
                Ok(all.swap_remove(pos))
            })
            .collect()
    };
    let mut train = take(&m.train)?;
    let mut test = take(&m.test)?;
    train.sort_by(|a, b| a.id.cmp(&b.id));
    test.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((train, test))
}

/// Load `(train, test)` samples, each sorted by id.
///
/// A STARE root without a manifest is split into the first
/// `min(10, n/2)` sorted ids and the rest; that split is written to
/// `root/split.txt`.
pub fn load_dataset(
    root: impl AsRef<Path>,
    layout: Layout,
    manifest: Option<&SplitManifest>,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let root = root.as_ref();
    match layout {
        Layout::Drive => {
            let train = load_dir(&root.join("training"), "1st_manual")?;
            let test = load_dir(&root.join("test"), "1st_manual")?;
            match manifest {
                Some(m) => split_by(train.into_iter().chain(test).collect(), m),
                None => Ok((train, test)),
            }
        }
        Layout::Stare => {
            let all = load_dir(root, "labels")?;
            match manifest {
                Some(m) => split_by(all, m),
                None => {
                    let n_train = STARE_TRAIN.min(all.len() / 2);
                    let ids: Vec<String> = all.iter().map(|s| s.id.clone()).collect();
                    let m = SplitManifest::new(
                        layout.to_string(),
                        ids[..n_train].to_vec(),
                        ids[n_train..].to_vec(),
                    )?;
                    m.write(root.join(MANIFEST_FILE))?;
                    split_by(all, &m)
                }
            }
        }
        Layout::Flat => {
            let all = load_dir(root, "labels")?;
            match manifest {
                Some(m) => split_by(all, m),
                None => Ok((all, Vec::new())),
            }
        }
    }
}

/// Resample to `size × size`: bilinear for the image, nearest for masks.
/// The original dimensions are kept for [`restore_size`].
pub fn resize_to_model(sample: &Sample, size: usize) -> Result<Sample> {
    if size == 0 {
        return Err(Error::param("model size must be positive"));
    }
    let dims = sample.image.dims();
    let mut out = Sample::new(
        sample.id.clone(),
        resize(&sample.image, size, size, Interp::Bilinear)?,
        resize(&sample.gt_mask, size, size, Interp::Nearest)?,
        sample
            .fov_mask
            .as_ref()
            .map(|m| resize(m, size, size, Interp::Nearest))
            .transpose()?,
    )?;
    out.original_dims = Some(sample.original_dims.unwrap_or(dims));
    Ok(out)
}

/// Map a model-grid image back to `dims`, nearest-neighbour for masks.
pub fn restore_size(img: &ImageBuffer, dims: (usize, usize), interp: Interp) -> Result<ImageBuffer> {
    resize(img, dims.0, dims.1, interp)
}
