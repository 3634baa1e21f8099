use std::path::PathBuf;

use clap::Args;
use vesselforge::image::{preprocess, read_image, write_image, ClaheConfig, PreprocessConfig};
use vesselforge::par;

use crate::error::CliError;
use crate::files::{create_dir, images_by_stem};

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// CLAHE clip limit.
    #[arg(long, default_value_t = vesselforge::image::clahe::CLAHE_DEFAULT_CLIP)]
    pub clahe_clip: f64,
    /// Accepted for symmetry with the other commands; preprocessing draws no
    /// random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn config(clip: f64) -> PreprocessConfig {
    PreprocessConfig {
        clahe: ClaheConfig {
            clip: Some(clip),
            ..ClaheConfig::default()
        },
        ..PreprocessConfig::default()
    }
}

pub fn run(args: &PreprocessArgs) -> Result<(), CliError> {
    if !args.input.is_dir() {
        return Err(CliError::Runtime(format!("{} is not a directory", args.input.display())));
    }
    if !(args.clahe_clip > 0.0) {
        return Err(CliError::Config(format!("clahe clip must be positive, got {}", args.clahe_clip)));
    }
    let files: Vec<_> = images_by_stem(&args.input)?.into_iter().collect();
    if files.is_empty() {
        log::warn!("no images in {}", args.input.display());
        return Ok(());
    }
    create_dir(&args.out)?;
    let cfg = config(args.clahe_clip);
    let results = par::map_range(files.len(), |i| {
        let (stem, path) = &files[i];
        let out = args.out.join(format!("{stem}.pgm"));
        read_image(path)
            .and_then(|img| preprocess(&img, &cfg))
            .and_then(|img| write_image(&out, &img))
            .map_err(|e| format!("{}: {e}", path.display()))
    });
    let failures: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    log::info!("preprocessed {} of {} images", files.len() - failures.len(), files.len());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Files(failures))
    }
}
