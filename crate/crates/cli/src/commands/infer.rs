use std::path::{Path, PathBuf};

use clap::Args;
use vesselforge::dataset::{image_to_tensor, Checkpoint};
use vesselforge::image::{
    postprocess, preprocess, read_image, resize, resize_prob, to_grayscale, write_image, ImageBuffer, Interp, ProbMask,
};
use vesselforge::networks::GeneratorParams;
use vesselforge::train::{load_generator, predict, NOTE_PREFIX};

use crate::error::CliError;
use crate::files::{create_dir, images_by_stem};

/// Probability threshold used when post-processing is skipped.
pub const RAW_THRESHOLD: f64 = 0.5;

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Threshold the probability map directly instead of post-processing.
    #[arg(long)]
    pub no_post: bool,
    /// Also write full-precision probabilities in the checkpoint format.
    #[arg(long)]
    pub raw: bool,
}

struct Model {
    gen: GeneratorParams,
    enhance: Option<vesselforge::image::PreprocessConfig>,
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    let fail = |e: vesselforge::Error| CliError::Checkpoint(format!("{}: {e}", path.display()));
    let ck = Checkpoint::load(path).map_err(fail)?;
    let gen = load_generator(&ck).map_err(fail)?;
    let note = |k: &str| ck.get(&format!("{NOTE_PREFIX}{k}")).map(str::to_string);
    let enhance = match note("preprocess").as_deref() {
        Some("false") => None,
        _ => {
            let clip = note("clahe_clip")
                .map(|c| c.parse::<f64>())
                .transpose()
                .map_err(|e| CliError::Checkpoint(format!("{}: bad clahe_clip note: {e}", path.display())))?
                .unwrap_or(vesselforge::image::clahe::CLAHE_DEFAULT_CLIP);
            Some(super::preprocess::config(clip))
        }
    };
    Ok(Model { gen, enhance })
}

/// Probability map at the input's own resolution.
fn probability(model: &mut Model, img: &ImageBuffer) -> vesselforge::Result<ProbMask> {
    let gray = if img.channels() == 3 { to_grayscale(img)? } else { img.clone() };
    let enhanced = match &model.enhance {
        Some(cfg) => preprocess(&gray, cfg)?,
        None => gray,
    };
    let size = model.gen.config.input_size();
    let grid = resize(&enhanced, size, size, Interp::Bilinear)?;
    let x = image_to_tensor::<f32>(&grid)?;
    let y = predict(&mut model.gen, &x)?;
    let g: Vec<f64> = y.data().iter().map(|&v| v as f64).collect();
    let p = ProbMask::from_tanh(size, size, &g)?;
    let (w, h) = img.dims();
    resize_prob(&p, w, h)
}

fn raw_checkpoint(id: &str, p: &ProbMask) -> Checkpoint {
    let mut ck = Checkpoint::new();
    ck.set("kind", "probability");
    ck.set("id", id);
    ck.push(
        "probability",
        &[p.height(), p.width()],
        p.data().iter().map(|&v| v as f32).collect(),
    );
    ck
}

pub fn run(args: &InferArgs) -> Result<(), CliError> {
    let mut model = load_model(&args.ckpt)?;
    let files = images_by_stem(&args.input)?;
    if files.is_empty() {
        log::warn!("no images in {}", args.input.display());
        return Ok(());
    }
    create_dir(&args.out)?;
    let mut failures = Vec::new();
    for (stem, path) in &files {
        let result = read_image(path).and_then(|img| {
            let p = probability(&mut model, &img)?;
            let mask = if args.no_post {
                p.threshold(RAW_THRESHOLD)
            } else {
                postprocess(&p)
            };
            write_image(args.out.join(format!("{stem}_prob.pgm")), &p.to_image())?;
            write_image(args.out.join(format!("{stem}_mask.pgm")), &mask)?;
            if args.raw {
                raw_checkpoint(stem, &p).save(args.out.join(format!("{stem}_prob.vfck")))?;
            }
            Ok(())
        });
        if let Err(e) = result {
            failures.push(format!("{}: {e}", path.display()));
        }
    }
    log::info!("segmented {} of {} images", files.len() - failures.len(), files.len());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Files(failures))
    }
}
