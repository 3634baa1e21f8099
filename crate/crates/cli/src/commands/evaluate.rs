use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::Args;
use vesselforge::image::{read_image, to_grayscale, ImageBuffer, ProbMask};
use vesselforge::metrics::Evaluation;

use crate::error::CliError;
use crate::files::images_by_stem;

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Predicted masks: `<id>_mask.*` or `<id>.*`, with optional
    /// `<id>_prob.*` probability maps used for AUC.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub fov: Option<PathBuf>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Default)]
struct Prediction {
    mask: Option<PathBuf>,
    prob: Option<PathBuf>,
}

fn predictions(dir: &Path) -> Result<BTreeMap<String, Prediction>, CliError> {
    let mut out: BTreeMap<String, Prediction> = BTreeMap::new();
    for (stem, path) in images_by_stem(dir)? {
        if let Some(id) = stem.strip_suffix("_prob") {
            out.entry(id.to_string()).or_default().prob = Some(path);
        } else {
            let id = stem.strip_suffix("_mask").unwrap_or(&stem);
            out.entry(id.to_string()).or_default().mask = Some(path);
        }
    }
    Ok(out)
}

/// Single channel, thresholded at 127.
fn binary(img: ImageBuffer) -> vesselforge::Result<ImageBuffer> {
    let g = if img.channels() == 3 { to_grayscale(&img)? } else { img };
    let (w, h) = g.dims();
    let data = g.data().iter().map(|&v| if v > 127 { 255 } else { 0 }).collect();
    ImageBuffer::new(w, h, 1, data)
}

fn orphans(
    preds: &BTreeMap<String, Prediction>,
    gts: &BTreeMap<String, PathBuf>,
    fovs: Option<&BTreeMap<String, PathBuf>>,
) -> Vec<String> {
    let mut out = Vec::new();
    let ids: BTreeSet<&String> = preds.keys().chain(gts.keys()).collect();
    for id in ids {
        match (preds.get(id), gts.contains_key(id)) {
            (None, _) => out.push(format!("{id}: ground truth without prediction")),
            (Some(p), _) if p.mask.is_none() => out.push(format!("{id}: probability map without mask")),
            (Some(_), false) => out.push(format!("{id}: prediction without ground truth")),
            _ => {
                if fovs.is_some_and(|f| !f.contains_key(id)) {
                    out.push(format!("{id}: no field-of-view mask"));
                }
            }
        }
    }
    out
}

pub fn run(args: &EvaluateArgs) -> Result<(), CliError> {
    let preds = predictions(&args.pred)?;
    let gts = images_by_stem(&args.gt)?;
    let fovs = args.fov.as_deref().map(images_by_stem).transpose()?;
    let missing = orphans(&preds, &gts, fovs.as_ref());
    if !missing.is_empty() {
        return Err(CliError::Mismatch(missing));
    }
    match &args.fov {
        Some(dir) => log::info!("metrics restricted to the field of view in {}", dir.display()),
        None => log::info!("metrics over all pixels (no field-of-view masks)"),
    }
    let mut eval = Evaluation::new();
    for (id, gt_path) in &gts {
        let p = &preds[id];
        let row = (|| -> vesselforge::Result<()> {
            let gt = binary(read_image(gt_path)?)?;
            let mask = binary(read_image(p.mask.as_ref().expect("checked above"))?)?;
            let prob = p
                .prob
                .as_ref()
                .map(|path| read_image(path).and_then(|i| ProbMask::from_image(&i)))
                .transpose()?;
            let fov = fovs
                .as_ref()
                .map(|f| read_image(&f[id]).and_then(binary))
                .transpose()?;
            eval.add(id.clone(), &mask, prob.as_ref(), &gt, fov.as_ref())?;
            Ok(())
        })();
        row.map_err(|e| CliError::Runtime(format!("{id}: {e}")))?;
    }
    let csv = eval.to_csv();
    match &args.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(())
}
