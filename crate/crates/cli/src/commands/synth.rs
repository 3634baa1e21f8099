use std::path::PathBuf;

use clap::Args;
use vesselforge::dataset::synth_vessels;
use vesselforge::image::write_image;

use crate::error::CliError;
use crate::files::create_dir;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output root; files go to `images/` and `labels/` beneath it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    let samples = synth_vessels(args.seed, args.size, args.n).map_err(|e| CliError::Config(e.to_string()))?;
    let (images, labels) = (args.out.join("images"), args.out.join("labels"));
    create_dir(&images)?;
    create_dir(&labels)?;
    for s in &samples {
        write_image(images.join(format!("{}.pgm", s.id)), &s.image)?;
        write_image(labels.join(format!("{}.pgm", s.id)), &s.gt_mask)?;
    }
    log::info!("wrote {} samples to {}", samples.len(), args.out.display());
    Ok(())
}
