use std::ops::ControlFlow;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::Args;
use vesselforge::dataset::{load_dataset, resize_to_model, synth_vessels, Checkpoint, Layout, Sample, SplitManifest};
use vesselforge::image::{augment_all, preprocess, AugmentRecipe};
use vesselforge::networks::{DiscriminatorConfig, GeneratorConfig};
use vesselforge::train::{checkpoint_path, LogEntry, TrainConfig, Trainer};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::files::create_dir;

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `synth` or a dataset root directory.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub layout: Option<String>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Number of synthetic samples.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lambda_l1: Option<f64>,
    #[arg(long)]
    pub checkpoint_interval: Option<u64>,
    #[arg(long)]
    pub base_channels: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl TrainArgs {
    /// File values overlaid with command-line flags.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags: [(&str, Option<String>); 15] = [
            ("dataset", self.dataset.clone()),
            ("layout", self.layout.clone()),
            ("manifest", self.manifest.as_ref().map(|p| p.display().to_string())),
            ("synth_n", self.n.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("resume", self.resume.as_ref().map(|p| p.display().to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("max_iterations", self.max_iterations.map(|v| v.to_string())),
            ("lr", self.lr.map(|v| v.to_string())),
            ("batch_size", self.batch_size.map(|v| v.to_string())),
            ("lambda_l1", self.lambda_l1.map(|v| v.to_string())),
            ("checkpoint_interval", self.checkpoint_interval.map(|v| v.to_string())),
            ("base_channels", self.base_channels.map(|v| v.to_string())),
            ("depth", self.depth.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for pair in &self.set {
            cfg.set_pair(pair)?;
        }
        Ok(cfg)
    }
}

fn config_err(e: vesselforge::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Training samples on the model grid, enhanced and augmented as configured.
fn training_set(cfg: &RunConfig, size: usize) -> Result<Vec<Sample>, CliError> {
    let seed: u64 = cfg.get("seed")?;
    let raw = match cfg.raw("dataset") {
        "synth" => synth_vessels(seed, size, cfg.get("synth_n")?)?,
        root => {
            let layout: Layout = cfg.raw("layout").parse().map_err(config_err)?;
            let manifest = cfg.path("manifest").map(SplitManifest::read).transpose()?;
            load_dataset(root, layout, manifest.as_ref())?.0
        }
    };
    if raw.is_empty() {
        return Err(CliError::Runtime("training set is empty".into()));
    }
    let enhance: bool = cfg.get("preprocess")?;
    let pre = super::preprocess::config(cfg.get("clahe_clip")?);
    let mut samples = Vec::with_capacity(raw.len());
    for mut s in raw {
        if enhance {
            s.image = preprocess(&s.image, &pre)?;
        }
        samples.push(resize_to_model(&s, size)?);
    }
    if cfg.get("augment")? {
        let recipe = AugmentRecipe {
            variants: cfg.get("augment_variants")?,
            ..AugmentRecipe::default()
        };
        recipe.validate().map_err(config_err)?;
        samples = augment_all(&samples, &recipe, seed)?;
    }
    Ok(samples)
}

fn trainer(cfg: &RunConfig, checkpoint_dir: PathBuf) -> Result<Trainer, CliError> {
    let train = TrainConfig {
        lr: cfg.get("lr")?,
        beta1: cfg.get("beta1")?,
        beta2: cfg.get("beta2")?,
        batch_size: cfg.get("batch_size")?,
        lambda_l1: cfg.get("lambda_l1")?,
        epochs: cfg.get("epochs")?,
        max_iterations: cfg.optional("max_iterations")?,
        seed: cfg.get("seed")?,
        checkpoint_interval: cfg.get("checkpoint_interval")?,
        checkpoint_dir: Some(checkpoint_dir),
    };
    train.validate().map_err(config_err)?;
    let mut t = match cfg.path("resume") {
        Some(path) => {
            let ck = Checkpoint::load(&path).map_err(|e| CliError::Checkpoint(format!("{}: {e}", path.display())))?;
            let mut t = Trainer::from_checkpoint(&ck).map_err(|e| CliError::Checkpoint(e.to_string()))?;
            t.config = train;
            t
        }
        None => {
            let base: usize = cfg.get("base_channels")?;
            let gen = GeneratorConfig {
                base_channels: base,
                depth: cfg.get("depth")?,
            };
            gen.validate().map_err(config_err)?;
            Trainer::new(gen, DiscriminatorConfig { base_channels: base }, train).map_err(config_err)?
        }
    };
    t.notes.insert("preprocess".into(), cfg.raw("preprocess").into());
    t.notes.insert("clahe_clip".into(), cfg.raw("clahe_clip").into());
    Ok(t)
}

pub fn run(args: &TrainArgs, stop: Arc<AtomicBool>) -> Result<(), CliError> {
    let cfg = args.run_config()?;
    let out = cfg.path("out").unwrap_or_else(|| PathBuf::from("run"));
    let ckpt_dir = out.join("checkpoints");
    let mut t = trainer(&cfg, ckpt_dir.clone())?;
    let size = t.gen.config.input_size();
    let data = training_set(&cfg, size)?;
    create_dir(&out)?;
    std::fs::write(out.join("run.cfg"), cfg.to_text())
        .map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    log::info!(
        "training on {} samples, {} iterations per epoch",
        data.len(),
        t.iterations_per_epoch(data.len())
    );
    let every: u64 = cfg.get::<u64>("log_every")?.max(1);
    let mut observer = |e: &LogEntry, _: &Trainer| {
        if e.iteration % every == 0 {
            log::info!(
                "iter {} epoch {} g={:.4} d={:.4} l1={:.4}",
                e.iteration,
                e.epoch,
                e.gen_loss,
                e.disc_loss,
                e.l1_term
            );
        }
        if stop.load(Ordering::SeqCst) {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    };
    let log = t.train_loop(&data, &mut observer)?;
    log.write_csv(out.join("train_log.csv"))?;
    log::info!("checkpoint {}", checkpoint_path(&ckpt_dir, t.iteration()).display());
    if stop.load(Ordering::SeqCst) {
        return Err(CliError::Interrupted);
    }
    Ok(())
}
