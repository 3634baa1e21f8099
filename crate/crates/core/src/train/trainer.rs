use std::collections::BTreeMap;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use crate::dataset::checkpoint::Checkpoint;
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::networks::{DiscriminatorConfig, DiscriminatorParams, GeneratorConfig, GeneratorParams};
use crate::optim::{Adam, AdamConfig, AdamState};
use crate::params::ParamStore;
use crate::rng::{stream, Domain};
use crate::scalar::Scalar;
use crate::tape::{Mode, Rng, Tape};
use crate::tensor::Tensor;

use super::log::{LogEntry, TrainLog};
use super::loss::{discriminator_loss, generator_loss};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub lambda_l1: f64,
    pub epochs: usize,
    /// Stop after this many iterations even if epochs remain.
    pub max_iterations: Option<u64>,
    pub seed: u64,
    /// Write a checkpoint every this many iterations; 0 writes only the
    /// final one.
    pub checkpoint_interval: u64,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            batch_size: 2,
            lambda_l1: 100.0,
            epochs: 100,
            max_iterations: None,
            seed: 0,
            checkpoint_interval: 0,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.adam().validate()?;
        if self.batch_size == 0 {
            return Err(Error::param("batch size must be at least 1"));
        }
        if !(self.lambda_l1 >= 0.0) || !self.lambda_l1.is_finite() {
            return Err(Error::param("lambda_l1 must be a finite non-negative number"));
        }
        Ok(())
    }
}

/// Scalar losses of one alternating update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLosses {
    pub gen_loss: f64,
    pub disc_loss: f64,
    /// Unweighted mean absolute error between output and target.
    pub l1: f64,
    pub adv: f64,
}

/// Called after every iteration; returning `Break` stops the loop after
/// writing a checkpoint.
pub trait TrainObserver<S: Scalar> {
    fn on_step(&mut self, entry: &LogEntry, trainer: &Trainer<S>) -> ControlFlow<()>;
}

impl<S: Scalar, F: FnMut(&LogEntry, &Trainer<S>) -> ControlFlow<()>> TrainObserver<S> for F {
    fn on_step(&mut self, entry: &LogEntry, trainer: &Trainer<S>) -> ControlFlow<()> {
        self(entry, trainer)
    }
}

/// Observer that never interrupts.
pub fn no_observer<S: Scalar>(_: &LogEntry, _: &Trainer<S>) -> ControlFlow<()> {
    ControlFlow::Continue(())
}

/// Generator, discriminator and their optimizers.
#[derive(Clone, Debug)]
pub struct Trainer<S: Scalar = f32> {
    pub gen: GeneratorParams<S>,
    pub disc: DiscriminatorParams<S>,
    pub gen_opt: Adam<S>,
    pub disc_opt: Adam<S>,
    pub config: TrainConfig,
    /// Free-form run notes stored in checkpoints under `note.<key>`.
    pub notes: BTreeMap<String, String>,
    iteration: u64,
}

impl<S: Scalar> Trainer<S> {
    pub fn new(gen: GeneratorConfig, disc: DiscriminatorConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let gen = GeneratorParams::init(gen, &mut stream(config.seed, Domain::Init, 0))?;
        let disc = DiscriminatorParams::init(disc, &mut stream(config.seed, Domain::Init, 1))?;
        let gen_opt = Adam::new(&gen.store, config.adam())?;
        let disc_opt = Adam::new(&disc.store, config.adam())?;
        Ok(Trainer {
            gen,
            disc,
            gen_opt,
            disc_opt,
            config,
            notes: BTreeMap::new(),
            iteration: 0,
        })
    }

    /// Completed optimizer iterations.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// One discriminator update followed by one generator update on the
    /// batch `x -> y`, both `[N,1,S,S]`.
    pub fn step_tensors(&mut self, x: &Tensor<S>, y: &Tensor<S>) -> Result<StepLosses> {
        if x.shape() != y.shape() {
            return Err(Error::dim(format!(
                "input {:?} and target {:?} differ",
                x.shape(),
                y.shape()
            )));
        }
        let mut rng = stream(self.config.seed, Domain::Dropout, self.iteration);

        let mut tg = Tape::new();
        let xg = tg.constant(x.clone());
        let yg = tg.constant(y.clone());
        let fake = self.gen.forward(&mut tg, xg, Mode::Train, &mut rng)?;

        let disc_loss = self.discriminator_update(x, y, tg.value(fake), &mut rng)?;

        let d_fake_g = self.disc.forward(&mut tg, xg, fake, Mode::Train, &mut rng, false)?;
        let gl = generator_loss(&mut tg, d_fake_g, fake, yg, self.config.lambda_l1)?;
        tg.backward(gl.total)?;
        self.gen.store.zero_grads();
        tg.accumulate_param_grads(&mut self.gen.store);
        self.gen_opt.step(&mut self.gen.store);

        self.iteration += 1;
        let scalar = |t: &Tape<S>, v| t.value(v).data()[0].to_f64c();
        Ok(StepLosses {
            gen_loss: scalar(&tg, gl.total),
            disc_loss,
            l1: scalar(&tg, gl.l1),
            adv: scalar(&tg, gl.adversarial),
        })
    }

    /// One discriminator step on a detached generator output; returns its
    /// loss. The generator never enters this tape.
    fn discriminator_update(&mut self, x: &Tensor<S>, y: &Tensor<S>, fake: &Tensor<S>, rng: &mut Rng) -> Result<f64> {
        let mut td = Tape::new();
        let xd = td.constant(x.clone());
        let yd = td.constant(y.clone());
        let fd = td.constant(fake.clone());
        let d_real = self.disc.forward(&mut td, xd, yd, Mode::Train, rng, true)?;
        let d_fake = self.disc.forward(&mut td, xd, fd, Mode::Train, rng, true)?;
        let loss_d = discriminator_loss(&mut td, d_real, d_fake)?;
        td.backward(loss_d)?;
        self.disc.store.zero_grads();
        td.accumulate_param_grads(&mut self.disc.store);
        // Routes nothing: the fake entered this tape as a constant.
        td.accumulate_param_grads(&mut self.gen.store);
        self.disc_opt.step(&mut self.disc.store);
        Ok(td.value(loss_d).data()[0].to_f64c())
    }

    pub fn train_step(&mut self, batch: &[Sample]) -> Result<StepLosses> {
        let (x, y) = stack_samples(batch)?;
        self.step_tensors(&x, &y)
    }

    /// Iterations in one pass over `n` samples; a short last batch counts.
    pub fn iterations_per_epoch(&self, n: usize) -> u64 {
        n.div_ceil(self.config.batch_size) as u64
    }

    /// Train over `data` for the configured epochs, resuming from the current
    /// iteration. Sample order is reshuffled every epoch from the seed.
    pub fn train_loop(&mut self, data: &[Sample], observer: &mut dyn TrainObserver<S>) -> Result<TrainLog> {
        if data.is_empty() {
            return Err(Error::param("training set is empty"));
        }
        let inputs: Vec<Tensor<S>> = data.iter().map(Sample::input_tensor).collect::<Result<_>>()?;
        let targets: Vec<Tensor<S>> = data.iter().map(Sample::target_tensor).collect::<Result<_>>()?;
        let per_epoch = self.iterations_per_epoch(data.len());
        let total = (per_epoch * self.config.epochs as u64)
            .min(self.config.max_iterations.unwrap_or(u64::MAX));
        let mut log = TrainLog::default();
        let start = std::time::Instant::now();
        while self.iteration < total {
            let epoch = self.iteration / per_epoch;
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut stream(self.config.seed, Domain::Shuffle, epoch));
            let b = self.config.batch_size;
            let first = (self.iteration % per_epoch) as usize;
            for chunk in order.chunks(b).skip(first) {
                if self.iteration >= total {
                    break;
                }
                let x = Tensor::stack_batch(&chunk.iter().map(|&i| inputs[i].clone()).collect::<Vec<_>>())?;
                let y = Tensor::stack_batch(&chunk.iter().map(|&i| targets[i].clone()).collect::<Vec<_>>())?;
                let l = self.step_tensors(&x, &y)?;
                let entry = LogEntry {
                    iteration: self.iteration,
                    epoch: epoch as usize,
                    gen_loss: l.gen_loss,
                    disc_loss: l.disc_loss,
                    l1_term: l.l1,
                    adv_term: l.adv,
                    wall_clock_s: start.elapsed().as_secs_f64(),
                };
                log.push(entry);
                let interval = self.config.checkpoint_interval;
                if interval > 0 && self.iteration % interval == 0 {
                    self.save_periodic()?;
                }
                if observer.on_step(&entry, self).is_break() {
                    self.save_periodic()?;
                    return Ok(log);
                }
            }
        }
        self.save_periodic()?;
        Ok(log)
    }

    fn save_periodic(&self) -> Result<()> {
        if let Some(dir) = &self.config.checkpoint_dir {
            self.to_checkpoint().save(checkpoint_path(dir, self.iteration))?;
        }
        Ok(())
    }

    /// Generator in eval mode on `x[N,1,S,S]`.
    pub fn predict(&mut self, x: &Tensor<S>) -> Result<Tensor<S>> {
        predict(&mut self.gen, x)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.set("kind", "trainer");
        write_gen_meta(&mut ck, &self.gen.config);
        ck.set("disc.base_channels", self.disc.config.base_channels);
        let c = &self.config;
        ck.set("train.lr", c.lr);
        ck.set("train.beta1", c.beta1);
        ck.set("train.beta2", c.beta2);
        ck.set("train.batch_size", c.batch_size);
        ck.set("train.lambda_l1", c.lambda_l1);
        ck.set("train.epochs", c.epochs);
        ck.set("train.checkpoint_interval", c.checkpoint_interval);
        if let Some(m) = c.max_iterations {
            ck.set("train.max_iterations", m);
        }
        ck.set("rng.seed", c.seed);
        ck.set("rng.scheme", "chacha8-streams");
        ck.set("iteration", self.iteration);
        ck.set("adam.gen.t", self.gen_opt.steps());
        ck.set("adam.disc.t", self.disc_opt.steps());
        for (k, v) in &self.notes {
            ck.set(format!("{NOTE_PREFIX}{k}"), v);
        }
        ck.push_store(&self.gen.store);
        ck.push_store(&self.disc.store);
        push_adam(&mut ck, "adam.gen", &self.gen.store, &self.gen_opt);
        push_adam(&mut ck, "adam.disc", &self.disc.store, &self.disc_opt);
        ck
    }

    /// Rebuild a trainer that continues exactly where `ck` was written.
    /// `checkpoint_dir` is not stored and comes back as `None`.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config = TrainConfig {
            lr: ck.parse("train.lr")?,
            beta1: ck.parse("train.beta1")?,
            beta2: ck.parse("train.beta2")?,
            batch_size: ck.parse("train.batch_size")?,
            lambda_l1: ck.parse("train.lambda_l1")?,
            epochs: ck.parse("train.epochs")?,
            max_iterations: ck.get("train.max_iterations").map(|_| ck.parse("train.max_iterations")).transpose()?,
            seed: ck.parse("rng.seed")?,
            checkpoint_interval: ck.parse("train.checkpoint_interval")?,
            checkpoint_dir: None,
        };
        let disc = DiscriminatorConfig {
            base_channels: ck.parse("disc.base_channels")?,
        };
        let mut t = Trainer::new(read_gen_meta(ck)?, disc, config)?;
        ck.restore_store(&mut t.gen.store)?;
        ck.restore_store(&mut t.disc.store)?;
        restore_adam(ck, "adam.gen", &t.gen.store, &mut t.gen_opt, ck.parse("adam.gen.t")?)?;
        restore_adam(ck, "adam.disc", &t.disc.store, &mut t.disc_opt, ck.parse("adam.disc.t")?)?;
        t.iteration = ck.parse("iteration")?;
        t.notes = ck
            .metadata
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(NOTE_PREFIX).map(|k| (k.to_string(), v.clone())))
            .collect();
        Ok(t)
    }
}

/// Metadata prefix of [`Trainer::notes`] entries.
pub const NOTE_PREFIX: &str = "note.";

pub fn checkpoint_path(dir: &Path, iteration: u64) -> PathBuf {
    dir.join(format!("checkpoint-{iteration:08}.vfck"))
}

/// Stack samples into an input batch and a target batch.
pub fn stack_samples<S: Scalar>(batch: &[Sample]) -> Result<(Tensor<S>, Tensor<S>)> {
    let xs = batch.iter().map(Sample::input_tensor).collect::<Result<Vec<_>>>()?;
    let ys = batch.iter().map(Sample::target_tensor).collect::<Result<Vec<_>>>()?;
    Ok((Tensor::stack_batch(&xs)?, Tensor::stack_batch(&ys)?))
}

/// Eval-mode generator output for `x[N,1,S,S]`.
pub fn predict<S: Scalar>(gen: &mut GeneratorParams<S>, x: &Tensor<S>) -> Result<Tensor<S>> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let mut rng = stream(0, Domain::Dropout, 0);
    let out = gen.forward(&mut tape, xv, Mode::Eval, &mut rng)?;
    Ok(tape.value(out).clone())
}

/// Generator weights from a trainer checkpoint.
pub fn load_generator<S: Scalar>(ck: &Checkpoint) -> Result<GeneratorParams<S>> {
    let mut gen = GeneratorParams::init(read_gen_meta(ck)?, &mut stream(0, Domain::Init, 0))?;
    ck.restore_store(&mut gen.store)?;
    Ok(gen)
}

fn write_gen_meta(ck: &mut Checkpoint, g: &GeneratorConfig) {
    ck.set("gen.base_channels", g.base_channels);
    ck.set("gen.depth", g.depth);
}

fn read_gen_meta(ck: &Checkpoint) -> Result<GeneratorConfig> {
    Ok(GeneratorConfig {
        base_channels: ck.parse("gen.base_channels")?,
        depth: ck.parse("gen.depth")?,
    })
}

fn push_adam<S: Scalar>(ck: &mut Checkpoint, prefix: &str, store: &ParamStore<S>, opt: &Adam<S>) {
    for ((_, name, _), st) in store.iter().zip(opt.states()) {
        if let Some(st) = st {
            let f = |v: &[S]| v.iter().map(|x| x.to_f64c() as f32).collect();
            ck.push(format!("{prefix}/{name}.m"), &[st.m.len()], f(&st.m));
            ck.push(format!("{prefix}/{name}.v"), &[st.v.len()], f(&st.v));
        }
    }
}

fn restore_adam<S: Scalar>(
    ck: &Checkpoint,
    prefix: &str,
    store: &ParamStore<S>,
    opt: &mut Adam<S>,
    t: u64,
) -> Result<()> {
    for ((_, name, _), st) in store.iter().zip(opt.states_mut()) {
        let Some(st) = st else { continue };
        let fetch = |suffix: &str| -> Result<Vec<S>> {
            let key = format!("{prefix}/{name}.{suffix}");
            let saved = ck.tensor(&key).ok_or_else(|| Error::Format {
                offset: 0,
                message: format!("checkpoint lacks `{key}`"),
            })?;
            if saved.data.len() != st.m.len() {
                return Err(Error::dim(format!("`{key}` has {} values, expected {}", saved.data.len(), st.m.len())));
            }
            Ok(saved.data.iter().map(|&v| S::of(v as f64)).collect())
        };
        let m = fetch("m")?;
        let v = fetch("v")?;
        *st = AdamState { m, v, t };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(seed: u64) -> (Tensor<f32>, Tensor<f32>) {
        let g = GeneratorConfig::tiny(2);
        let s = g.input_size();
        let x = Tensor::from_fn(vec![2, 1, s, s], |i| ((i as u64 * 2654435761 + seed) % 255) as f32 / 127.5 - 1.0);
        let y = Tensor::from_fn(vec![2, 1, s, s], |i| if (i / s) % 7 == 0 { 1.0 } else { -1.0 });
        (x, y)
    }

    fn trainer() -> Trainer<f32> {
        let cfg = TrainConfig {
            seed: 5,
            ..TrainConfig::default()
        };
        Trainer::new(GeneratorConfig::tiny(2), DiscriminatorConfig { base_channels: 2 }, cfg).unwrap()
    }

    #[test]
    fn step_updates_both_networks() {
        let mut t = trainer();
        let (x, y) = batch(1);
        let g0 = t.gen.store.clone();
        let d0 = t.disc.store.clone();
        let l = t.step_tensors(&x, &y).unwrap();
        assert!(l.gen_loss.is_finite() && l.disc_loss.is_finite());
        assert!((l.gen_loss - (l.adv + 100.0 * l.l1)).abs() < 1e-3 * l.gen_loss.abs().max(1.0));
        assert!(!t.gen.store.same_values(&g0));
        assert!(!t.disc.store.same_values(&d0));
        assert_eq!(t.iteration(), 1);
        assert_eq!(t.gen_opt.steps(), 1);
    }

    #[test]
    fn checkpoint_resume_is_bit_identical() {
        let (x, y) = batch(2);
        let mut a = trainer();
        a.step_tensors(&x, &y).unwrap();
        let ck = Checkpoint::from_bytes(&a.to_checkpoint().to_bytes()).unwrap();
        let mut b = Trainer::<f32>::from_checkpoint(&ck).unwrap();
        let la = a.step_tensors(&x, &y).unwrap();
        let lb = b.step_tensors(&x, &y).unwrap();
        assert_eq!(la, lb);
        assert!(a.gen.store.same_values(&b.gen.store));
        assert!(a.disc.store.same_values(&b.disc.store));
    }

    #[test]
    fn discriminator_step_leaves_generator_gradients_zero() {
        let mut t = trainer();
        let (x, y) = batch(3);
        let mut rng = stream(0, Domain::Dropout, 0);
        let fake = predict(&mut t.gen, &x).unwrap();
        t.gen.store.zero_grads();
        let g0 = t.gen.store.clone();
        t.discriminator_update(&x, &y, &fake, &mut rng).unwrap();
        for id in t.gen.store.trainable() {
            assert!(t.gen.store.get(id).grad().is_none_or(|g| g.iter().all(|&v| v == 0.0)));
        }
        assert!(t.gen.store.same_values(&g0));
    }

    #[test]
    fn empty_batch_is_a_parameter_error() {
        let mut t = trainer();
        assert!(matches!(t.train_step(&[]), Err(Error::Parameter(_))));
    }

    #[test]
    fn zero_epochs_changes_nothing() {
        let mut t = trainer();
        t.config.epochs = 0;
        let g0 = t.gen.store.clone();
        let data = crate::dataset::synth_vessels(1, 64, 2).unwrap();
        let log = t.train_loop(&data, &mut no_observer).unwrap();
        assert!(log.is_empty());
        assert!(t.gen.store.same_values(&g0));
        assert_eq!(t.iteration(), 0);
    }

    #[test]
    fn mismatched_batch_is_rejected() {
        let mut t = trainer();
        let (x, _) = batch(0);
        let y = Tensor::zeros(vec![1, 1, 64, 64]);
        assert!(matches!(t.step_tensors(&x, &y), Err(Error::Dimension(_))));
    }
}
