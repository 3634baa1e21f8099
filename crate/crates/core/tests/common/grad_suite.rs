//! Finite-difference cases shared by the gradient tests and the acceptance
//! suite.

use rand::{Rng as _, SeedableRng};
use vesselforge::gradcheck::{check_gradients, weighted_sum, GradCheckConfig, GradCheckReport};
use vesselforge::nn::{BatchNorm2d, Conv2d, Ctx, FactorizedBlock, Init, PyramidPooling, SqueezeExcite};
use vesselforge::nn::ConvTranspose2d;
use vesselforge::train::{discriminator_loss, generator_loss};
use vesselforge::{Conv2dOptions, Mode, ParamStore, Rng, Tensor};

pub fn uniform(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor<f64> {
    let mut rng = Rng::seed_from_u64(seed);
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(lo..hi))
}

/// Replace the small initial weights with values of order one so that no
/// gradient sits near the error floor.
pub fn randomize(store: &mut ParamStore<f64>, seed: u64) {
    let mut rng = Rng::seed_from_u64(seed);
    for (_, name, t) in store.iter_mut() {
        let centre = if name.ends_with("gamma") || name.ends_with("running_var") { 1.0 } else { 0.0 };
        t.data_mut().iter_mut().for_each(|v| *v = centre + rng.random_range(-0.5..0.5));
    }
}

fn cfg() -> GradCheckConfig {
    GradCheckConfig::default()
}

fn with_store<B>(build: impl FnOnce(&mut Init<f64>) -> B) -> (B, ParamStore<f64>) {
    let mut store = ParamStore::new();
    let mut rng = Rng::seed_from_u64(11);
    let block = build(&mut Init::new(&mut store, &mut rng));
    randomize(&mut store, 12);
    (block, store)
}

pub fn conv2d() -> GradCheckReport {
    let opts = Conv2dOptions {
        stride: (2, 1),
        padding: (1, 0),
        dilation: (1, 2),
    };
    let (conv, mut store) = with_store(|i| Conv2d::new(i, "c", 3, 4, (3, 2), opts).unwrap());
    let x = uniform(&[2, 3, 7, 6], -1.0, 1.0, 1);
    check_gradients(&[x], &mut store, &cfg(), |tape, v, store| {
        let mut rng = Rng::seed_from_u64(0);
        let mut ctx = Ctx::new(tape, store, Mode::Train, &mut rng);
        let y = conv.forward(&mut ctx, v[0])?;
        weighted_sum(tape, y, 99)
    })
    .unwrap()
}

pub fn conv_transpose2d() -> GradCheckReport {
    let (deconv, mut store) = with_store(|i| ConvTranspose2d::new(i, "d", 3, 2, 4, 2, 1).unwrap());
    let x = uniform(&[2, 3, 4, 5], -1.0, 1.0, 2);
    check_gradients(&[x], &mut store, &cfg(), |tape, v, store| {
        let mut rng = Rng::seed_from_u64(0);
        let mut ctx = Ctx::new(tape, store, Mode::Train, &mut rng);
        let y = deconv.forward(&mut ctx, v[0])?;
        weighted_sum(tape, y, 98)
    })
    .unwrap()
}

pub fn batchnorm() -> GradCheckReport {
    let (bn, mut store) = with_store(|i| BatchNorm2d::new(i, "bn", 4).unwrap());
    let x = uniform(&[3, 4, 3, 3], -2.0, 2.0, 3);
    check_gradients(&[x], &mut store, &cfg(), |tape, v, store| {
        let mut rng = Rng::seed_from_u64(0);
        let mut ctx = Ctx::new(tape, store, Mode::Train, &mut rng);
        let y = bn.forward(&mut ctx, v[0])?;
        weighted_sum(tape, y, 97)
    })
    .unwrap()
}

pub fn squeeze_excite() -> GradCheckReport {
    let (se, mut store) = with_store(|i| SqueezeExcite::new(i, "se", 8, 16).unwrap());
    let x = uniform(&[2, 8, 5, 5], -1.0, 1.0, 4);
    check_gradients(&[x], &mut store, &cfg(), |tape, v, store| {
        let mut rng = Rng::seed_from_u64(0);
        let mut ctx = Ctx::new(tape, store, Mode::Train, &mut rng);
        let y = se.forward(&mut ctx, v[0])?;
        weighted_sum(tape, y, 96)
    })
    .unwrap()
}

pub fn pyramid_pooling() -> GradCheckReport {
    let (spp, mut store) = with_store(|i| PyramidPooling::new(i, "spp", 8).unwrap());
    let x = uniform(&[2, 8, 7, 6], -1.0, 1.0, 5);
    check_gradients(&[x], &mut store, &cfg(), |tape, v, store| {
        let mut rng = Rng::seed_from_u64(0);
        let mut ctx = Ctx::new(tape, store, Mode::Train, &mut rng);
        let y = spp.forward(&mut ctx, v[0])?;
        weighted_sum(tape, y, 95)
    })
    .unwrap()
}

pub fn factorized_block() -> GradCheckReport {
    let (block, mut store) = with_store(|i| FactorizedBlock::new(i, "fb", 4, 2).unwrap());
    let x = uniform(&[2, 4, 8, 8], -1.0, 1.0, 6);
    check_gradients(&[x], &mut store, &cfg(), |tape, v, store| {
        // Same dropout mask on every evaluation.
        let mut rng = Rng::seed_from_u64(7);
        let mut ctx = Ctx::new(tape, store, Mode::Train, &mut rng);
        let y = block.forward(&mut ctx, v[0])?;
        weighted_sum(tape, y, 94)
    })
    .unwrap()
}

pub fn generator_objective() -> GradCheckReport {
    let d = uniform(&[2, 1, 3, 3], 0.2, 0.8, 7);
    let g = uniform(&[2, 1, 4, 4], -0.9, 0.9, 8);
    let y = uniform(&[2, 1, 4, 4], -1.0, 1.0, 9);
    let mut store = ParamStore::new();
    check_gradients(&[d, g, y], &mut store, &cfg(), |tape, v, _| {
        Ok(generator_loss(tape, v[0], v[1], v[2], 100.0)?.total)
    })
    .unwrap()
}

pub fn discriminator_objective() -> GradCheckReport {
    let real = uniform(&[2, 1, 3, 3], 0.2, 0.8, 10);
    let fake = uniform(&[2, 1, 3, 3], 0.2, 0.8, 11);
    let mut store = ParamStore::new();
    check_gradients(&[real, fake], &mut store, &cfg(), |tape, v, _| discriminator_loss(tape, v[0], v[1])).unwrap()
}

pub type Case = (&'static str, fn() -> GradCheckReport);

pub const CASES: [Case; 8] = [
    ("conv2d", conv2d),
    ("conv_transpose2d", conv_transpose2d),
    ("batchnorm", batchnorm),
    ("squeeze_excite", squeeze_excite),
    ("pyramid_pooling", pyramid_pooling),
    ("factorized_block", factorized_block),
    ("generator_loss", generator_objective),
    ("discriminator_loss", discriminator_objective),
];
