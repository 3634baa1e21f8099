//! Patch discriminator: five 4×4 convolutions over the image/mask pair with a
//! squeeze-excitation stage after the fourth, ending in per-patch
//! probabilities.

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::kernels::Conv2dOptions;
use crate::nn::layers::{BatchNorm2d, Conv2d, Ctx, Init};
use crate::nn::se::SE_REDUCTION;
use crate::nn::SqueezeExcite;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tape::{Activation, Mode, Rng, Tape, Var};

use super::generator::LEAKY_SLOPE;

pub const DISC_STRIDES: [usize; 5] = [2, 2, 2, 1, 1];
const DISC_MULTIPLIERS: [usize; 4] = [1, 2, 4, 8];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscriminatorConfig {
    pub base_channels: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { base_channels: 64 }
    }
}

impl DiscriminatorConfig {
    pub fn widths(&self) -> [usize; 5] {
        let b = self.base_channels;
        [
            DISC_MULTIPLIERS[0] * b,
            DISC_MULTIPLIERS[1] * b,
            DISC_MULTIPLIERS[2] * b,
            DISC_MULTIPLIERS[3] * b,
            1,
        ]
    }

    /// Side of the probability grid for a square input of side `size`.
    pub fn patch_grid(&self, size: usize) -> Option<usize> {
        DISC_STRIDES.iter().try_fold(size, |s, &stride| {
            crate::kernels::conv_output_extent(s, 4, stride, 1, 1)
        })
    }
}

#[derive(Clone, Debug)]
pub struct DiscLayer {
    pub conv: Conv2d,
    pub bn: Option<BatchNorm2d>,
    pub leaky: bool,
}

#[derive(Clone, Debug)]
pub struct DiscriminatorParams<S: Scalar = f32> {
    pub config: DiscriminatorConfig,
    pub layers: Vec<DiscLayer>,
    pub se: SqueezeExcite,
    pub store: ParamStore<S>,
}

impl<S: Scalar> DiscriminatorParams<S> {
    pub fn init(config: DiscriminatorConfig, rng: &mut Rng) -> Result<Self> {
        if config.base_channels == 0 {
            return Err(Error::param("base_channels must be positive"));
        }
        let mut store = ParamStore::new();
        let mut init = Init::new(&mut store, rng);
        let widths = config.widths();
        let mut layers = Vec::with_capacity(5);
        let mut cin = 2;
        for (i, (&w, &stride)) in widths.iter().zip(&DISC_STRIDES).enumerate() {
            let name = format!("disc.conv{}", i + 1);
            let conv = Conv2d::new(&mut init, &name, cin, w, (4, 4), Conv2dOptions::new(stride, 1, 1))?;
            let bn = if (1..=3).contains(&i) {
                Some(BatchNorm2d::new(&mut init, &format!("disc.bn{}", i + 1), w)?)
            } else {
                None
            };
            layers.push(DiscLayer {
                conv,
                bn,
                leaky: i < 4,
            });
            cin = w;
        }
        let se = SqueezeExcite::new(&mut init, "disc.se", widths[3], SE_REDUCTION)?;
        Ok(DiscriminatorParams {
            config,
            layers,
            se,
            store,
        })
    }

    pub fn seeded(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        Self::init(config, &mut Rng::seed_from_u64(seed))
    }

    /// Probability grid for the pair `(x, m)`. With `track_params` false the
    /// weights enter the tape as constants, so only the inputs get gradients.
    pub fn forward(
        &mut self,
        tape: &mut Tape<S>,
        x: Var,
        m: Var,
        mode: Mode,
        rng: &mut Rng,
        track_params: bool,
    ) -> Result<Var> {
        if tape.shape(x) != tape.shape(m) {
            return Err(Error::dim(format!(
                "discriminator inputs differ: image {:?} vs mask {:?}",
                tape.shape(x),
                tape.shape(m)
            )));
        }
        let DiscriminatorParams {
            layers, se, store, ..
        } = self;
        let mut ctx = Ctx::new(tape, store, mode, rng);
        ctx.track_params = track_params;
        let mut h = ctx.tape.concat_channels(x, m)?;
        for (i, layer) in layers.iter().enumerate() {
            h = layer.conv.forward(&mut ctx, h)?;
            if let Some(bn) = &layer.bn {
                h = bn.forward(&mut ctx, h)?;
            }
            if layer.leaky {
                h = ctx.tape.activation(h, Activation::LeakyRelu(LEAKY_SLOPE))?;
            }
            if i == 3 {
                h = se.forward(&mut ctx, h)?;
            }
        }
        ctx.tape.activation(h, Activation::Sigmoid)
    }
}
