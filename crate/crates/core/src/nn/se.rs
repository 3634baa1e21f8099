//! Squeeze-and-excitation channel gating.

use crate::error::{Error, Result};
use crate::nn::layers::{Ctx, Init, Linear};
use crate::scalar::Scalar;
use crate::tape::{Activation, Var};

pub const SE_REDUCTION: usize = 16;
pub const SE_MIN_HIDDEN: usize = 4;

/// Bottleneck width for `channels` at reduction `r`: `channels / r`, raised to
/// at least 4 and never wider than `channels`.
pub fn se_hidden(channels: usize, reduction: usize) -> usize {
    (channels / reduction.max(1)).max(SE_MIN_HIDDEN).min(channels).max(1)
}

/// Global-average "squeeze", two-layer "excitation", and per-channel sigmoid
/// gates applied to the input.
#[derive(Clone, Debug)]
pub struct SqueezeExcite {
    pub fc1: Linear,
    pub fc2: Linear,
    pub channels: usize,
    pub reduction: usize,
}

impl SqueezeExcite {
    pub fn new<S: Scalar>(init: &mut Init<S>, name: &str, channels: usize, reduction: usize) -> Result<Self> {
        let hidden = se_hidden(channels, reduction);
        Ok(SqueezeExcite {
            fc1: Linear::new(init, &format!("{name}.fc1"), channels, hidden)?,
            fc2: Linear::new(init, &format!("{name}.fc2"), hidden, channels)?,
            channels,
            reduction,
        })
    }

    pub fn hidden(&self) -> usize {
        se_hidden(self.channels, self.reduction)
    }

    /// The sigmoid gates `s[n, c]`.
    pub fn gates<S: Scalar>(&self, ctx: &mut Ctx<S>, x: Var) -> Result<Var> {
        let (n, c, _, _) = ctx.tape.value(x).dims4()?;
        if c != self.channels {
            return Err(Error::dim(format!(
                "squeeze-excitation expects {} channels, got {c}",
                self.channels
            )));
        }
        let pooled = ctx.tape.adaptive_avg_pool2d(x, 1, 1)?;
        let flat = ctx.tape.reshape(pooled, &[n, c])?;
        let h = self.fc1.forward(ctx, flat)?;
        let h = ctx.tape.relu(h)?;
        let h = self.fc2.forward(ctx, h)?;
        ctx.tape.activation(h, Activation::Sigmoid)
    }

    pub fn forward<S: Scalar>(&self, ctx: &mut Ctx<S>, x: Var) -> Result<Var> {
        let s = self.gates(ctx, x)?;
        ctx.tape.scale_channels(x, s)
    }
}
