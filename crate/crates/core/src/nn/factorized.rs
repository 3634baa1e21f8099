//! Residual block built from 1-D convolutions.
//!
//! ```text
//! x ─ 3×1 ─ relu ─ 1×3 ─ bn ─ relu ─ 3×1(d) ─ relu ─ 1×3(d) ─ bn ─ dropout ─(+x)─ relu
//! ```
//! Every 1-D conv pads `dilation·(k-1)/2` along its active axis so the block
//! preserves shape.

use crate::error::{Error, Result};
use crate::kernels::Conv2dOptions;
use crate::nn::layers::{BatchNorm2d, Conv2d, Ctx, Init};
use crate::scalar::Scalar;
use crate::tape::Var;

pub const FACT_DROPOUT: f64 = 0.3;
pub const FACT_KERNEL: usize = 3;

fn vertical(dilation: usize) -> Conv2dOptions {
    let pad = dilation * (FACT_KERNEL - 1) / 2;
    Conv2dOptions::axes((1, 1), (pad, 0), (dilation, 1))
}

fn horizontal(dilation: usize) -> Conv2dOptions {
    let pad = dilation * (FACT_KERNEL - 1) / 2;
    Conv2dOptions::axes((1, 1), (0, pad), (1, dilation))
}

#[derive(Clone, Debug)]
pub struct FactorizedBlock {
    pub conv_v1: Conv2d,
    pub conv_h1: Conv2d,
    pub bn1: BatchNorm2d,
    pub conv_v2: Conv2d,
    pub conv_h2: Conv2d,
    pub bn2: BatchNorm2d,
    pub dilation: usize,
    pub dropout: f64,
    pub channels: usize,
}

impl FactorizedBlock {
    pub fn new<S: Scalar>(init: &mut Init<S>, name: &str, channels: usize, dilation: usize) -> Result<Self> {
        if dilation == 0 {
            return Err(Error::param("dilation must be positive"));
        }
        let k = FACT_KERNEL;
        Ok(FactorizedBlock {
            conv_v1: Conv2d::new(init, &format!("{name}.conv3x1_1"), channels, channels, (k, 1), vertical(1))?,
            conv_h1: Conv2d::new(init, &format!("{name}.conv1x3_1"), channels, channels, (1, k), horizontal(1))?,
            bn1: BatchNorm2d::new(init, &format!("{name}.bn1"), channels)?,
            conv_v2: Conv2d::new(init, &format!("{name}.conv3x1_2"), channels, channels, (k, 1), vertical(dilation))?,
            conv_h2: Conv2d::new(init, &format!("{name}.conv1x3_2"), channels, channels, (1, k), horizontal(dilation))?,
            bn2: BatchNorm2d::new(init, &format!("{name}.bn2"), channels)?,
            dilation,
            dropout: FACT_DROPOUT,
            channels,
        })
    }

    pub fn forward<S: Scalar>(&self, ctx: &mut Ctx<S>, x: Var) -> Result<Var> {
        let (_, c, _, _) = ctx.tape.value(x).dims4()?;
        if c != self.channels {
            return Err(Error::dim(format!(
                "factorized block expects {} channels, got {c}",
                self.channels
            )));
        }
        let y = self.conv_v1.forward(ctx, x)?;
        let y = ctx.tape.relu(y)?;
        let y = self.conv_h1.forward(ctx, y)?;
        let y = self.bn1.forward(ctx, y)?;
        let y = ctx.tape.relu(y)?;
        let y = self.conv_v2.forward(ctx, y)?;
        let y = ctx.tape.relu(y)?;
        let y = self.conv_h2.forward(ctx, y)?;
        let y = self.bn2.forward(ctx, y)?;
        let y = ctx.tape.dropout(y, self.dropout, ctx.mode, ctx.rng)?;
        let y = ctx.tape.add(x, y)?;
        ctx.tape.relu(y)
    }
}
