//! Shape-preserving pyramid pooling: pool at several grid sizes, project each
//! branch with a 1×1 conv, resample back to the input grid, and fuse with the
//! input.

use crate::error::{Error, Result};
use crate::kernels::Conv2dOptions;
use crate::nn::layers::{Conv2d, Ctx, Init};
use crate::scalar::Scalar;
use crate::tape::Var;

pub const PYRAMID_SCALES: [usize; 4] = [1, 2, 3, 6];

#[derive(Clone, Debug)]
pub struct PyramidPooling {
    pub scales: Vec<usize>,
    pub branches: Vec<Conv2d>,
    pub fuse: Conv2d,
    pub channels: usize,
}

impl PyramidPooling {
    pub fn new<S: Scalar>(init: &mut Init<S>, name: &str, channels: usize) -> Result<Self> {
        let k = PYRAMID_SCALES.len();
        if channels % k != 0 {
            return Err(Error::dim(format!(
                "pyramid pooling needs channels divisible by {k}, got {channels}"
            )));
        }
        let branch_width = channels / k;
        let branches = PYRAMID_SCALES
            .iter()
            .map(|s| {
                Conv2d::new(
                    init,
                    &format!("{name}.branch{s}"),
                    channels,
                    branch_width,
                    (1, 1),
                    Conv2dOptions::default(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let fuse = Conv2d::new(
            init,
            &format!("{name}.fuse"),
            2 * channels,
            channels,
            (1, 1),
            Conv2dOptions::default(),
        )?;
        Ok(PyramidPooling {
            scales: PYRAMID_SCALES.to_vec(),
            branches,
            fuse,
            channels,
        })
    }

    /// Output of the branch at `scales[index]`, already resampled to `h×w`.
    pub fn branch<S: Scalar>(&self, ctx: &mut Ctx<S>, x: Var, index: usize) -> Result<Var> {
        let (_, _, h, w) = ctx.tape.value(x).dims4()?;
        let s = self.scales[index];
        let pooled = ctx.tape.adaptive_avg_pool2d(x, s, s)?;
        let proj = self.branches[index].forward(ctx, pooled)?;
        ctx.tape.upsample_bilinear(proj, h, w)
    }

    pub fn forward<S: Scalar>(&self, ctx: &mut Ctx<S>, x: Var) -> Result<Var> {
        let (_, c, h, w) = ctx.tape.value(x).dims4()?;
        if c != self.channels {
            return Err(Error::dim(format!(
                "pyramid pooling expects {} channels, got {c}",
                self.channels
            )));
        }
        let largest = self.scales.iter().copied().max().unwrap_or(1);
        if h < largest || w < largest {
            return Err(Error::dim(format!(
                "pyramid pooling needs at least {largest}x{largest} input, got {h}x{w}"
            )));
        }
        let mut merged = x;
        for i in 0..self.scales.len() {
            let b = self.branch(ctx, x, i)?;
            merged = ctx.tape.concat_channels(merged, b)?;
        }
        self.fuse.forward(ctx, merged)
    }
}
