//! Parameterized layers and the context they run in.

use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::kernels::Conv2dOptions;
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tape::{BatchNormOptions, Mode, Rng, Tape, Var};
use crate::tensor::Tensor;

/// Standard deviation of the normal initializer for conv and linear weights.
pub const INIT_STD: f64 = 0.02;

/// Everything a forward pass needs besides its input.
pub struct Ctx<'a, S: Scalar> {
    pub tape: &'a mut Tape<S>,
    pub store: &'a mut ParamStore<S>,
    pub mode: Mode,
    pub rng: &'a mut Rng,
    /// When false, parameters enter the tape as constants and receive no
    /// gradient.
    pub track_params: bool,
    pub bn: BatchNormOptions,
}

impl<'a, S: Scalar> Ctx<'a, S> {
    pub fn new(
        tape: &'a mut Tape<S>,
        store: &'a mut ParamStore<S>,
        mode: Mode,
        rng: &'a mut Rng,
    ) -> Self {
        Ctx {
            tape,
            store,
            mode,
            rng,
            track_params: true,
            bn: BatchNormOptions::default(),
        }
    }

    pub fn frozen(mut self) -> Self {
        self.track_params = false;
        self
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if self.track_params {
            self.tape.param(self.store, id)
        } else {
            self.tape.constant(self.store.get(id).clone())
        }
    }
}

/// Allocates named parameters and draws their initial values.
pub struct Init<'a, S: Scalar> {
    pub store: &'a mut ParamStore<S>,
    pub rng: &'a mut Rng,
}

impl<'a, S: Scalar> Init<'a, S> {
    pub fn new(store: &'a mut ParamStore<S>, rng: &'a mut Rng) -> Self {
        Init { store, rng }
    }

    pub fn normal(&mut self, name: &str, shape: Vec<usize>, mean: f64, std: f64) -> Result<ParamId> {
        let dist = Normal::new(mean, std).expect("valid normal parameters");
        let rng = &mut *self.rng;
        let t = Tensor::from_fn(shape, |_| S::of(dist.sample(rng))).with_requires_grad(true);
        self.store.insert(name, t)
    }

    pub fn constant(&mut self, name: &str, shape: Vec<usize>, value: f64, trainable: bool) -> Result<ParamId> {
        let t = Tensor::full(shape, S::of(value)).with_requires_grad(trainable);
        self.store.insert(name, t)
    }
}

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub opts: Conv2dOptions,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Conv2d {
    pub fn new<S: Scalar>(
        init: &mut Init<S>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        opts: Conv2dOptions,
    ) -> Result<Self> {
        let weight = init.normal(
            &format!("{name}.weight"),
            vec![out_channels, in_channels, kernel.0, kernel.1],
            0.0,
            INIT_STD,
        )?;
        let bias = Some(init.constant(&format!("{name}.bias"), vec![out_channels], 0.0, true)?);
        Ok(Conv2d {
            weight,
            bias,
            opts,
            in_channels,
            out_channels,
        })
    }

    pub fn forward<S: Scalar>(&self, ctx: &mut Ctx<S>, x: Var) -> Result<Var> {
        let w = ctx.param(self.weight);
        let b = self.bias.map(|b| ctx.param(b));
        ctx.tape.conv2d(x, w, b, self.opts)
    }
}

#[derive(Clone, Debug)]
pub struct ConvTranspose2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub stride: usize,
    pub padding: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvTranspose2d {
    pub fn new<S: Scalar>(
        init: &mut Init<S>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let weight = init.normal(
            &format!("{name}.weight"),
            vec![in_channels, out_channels, kernel, kernel],
            0.0,
            INIT_STD,
        )?;
        let bias = Some(init.constant(&format!("{name}.bias"), vec![out_channels], 0.0, true)?);
        Ok(ConvTranspose2d {
            weight,
            bias,
            stride,
            padding,
            in_channels,
            out_channels,
        })
    }

    pub fn forward<S: Scalar>(&self, ctx: &mut Ctx<S>, x: Var) -> Result<Var> {
        let w = ctx.param(self.weight);
        let b = self.bias.map(|b| ctx.param(b));
        ctx.tape.conv_transpose2d(x, w, b, self.stride, self.padding)
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm2d {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

impl BatchNorm2d {
    pub fn new<S: Scalar>(init: &mut Init<S>, name: &str, channels: usize) -> Result<Self> {
        Ok(BatchNorm2d {
            gamma: init.normal(&format!("{name}.gamma"), vec![channels], 1.0, INIT_STD)?,
            beta: init.constant(&format!("{name}.beta"), vec![channels], 0.0, true)?,
            running_mean: init.constant(&format!("{name}.running_mean"), vec![channels], 0.0, false)?,
            running_var: init.constant(&format!("{name}.running_var"), vec![channels], 1.0, false)?,
        })
    }

    pub fn forward<S: Scalar>(&self, ctx: &mut Ctx<S>, x: Var) -> Result<Var> {
        let gamma = ctx.param(self.gamma);
        let beta = ctx.param(self.beta);
        let mut rm = ctx.store.get(self.running_mean).data().to_vec();
        let mut rv = ctx.store.get(self.running_var).data().to_vec();
        let out = ctx
            .tape
            .batch_norm(x, gamma, beta, &mut rm, &mut rv, ctx.mode, ctx.bn)?;
        if ctx.mode == Mode::Train {
            ctx.store.get_mut(self.running_mean).data_mut().copy_from_slice(&rm);
            ctx.store.get_mut(self.running_var).data_mut().copy_from_slice(&rv);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Linear {
    pub fn new<S: Scalar>(init: &mut Init<S>, name: &str, inputs: usize, outputs: usize) -> Result<Self> {
        Ok(Linear {
            weight: init.normal(&format!("{name}.weight"), vec![outputs, inputs], 0.0, INIT_STD)?,
            bias: Some(init.constant(&format!("{name}.bias"), vec![outputs], 0.0, true)?),
        })
    }

    pub fn forward<S: Scalar>(&self, ctx: &mut Ctx<S>, x: Var) -> Result<Var> {
        let w = ctx.param(self.weight);
        let b = self.bias.map(|b| ctx.param(b));
        ctx.tape.linear(x, w, b)
    }
}
