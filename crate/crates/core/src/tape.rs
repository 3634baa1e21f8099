//! Reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation of one forward pass. Values live on the
//! tape; parameters are copied in from a [`ParamStore`] and their gradients
//! are routed back with [`Tape::accumulate_param_grads`]. A new tape is built
//! for every iteration, so no graph outlives its forward pass.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::kernels::conv::{self, Conv2dOptions};
use crate::kernels::pool;
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Seeded generator used for dropout and initialization.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::LeakyRelu(slope) => {
                if v > 0.0 {
                    v
                } else {
                    slope * v
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
            Activation::Tanh => v.tanh(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Eval,
}

/// Batchnorm hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchNormOptions {
    pub momentum: f64,
    pub eps: f64,
}

impl Default for BatchNormOptions {
    fn default() -> Self {
        BatchNormOptions {
            momentum: 0.1,
            eps: 1e-5,
        }
    }
}

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

enum Op<S> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        opts: Conv2dOptions,
    },
    ConvTranspose2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
    },
    AdaptiveAvgPool {
        x: Var,
    },
    Upsample {
        x: Var,
    },
    Act {
        x: Var,
        kind: Activation,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<S>,
        inv_std: Vec<S>,
        train: bool,
    },
    Dropout {
        x: Var,
        mask: Vec<S>,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        k: S,
    },
    ScaleChannels {
        x: Var,
        s: Var,
    },
    Reshape {
        x: Var,
    },
    Sum {
        x: Var,
    },
    Mean {
        x: Var,
    },
    Abs {
        x: Var,
    },
    Bce {
        x: Var,
        real: bool,
    },
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    tracked: bool,
}

struct Binding {
    var: Var,
    store: u64,
    id: ParamId,
}

/// Operation recorder for one forward/backward pass.
pub struct Tape<S = f32> {
    nodes: Vec<Node<S>>,
    bindings: Vec<Binding>,
    leaf_grads: Vec<Option<Vec<S>>>,
    macs: u64,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn same_shape<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn f64_sum<S: Scalar>(xs: &[S]) -> f64 {
    xs.iter().map(|v| v.to_f64c()).sum()
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            bindings: Vec::new(),
            leaf_grads: Vec::new(),
            macs: 0,
        }
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        self.leaf_grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// Record an input value. Gradients are kept when `requires_grad` is set.
    pub fn leaf(&mut self, t: Tensor<S>) -> Var {
        let tracked = t.requires_grad();
        let mut t = t;
        t.clear_grad();
        self.push(t, Op::Leaf, tracked)
    }

    /// Record a value that never receives a gradient.
    pub fn constant(&mut self, t: Tensor<S>) -> Var {
        let mut t = t.with_requires_grad(false);
        t.clear_grad();
        self.push(t, Op::Leaf, false)
    }

    /// Copy a stored parameter onto the tape, remembering where its gradient
    /// belongs.
    pub fn param(&mut self, store: &ParamStore<S>, id: ParamId) -> Var {
        let t = store.get(id);
        let tracked = t.requires_grad();
        let mut value = t.clone();
        value.clear_grad();
        let var = self.push(value, Op::Leaf, tracked);
        if tracked {
            self.bindings.push(Binding {
                var,
                store: store.tag(),
                id,
            });
        }
        var
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of a tracked leaf after [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&[S]> {
        self.leaf_grads[v.0].as_deref()
    }

    /// Multiply-accumulates spent by convolution operators so far.
    pub fn macs(&self) -> u64 {
        self.macs
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, opts: Conv2dOptions) -> Result<Var> {
        let macs = conv::conv2d_macs(self.value(x), self.value(w), opts)?;
        self.macs += macs;
        let (xv, wv) = (self.value(x), self.value(w));
        let out = conv::conv2d_forward(xv, wv, b.map(|b| self.value(b)), opts)?;
        let tracked = self.tracked(x) || self.tracked(w) || b.is_some_and(|b| self.tracked(b));
        Ok(self.push(out, Op::Conv2d { x, w, b, opts }, tracked))
    }

    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let macs = conv::conv_transpose2d_macs(self.value(x), self.value(w), stride, padding)?;
        self.macs += macs;
        let (xv, wv) = (self.value(x), self.value(w));
        let out = conv::conv_transpose2d_forward(xv, wv, b.map(|b| self.value(b)), stride, padding)?;
        let tracked = self.tracked(x) || self.tracked(w) || b.is_some_and(|b| self.tracked(b));
        Ok(self.push(
            out,
            Op::ConvTranspose2d {
                x,
                w,
                b,
                stride,
                padding,
            },
            tracked,
        ))
    }

    pub fn adaptive_avg_pool2d(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let out = pool::adaptive_avg_pool_forward(self.value(x), out_h, out_w)?;
        Ok(self.push(out, Op::AdaptiveAvgPool { x }, self.tracked(x)))
    }

    pub fn upsample_bilinear(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let out = pool::upsample_bilinear_forward(self.value(x), out_h, out_w)?;
        Ok(self.push(out, Op::Upsample { x }, self.tracked(x)))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        if let Activation::LeakyRelu(slope) = kind {
            if !slope.is_finite() {
                return Err(Error::param("leaky-relu slope must be finite"));
            }
        }
        let out = match kind {
            Activation::Relu => self.value(x).map(|v| v.max(S::zero())),
            Activation::LeakyRelu(slope) => {
                let slope = S::of(slope);
                self.value(x)
                    .map(|v| if v > S::zero() { v } else { slope * v })
            }
            Activation::Sigmoid => self.value(x).map(|v| S::one() / (S::one() + (-v).exp())),
            Activation::Tanh => self.value(x).map(|v| v.tanh()),
        };
        Ok(self.push(out, Op::Act { x, kind }, self.tracked(x)))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.activation(x, Activation::Relu)
    }

    /// Per-channel batch normalization. Train mode normalizes with batch
    /// statistics and folds them into the running buffers; eval mode reads the
    /// running buffers.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &mut [S],
        running_var: &mut [S],
        mode: Mode,
        opts: BatchNormOptions,
    ) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        for (name, v) in [("gamma", gamma), ("beta", beta)] {
            if self.value(v).numel() != c {
                return Err(Error::dim(format!(
                    "batchnorm {name} has {} elements for {c} channels",
                    self.value(v).numel()
                )));
            }
        }
        if running_mean.len() != c || running_var.len() != c {
            return Err(Error::dim("batchnorm running statistics length mismatch"));
        }
        if opts.eps < 0.0 || !opts.eps.is_finite() {
            return Err(Error::param("batchnorm eps must be non-negative"));
        }
        let plane = h * w;
        let count = n * plane;
        let train = mode == Mode::Train;
        let xs = self.value(x).data();
        let mut mean = vec![0.0f64; c];
        let mut var = vec![0.0f64; c];
        if train {
            for ch in 0..c {
                let mut acc = 0.0;
                for b in 0..n {
                    acc += f64_sum(&xs[(b * c + ch) * plane..(b * c + ch + 1) * plane]);
                }
                let m = acc / count as f64;
                let mut sq = 0.0;
                for b in 0..n {
                    for v in &xs[(b * c + ch) * plane..(b * c + ch + 1) * plane] {
                        let d = v.to_f64c() - m;
                        sq += d * d;
                    }
                }
                mean[ch] = m;
                var[ch] = sq / count as f64;
                if opts.eps == 0.0 && var[ch] == 0.0 {
                    return Err(Error::DivisionGuard(format!(
                        "channel {ch} has zero variance over {count} element(s) and eps is 0"
                    )));
                }
            }
        } else {
            for ch in 0..c {
                mean[ch] = running_mean[ch].to_f64c();
                var[ch] = running_var[ch].to_f64c();
                if opts.eps == 0.0 && var[ch] <= 0.0 {
                    return Err(Error::DivisionGuard(format!(
                        "channel {ch} running variance is 0 and eps is 0"
                    )));
                }
            }
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + opts.eps).sqrt()).collect();
        let g = self.value(gamma).data();
        let be = self.value(beta).data();
        let mut xhat = vec![S::zero(); xs.len()];
        let mut out = vec![S::zero(); xs.len()];
        for b in 0..n {
            for ch in 0..c {
                let base = (b * c + ch) * plane;
                let (m, is) = (mean[ch], inv_std[ch]);
                let (gc, bc) = (g[ch].to_f64c(), be[ch].to_f64c());
                for i in base..base + plane {
                    let xh = (xs[i].to_f64c() - m) * is;
                    xhat[i] = S::of(xh);
                    out[i] = S::of(gc * xh + bc);
                }
            }
        }
        if train {
            let mom = opts.momentum;
            for ch in 0..c {
                let unbiased = if count > 1 {
                    var[ch] * count as f64 / (count - 1) as f64
                } else {
                    var[ch]
                };
                running_mean[ch] =
                    S::of((1.0 - mom) * running_mean[ch].to_f64c() + mom * mean[ch]);
                running_var[ch] = S::of((1.0 - mom) * running_var[ch].to_f64c() + mom * unbiased);
            }
        }
        let out = Tensor::new(vec![n, c, h, w], out)?;
        let tracked = self.tracked(x) || self.tracked(gamma) || self.tracked(beta);
        Ok(self.push(
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std: inv_std.into_iter().map(S::of).collect(),
                train,
            },
            tracked,
        ))
    }

    /// Inverted dropout: survivors are scaled by `1/(1-rate)`. Identity in
    /// eval mode or at rate 0.
    pub fn dropout(&mut self, x: Var, rate: f64, mode: Mode, rng: &mut Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::param(format!("dropout rate {rate} outside [0, 1)")));
        }
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(x);
        }
        let keep = S::of(1.0 / (1.0 - rate));
        let mask: Vec<S> = (0..self.value(x).numel())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    S::zero()
                } else {
                    keep
                }
            })
            .collect();
        let xv = self.value(x);
        let data = xv.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let out = Tensor::new(xv.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Dropout { x, mask }, self.tracked(x)))
    }

    /// Channel concatenation: channels of `a` precede channels of `b`.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, ca, ha, wa) = self.value(a).dims4()?;
        let (nb, cb, hb, wb) = self.value(b).dims4()?;
        if (na, ha, wa) != (nb, hb, wb) {
            return Err(Error::dim(format!(
                "concat: non-channel extents differ ({na},{ha},{wa}) vs ({nb},{hb},{wb})"
            )));
        }
        let plane = ha * wa;
        let mut data = Vec::with_capacity(na * (ca + cb) * plane);
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        for n in 0..na {
            data.extend_from_slice(&av[n * ca * plane..(n + 1) * ca * plane]);
            data.extend_from_slice(&bv[n * cb * plane..(n + 1) * cb * plane]);
        }
        let out = Tensor::new(vec![na, ca + cb, ha, wa], data)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::Concat { a, b }, tracked))
    }

    /// Rows of `x[N,Cin]` mapped through `x·wᵀ + b` with `w[Cout,Cin]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.value(w);
        let (n, cin) = match xv.shape() {
            &[n, cin] => (n, cin),
            s => return Err(Error::dim(format!("linear input must be [N,Cin], got {s:?}"))),
        };
        let (cout, wcin) = match wv.shape() {
            &[o, i] => (o, i),
            s => return Err(Error::dim(format!("linear weight must be [Cout,Cin], got {s:?}"))),
        };
        if wcin != cin {
            return Err(Error::dim(format!(
                "linear: input width {cin} but weight expects {wcin}"
            )));
        }
        if let Some(b) = b {
            if self.value(b).numel() != cout {
                return Err(Error::dim("linear bias length mismatch"));
            }
        }
        let mut out = vec![S::zero(); n * cout];
        for r in 0..n {
            let row = &xv.data()[r * cin..(r + 1) * cin];
            for o in 0..cout {
                let wr = &wv.data()[o * cin..(o + 1) * cin];
                let mut acc = S::zero();
                for (a, c) in row.iter().zip(wr) {
                    acc += *a * *c;
                }
                if let Some(b) = b {
                    acc += self.value(b).data()[o];
                }
                out[r * cout + o] = acc;
            }
        }
        let out = Tensor::new(vec![n, cout], out)?;
        let tracked = self.tracked(x) || self.tracked(w) || b.is_some_and(|b| self.tracked(b));
        Ok(self.push(out, Op::Linear { x, w, b }, tracked))
    }

    fn zip_with(&mut self, a: Var, b: Var, what: &str, f: impl Fn(S, S) -> S, op: Op<S>) -> Result<Var> {
        same_shape(self.value(a), self.value(b), what)?;
        let av = self.value(a);
        let data = av
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, op, tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "add", |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "sub", |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "mul", |x, y| x * y, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Result<Var> {
        let k = S::of(k);
        let out = self.value(x).map(|v| v * k);
        Ok(self.push(out, Op::Scale { x, k }, self.tracked(x)))
    }

    /// `x[n,c,h,w] * s[n,c]`.
    pub fn scale_channels(&mut self, x: Var, s: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4()?;
        if self.value(s).numel() != n * c {
            return Err(Error::dim(format!(
                "channel scales have {} elements for {n}x{c} channels",
                self.value(s).numel()
            )));
        }
        let plane = h * w;
        let sv = self.value(s).data();
        let data = self
            .value(x)
            .data()
            .chunks(plane)
            .zip(sv)
            .flat_map(|(chunk, &k)| chunk.iter().map(move |&v| v * k))
            .collect();
        let out = Tensor::new(vec![n, c, h, w], data)?;
        let tracked = self.tracked(x) || self.tracked(s);
        Ok(self.push(out, Op::ScaleChannels { x, s }, tracked))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape.to_vec())?;
        Ok(self.push(out, Op::Reshape { x }, self.tracked(x)))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let out = Tensor::scalar(S::of(f64_sum(self.value(x).data())));
        Ok(self.push(out, Op::Sum { x }, self.tracked(x)))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let out = Tensor::scalar(S::of(f64_sum(xv.data()) / xv.numel() as f64));
        Ok(self.push(out, Op::Mean { x }, self.tracked(x)))
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.abs());
        Ok(self.push(out, Op::Abs { x }, self.tracked(x)))
    }

    /// Mean binary cross-entropy of probabilities `x` against an all-real
    /// (`-log d`) or all-fake (`-log(1-d)`) target, with clamping.
    pub fn bce(&mut self, x: Var, target_is_real: bool) -> Result<Var> {
        let xv = self.value(x);
        let total: f64 = xv
            .data()
            .iter()
            .map(|v| {
                let d = v.to_f64c().clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                if target_is_real {
                    -d.ln()
                } else {
                    -(1.0 - d).ln()
                }
            })
            .sum();
        let out = Tensor::scalar(S::of(total / xv.numel() as f64));
        Ok(self.push(
            out,
            Op::Bce {
                x,
                real: target_is_real,
            },
            self.tracked(x),
        ))
    }

    /// Propagate `∂loss/∂·` to every tracked leaf. Leaf gradients accumulate
    /// across calls.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<S>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![S::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].tracked {
                continue;
            }
            if let Op::Leaf = self.nodes[i].op {
                match self.leaf_grads[i].as_mut() {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &v)| *a += v),
                    None => self.leaf_grads[i] = Some(g),
                }
                continue;
            }
            self.backprop_node(i, &g, &mut grads)?;
        }
        Ok(())
    }

    fn send(&self, grads: &mut [Option<Vec<S>>], v: Var, g: Vec<S>) {
        if !self.tracked(v) {
            return;
        }
        match grads[v.0].as_mut() {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &x)| *a += x),
            None => grads[v.0] = Some(g),
        }
    }

    fn backprop_node(&self, i: usize, g: &[S], grads: &mut [Option<Vec<S>>]) -> Result<()> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, opts } => {
                let r = conv::conv2d_backward(
                    self.value(*x),
                    self.value(*w),
                    g,
                    *opts,
                    self.tracked(*x),
                    self.tracked(*w),
                )?;
                if let Some(dx) = r.dx {
                    self.send(grads, *x, dx);
                }
                if let Some(dw) = r.dw {
                    self.send(grads, *w, dw);
                }
                if let Some(b) = b {
                    self.send(grads, *b, r.db);
                }
            }
            Op::ConvTranspose2d {
                x,
                w,
                b,
                stride,
                padding,
            } => {
                let r = conv::conv_transpose2d_backward(
                    self.value(*x),
                    self.value(*w),
                    g,
                    *stride,
                    *padding,
                    self.tracked(*x),
                    self.tracked(*w),
                )?;
                if let Some(dx) = r.dx {
                    self.send(grads, *x, dx);
                }
                if let Some(dw) = r.dw {
                    self.send(grads, *w, dw);
                }
                if let Some(b) = b {
                    self.send(grads, *b, r.db);
                }
            }
            Op::AdaptiveAvgPool { x } => {
                let (_, _, oh, ow) = node.value.dims4()?;
                let dx = pool::adaptive_avg_pool_backward(self.value(*x).dims4()?, oh, ow, g);
                self.send(grads, *x, dx);
            }
            Op::Upsample { x } => {
                let (_, _, oh, ow) = node.value.dims4()?;
                let dx = pool::upsample_bilinear_backward(self.value(*x).dims4()?, oh, ow, g);
                self.send(grads, *x, dx);
            }
            Op::Act { x, kind } => {
                let xv = self.value(*x).data();
                let yv = node.value.data();
                let dx: Vec<S> = match *kind {
                    Activation::Relu => g
                        .iter()
                        .zip(xv)
                        .map(|(&g, &x)| if x > S::zero() { g } else { S::zero() })
                        .collect(),
                    Activation::LeakyRelu(slope) => {
                        let slope = S::of(slope);
                        g.iter()
                            .zip(xv)
                            .map(|(&g, &x)| if x > S::zero() { g } else { g * slope })
                            .collect()
                    }
                    Activation::Sigmoid => g
                        .iter()
                        .zip(yv)
                        .map(|(&g, &y)| g * y * (S::one() - y))
                        .collect(),
                    Activation::Tanh => g
                        .iter()
                        .zip(yv)
                        .map(|(&g, &y)| g * (S::one() - y * y))
                        .collect(),
                };
                self.send(grads, *x, dx);
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            } => {
                let (n, c, h, w) = node.value.dims4()?;
                let plane = h * w;
                let count = (n * plane) as f64;
                let gam = self.value(*gamma).data();
                let mut dgamma = vec![S::zero(); c];
                let mut dbeta = vec![S::zero(); c];
                let mut sum_dy = vec![0.0f64; c];
                let mut sum_dy_xhat = vec![0.0f64; c];
                for b in 0..n {
                    for ch in 0..c {
                        let base = (b * c + ch) * plane;
                        for k in base..base + plane {
                            let gy = g[k].to_f64c();
                            sum_dy[ch] += gy;
                            sum_dy_xhat[ch] += gy * xhat[k].to_f64c();
                        }
                    }
                }
                for ch in 0..c {
                    dgamma[ch] = S::of(sum_dy_xhat[ch]);
                    dbeta[ch] = S::of(sum_dy[ch]);
                }
                if self.tracked(*x) {
                    let mut dx = vec![S::zero(); g.len()];
                    for b in 0..n {
                        for ch in 0..c {
                            let base = (b * c + ch) * plane;
                            let gi = gam[ch].to_f64c() * inv_std[ch].to_f64c();
                            for k in base..base + plane {
                                let gy = g[k].to_f64c();
                                dx[k] = if *train {
                                    S::of(
                                        gi * (gy
                                            - sum_dy[ch] / count
                                            - xhat[k].to_f64c() * sum_dy_xhat[ch] / count),
                                    )
                                } else {
                                    S::of(gi * gy)
                                };
                            }
                        }
                    }
                    self.send(grads, *x, dx);
                }
                self.send(grads, *gamma, dgamma);
                self.send(grads, *beta, dbeta);
            }
            Op::Dropout { x, mask } => {
                let dx = g.iter().zip(mask).map(|(&g, &m)| g * m).collect();
                self.send(grads, *x, dx);
            }
            Op::Concat { a, b } => {
                let (n, ca, h, w) = self.value(*a).dims4()?;
                let (_, cb, _, _) = self.value(*b).dims4()?;
                let plane = h * w;
                let mut da = Vec::with_capacity(n * ca * plane);
                let mut db = Vec::with_capacity(n * cb * plane);
                for s in 0..n {
                    let base = s * (ca + cb) * plane;
                    da.extend_from_slice(&g[base..base + ca * plane]);
                    db.extend_from_slice(&g[base + ca * plane..base + (ca + cb) * plane]);
                }
                self.send(grads, *a, da);
                self.send(grads, *b, db);
            }
            Op::Linear { x, w, b } => {
                let xv = self.value(*x);
                let wv = self.value(*w);
                let (n, cin) = (xv.shape()[0], xv.shape()[1]);
                let cout = wv.shape()[0];
                if self.tracked(*x) {
                    let mut dx = vec![S::zero(); n * cin];
                    for r in 0..n {
                        for o in 0..cout {
                            let gy = g[r * cout + o];
                            for i in 0..cin {
                                dx[r * cin + i] += gy * wv.data()[o * cin + i];
                            }
                        }
                    }
                    self.send(grads, *x, dx);
                }
                if self.tracked(*w) {
                    let mut dw = vec![S::zero(); cout * cin];
                    for r in 0..n {
                        for o in 0..cout {
                            let gy = g[r * cout + o];
                            for i in 0..cin {
                                dw[o * cin + i] += gy * xv.data()[r * cin + i];
                            }
                        }
                    }
                    self.send(grads, *w, dw);
                }
                if let Some(b) = b {
                    let mut db = vec![S::zero(); cout];
                    for r in 0..n {
                        for o in 0..cout {
                            db[o] += g[r * cout + o];
                        }
                    }
                    self.send(grads, *b, db);
                }
            }
            Op::Add { a, b } => {
                self.send(grads, *a, g.to_vec());
                self.send(grads, *b, g.to_vec());
            }
            Op::Sub { a, b } => {
                self.send(grads, *a, g.to_vec());
                self.send(grads, *b, g.iter().map(|&v| -v).collect());
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.send(grads, *a, g.iter().zip(bv).map(|(&g, &y)| g * y).collect());
                self.send(grads, *b, g.iter().zip(av).map(|(&g, &x)| g * x).collect());
            }
            Op::Scale { x, k } => {
                self.send(grads, *x, g.iter().map(|&v| v * *k).collect());
            }
            Op::ScaleChannels { x, s } => {
                let (_, _, h, w) = node.value.dims4()?;
                let plane = h * w;
                let xv = self.value(*x).data();
                let sv = self.value(*s).data();
                if self.tracked(*x) {
                    let dx = g
                        .chunks(plane)
                        .zip(sv)
                        .flat_map(|(chunk, &k)| chunk.iter().map(move |&v| v * k))
                        .collect();
                    self.send(grads, *x, dx);
                }
                if self.tracked(*s) {
                    let ds = g
                        .chunks(plane)
                        .zip(xv.chunks(plane))
                        .map(|(gc, xc)| {
                            let mut acc = S::zero();
                            for (&a, &b) in gc.iter().zip(xc) {
                                acc += a * b;
                            }
                            acc
                        })
                        .collect();
                    self.send(grads, *s, ds);
                }
            }
            Op::Reshape { x } => self.send(grads, *x, g.to_vec()),
            Op::Sum { x } => {
                let n = self.value(*x).numel();
                self.send(grads, *x, vec![g[0]; n]);
            }
            Op::Mean { x } => {
                let n = self.value(*x).numel();
                self.send(grads, *x, vec![g[0] / S::of(n as f64); n]);
            }
            Op::Abs { x } => {
                let dx = g
                    .iter()
                    .zip(self.value(*x).data())
                    .map(|(&g, &x)| {
                        if x > S::zero() {
                            g
                        } else if x < S::zero() {
                            -g
                        } else {
                            S::zero()
                        }
                    })
                    .collect();
                self.send(grads, *x, dx);
            }
            Op::Bce { x, real } => {
                let xv = self.value(*x).data();
                let n = S::of(xv.len() as f64);
                let (lo, hi) = (S::of(PROB_CLAMP), S::of(1.0 - PROB_CLAMP));
                let dx = xv
                    .iter()
                    .map(|&d| {
                        if d < lo || d > hi {
                            S::zero()
                        } else if *real {
                            -g[0] / (d * n)
                        } else {
                            g[0] / ((S::one() - d) * n)
                        }
                    })
                    .collect();
                self.send(grads, *x, dx);
            }
        }
        Ok(())
    }

    /// Add the gradients of every parameter that was copied from `store` into
    /// that store's gradient buffers.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore<S>) {
        let tag = store.tag();
        for b in self.bindings.iter().filter(|b| b.store == tag) {
            if let Some(g) = self.leaf_grads[b.var.0].as_deref() {
                store.get_mut(b.id).accumulate_grad(g);
            }
        }
    }
}
