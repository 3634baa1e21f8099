//! Central finite-difference checks of reverse-mode gradients.
//!
//! The function under test is evaluated on 64-bit scalars. For every sampled
//! coordinate the derivative is estimated with step `h` and again with `h/2`;
//! when the two disagree the perturbation crossed a kink (ReLU, |x|) and the
//! coordinate is counted as skipped instead of compared.

use rand::seq::index::sample;
use rand::SeedableRng;

use crate::error::Result;
use crate::params::ParamStore;
use crate::tape::{Rng, Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Coordinates sampled per tensor (all of them for smaller tensors).
    pub samples: usize,
    /// Magnitude below which errors are measured absolutely.
    pub floor: f64,
    /// Relative disagreement between the `h` and `h/2` estimates that marks
    /// a kink.
    pub kink_tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-4,
            samples: 12,
            floor: 1e-3,
            kink_tolerance: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
    /// `(tensor, index, analytic, numeric)` of the largest error.
    pub worst: Option<(String, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tolerance && self.skipped * 10 <= self.checked + self.skipped
    }
}

pub fn rel_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Compare analytic gradients of `f` against finite differences with respect
/// to every input and every trainable tensor of `store`.
///
/// `f` must build the same scalar function on each call; it receives the
/// input variables in order.
pub fn check_gradients<F>(
    inputs: &[Tensor<f64>],
    store: &mut ParamStore<f64>,
    cfg: &GradCheckConfig,
    mut f: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<f64>, &[Var], &mut ParamStore<f64>) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|t| tape.leaf(t.clone().with_requires_grad(true)))
        .collect();
    let loss = f(&mut tape, &vars, store)?;
    tape.backward(loss)?;
    store.clear_grads();
    tape.accumulate_param_grads(store);

    let mut targets: Vec<(String, Vec<f64>)> = vars
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let g = tape.grad(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[i].numel()]);
            (format!("input{i}"), g)
        })
        .collect();
    let trainable: Vec<_> = store.trainable().collect();
    for &id in &trainable {
        let t = store.get(id);
        let g = t.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.numel()]);
        targets.push((store.name(id).to_string(), g));
    }

    let mut eval = |inputs: &[Tensor<f64>], store: &mut ParamStore<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let loss = f(&mut tape, &vars, store)?;
        Ok(tape.value(loss).data()[0])
    };

    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport::default();
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (t, (name, analytic)) in targets.iter().enumerate() {
        let n = analytic.len();
        let picks: Vec<usize> = if n <= cfg.samples {
            (0..n).collect()
        } else {
            sample(&mut rng, n, cfg.samples).into_vec()
        };
        for idx in picks {
            let mut probe = |delta: f64, work: &mut Vec<Tensor<f64>>, store: &mut ParamStore<f64>| -> Result<f64> {
                let slot = if t < inputs.len() {
                    &mut work[t].data_mut()[idx]
                } else {
                    &mut store.get_mut(trainable[t - inputs.len()]).data_mut()[idx]
                };
                let orig = *slot;
                *slot = orig + delta;
                let v = eval(work, store);
                let slot = if t < inputs.len() {
                    &mut work[t].data_mut()[idx]
                } else {
                    &mut store.get_mut(trainable[t - inputs.len()]).data_mut()[idx]
                };
                *slot = orig;
                v
            };
            let h = cfg.step;
            let n1 = (probe(h, &mut work, store)? - probe(-h, &mut work, store)?) / (2.0 * h);
            let n2 = (probe(h / 2.0, &mut work, store)? - probe(-h / 2.0, &mut work, store)?) / h;
            if rel_error(n1, n2, cfg.floor) > cfg.kink_tolerance {
                report.skipped += 1;
                continue;
            }
            let a = analytic[idx];
            let e = rel_error(a, n1, cfg.floor);
            report.checked += 1;
            if e > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(e);
                report.worst = Some((name.clone(), idx, a, n1));
            }
        }
    }
    Ok(report)
}

/// `Σ wᵢ·xᵢ` with fixed pseudo-random weights: turns any tensor into a scalar
/// whose gradient exercises every element.
pub fn weighted_sum(tape: &mut Tape<f64>, x: Var, seed: u64) -> Result<Var> {
    use rand::Rng as _;
    let mut rng = Rng::seed_from_u64(seed);
    let w = Tensor::from_fn(tape.shape(x).to_vec(), |_| rng.random_range(-1.0..1.0));
    let w = tape.constant(w);
    let p = tape.mul(x, w)?;
    tape.sum(p)
}
