//! Bias-corrected Adam.

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::param("adam eps must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::param(format!("adam {name} must lie in [0, 1)")));
            }
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::param("adam learning rate must be positive"));
        }
        Ok(())
    }
}

/// Moment buffers for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S = f32> {
    pub m: Vec<S>,
    pub v: Vec<S>,
    pub t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![S::zero(); len],
            v: vec![S::zero(); len],
            t: 0,
        }
    }
}

/// One in-place Adam update of `param` given `grad`.
pub fn adam_step<S: Scalar>(param: &mut [S], grad: &[S], state: &mut AdamState<S>, cfg: &AdamConfig) {
    assert_eq!(param.len(), grad.len());
    assert_eq!(param.len(), state.m.len());
    state.t += 1;
    let (b1, b2) = (S::of(cfg.beta1), S::of(cfg.beta2));
    let bc1 = S::of(1.0 - cfg.beta1.powi(state.t as i32));
    let bc2 = S::of(1.0 - cfg.beta2.powi(state.t as i32));
    let (lr, eps) = (S::of(cfg.lr), S::of(cfg.eps));
    for i in 0..param.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (S::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (S::one() - b2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Adam over every trainable tensor of a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<S = f32> {
    pub config: AdamConfig,
    states: Vec<Option<AdamState<S>>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(store: &ParamStore<S>, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        let states = store
            .iter()
            .map(|(_, _, t)| t.requires_grad().then(|| AdamState::new(t.numel())))
            .collect();
        Ok(Adam { config, states })
    }

    /// Apply one update from the accumulated gradients. Parameters without a
    /// gradient buffer are treated as having zero gradient.
    pub fn step(&mut self, store: &mut ParamStore<S>) {
        for (i, (_, _, t)) in store.iter_mut().enumerate() {
            let Some(state) = self.states[i].as_mut() else { continue };
            let grad = t.grad().map(<[S]>::to_vec).unwrap_or_else(|| vec![S::zero(); t.numel()]);
            adam_step(t.data_mut(), &grad, state, &self.config);
        }
    }

    pub fn states(&self) -> &[Option<AdamState<S>>] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [Option<AdamState<S>>] {
        &mut self.states
    }

    /// Step counter shared by all tensors (they advance together).
    pub fn steps(&self) -> u64 {
        self.states.iter().flatten().map(|s| s.t).next().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0f64, -2.0];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut st, &AdamConfig::default());
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        };
        let mut p = vec![0.0f64, 0.0, 0.0];
        let mut st = AdamState::new(3);
        adam_step(&mut p, &[3.0, -0.5, 1e-3], &mut st, &cfg);
        assert!((p[0] + 0.01).abs() < 1e-9);
        assert!((p[1] - 0.01).abs() < 1e-9);
        // eps matters once |g| approaches it
        assert!((p[2] + 0.01).abs() < 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut w = vec![0.0f64];
        let mut st = AdamState::new(1);
        for _ in 0..100 {
            let g = 2.0 * (w[0] - 3.0);
            adam_step(&mut w, &[g], &mut st, &cfg);
        }
        assert!((w[0] - 3.0).abs() < 0.1, "w = {}", w[0]);
        assert_eq!(st.t, 100);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = AdamConfig {
            eps: 0.0,
            ..AdamConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AdamConfig {
            beta2: 1.0,
            ..AdamConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
