//! Adversarial objectives.
//!
//! Generator: `-log D(x, G(x)) + λ·mean|G(x) - y|`.
//! Discriminator: `-log D(x, y) - log(1 - D(x, G(x)))`.
//! `D(·)` is averaged over the patch grid and probabilities are clamped to
//! `[1e-7, 1 - 1e-7]`.

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};

/// Mean BCE of a probability grid against an all-real or all-fake target.
pub fn bce_against<S: Scalar>(tape: &mut Tape<S>, target_is_real: bool, d_out: Var) -> Result<Var> {
    tape.bce(d_out, target_is_real)
}

/// Handles to the generator objective and its two terms.
#[derive(Clone, Copy, Debug)]
pub struct GeneratorLoss {
    pub total: Var,
    pub adversarial: Var,
    /// Unweighted mean absolute error.
    pub l1: Var,
}

pub fn generator_loss<S: Scalar>(
    tape: &mut Tape<S>,
    d_fake: Var,
    g_out: Var,
    y: Var,
    lambda_l1: f64,
) -> Result<GeneratorLoss> {
    let adversarial = bce_against(tape, true, d_fake)?;
    let diff = tape.sub(g_out, y)?;
    let abs = tape.abs(diff)?;
    let l1 = tape.mean(abs)?;
    let weighted = tape.scale(l1, lambda_l1)?;
    let total = tape.add(adversarial, weighted)?;
    Ok(GeneratorLoss {
        total,
        adversarial,
        l1,
    })
}

pub fn discriminator_loss<S: Scalar>(tape: &mut Tape<S>, d_real: Var, d_fake: Var) -> Result<Var> {
    let real = bce_against(tape, true, d_real)?;
    let fake = bce_against(tape, false, d_fake)?;
    tape.add(real, fake)
}
