use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `Σ_k σ_k · v_k h_kᵀ`: a `d×d` kernel as a weighted sum of outer products
/// of 1-D filters.
pub fn compose_rank1<S: Scalar>(sigmas: &[S], v_list: &[Vec<S>], h_list: &[Vec<S>]) -> Result<Tensor<S>> {
    if sigmas.is_empty() {
        return Err(Error::param("rank-1 composition needs at least one term"));
    }
    if v_list.len() != sigmas.len() || h_list.len() != sigmas.len() {
        return Err(Error::param(format!(
            "term counts differ: {} sigmas, {} vertical, {} horizontal",
            sigmas.len(),
            v_list.len(),
            h_list.len()
        )));
    }
    let d = v_list[0].len();
    if d == 0 || v_list.iter().chain(h_list).any(|f| f.len() != d) {
        return Err(Error::param("all 1-D filters must share one positive length"));
    }
    let mut k = vec![S::zero(); d * d];
    for ((&s, v), h) in sigmas.iter().zip(v_list).zip(h_list) {
        for i in 0..d {
            for j in 0..d {
                k[i * d + j] += s * v[i] * h[j];
            }
        }
    }
    Tensor::new(vec![d, d], k)
}
