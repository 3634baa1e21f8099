//! Adaptive average pooling and bilinear resampling on `(N, C, H, W)` data.

use crate::error::{Error, Result};
use crate::par;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Bin `i` of an adaptive partition of `input` cells into `out` bins.
pub(crate) fn adaptive_bin(i: usize, input: usize, out: usize) -> (usize, usize) {
    let start = i * input / out;
    let end = ((i + 1) * input).div_ceil(out);
    (start, end)
}

pub(crate) fn adaptive_avg_pool_forward<S: Scalar>(
    x: &Tensor<S>,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor<S>> {
    let (n, c, h, w) = x.dims4()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::dim("adaptive pool output extent must be positive"));
    }
    if out_h > h || out_w > w {
        return Err(Error::dim(format!(
            "adaptive pool to {out_h}x{out_w} exceeds input {h}x{w}"
        )));
    }
    let mut out = vec![S::zero(); n * c * out_h * out_w];
    let src = x.data();
    par::for_each_chunk_mut(&mut out, out_h * out_w, |plane_idx, dst| {
        let plane = &src[plane_idx * h * w..(plane_idx + 1) * h * w];
        for i in 0..out_h {
            let (y0, y1) = adaptive_bin(i, h, out_h);
            for j in 0..out_w {
                let (x0, x1) = adaptive_bin(j, w, out_w);
                let mut acc = 0.0f64;
                for y in y0..y1 {
                    for v in &plane[y * w + x0..y * w + x1] {
                        acc += v.to_f64c();
                    }
                }
                dst[i * out_w + j] = S::of(acc / ((y1 - y0) * (x1 - x0)) as f64);
            }
        }
    });
    Tensor::new(vec![n, c, out_h, out_w], out)
}

pub(crate) fn adaptive_avg_pool_backward<S: Scalar>(
    in_shape: (usize, usize, usize, usize),
    out_h: usize,
    out_w: usize,
    dy: &[S],
) -> Vec<S> {
    let (n, c, h, w) = in_shape;
    let mut dx = vec![S::zero(); n * c * h * w];
    par::for_each_chunk_mut(&mut dx, h * w, |plane_idx, dst| {
        let g = &dy[plane_idx * out_h * out_w..(plane_idx + 1) * out_h * out_w];
        for i in 0..out_h {
            let (y0, y1) = adaptive_bin(i, h, out_h);
            for j in 0..out_w {
                let (x0, x1) = adaptive_bin(j, w, out_w);
                let share = g[i * out_w + j] / S::of(((y1 - y0) * (x1 - x0)) as f64);
                for y in y0..y1 {
                    for v in &mut dst[y * w + x0..y * w + x1] {
                        *v += share;
                    }
                }
            }
        }
    });
    dx
}

/// Source taps `(i0, i1, frac)` for align-corners-false linear resampling.
pub(crate) fn linear_taps(input: usize, out: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / out as f64;
    (0..out)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(input - 1);
            let i1 = (i0 + 1).min(input - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

pub(crate) fn upsample_bilinear_forward<S: Scalar>(
    x: &Tensor<S>,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor<S>> {
    let (n, c, h, w) = x.dims4()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::dim("upsample output extent must be positive"));
    }
    let ty = linear_taps(h, out_h);
    let tx = linear_taps(w, out_w);
    let src = x.data();
    let mut out = vec![S::zero(); n * c * out_h * out_w];
    par::for_each_chunk_mut(&mut out, out_h * out_w, |plane_idx, dst| {
        let plane = &src[plane_idx * h * w..(plane_idx + 1) * h * w];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let top = plane[y0 * w + x0].to_f64c() * (1.0 - fx) + plane[y0 * w + x1].to_f64c() * fx;
                let bot = plane[y1 * w + x0].to_f64c() * (1.0 - fx) + plane[y1 * w + x1].to_f64c() * fx;
                dst[oy * out_w + ox] = S::of(top * (1.0 - fy) + bot * fy);
            }
        }
    });
    Tensor::new(vec![n, c, out_h, out_w], out)
}

pub(crate) fn upsample_bilinear_backward<S: Scalar>(
    in_shape: (usize, usize, usize, usize),
    out_h: usize,
    out_w: usize,
    dy: &[S],
) -> Vec<S> {
    let (n, c, h, w) = in_shape;
    let ty = linear_taps(h, out_h);
    let tx = linear_taps(w, out_w);
    let mut dx = vec![S::zero(); n * c * h * w];
    par::for_each_chunk_mut(&mut dx, h * w, |plane_idx, dst| {
        let g = &dy[plane_idx * out_h * out_w..(plane_idx + 1) * out_h * out_w];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let v = g[oy * out_w + ox];
                let (fy, fx) = (S::of(fy), S::of(fx));
                let (gy, gx) = (S::one() - fy, S::one() - fx);
                dst[y0 * w + x0] += v * gy * gx;
                dst[y0 * w + x1] += v * gy * fx;
                dst[y1 * w + x0] += v * fy * gx;
                dst[y1 * w + x1] += v * fy * fx;
            }
        }
    });
    dx
}
