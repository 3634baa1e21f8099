//! Independent reference implementations.

use rand::Rng as _;
use vesselforge::{Conv2dOptions, Rng, Scalar, Tensor};

use super::grad_suite::uniform;

/// Direct summation of the dilated cross-correlation.
pub fn naive_conv2d<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, b: Option<&Tensor<S>>, o: Conv2dOptions) -> Tensor<f64> {
    let (n, c, h, wd) = x.dims4().unwrap();
    let (f, _, kh, kw) = w.dims4().unwrap();
    let oh = (h + 2 * o.padding.0 - o.dilation.0 * (kh - 1) - 1) / o.stride.0 + 1;
    let ow = (wd + 2 * o.padding.1 - o.dilation.1 * (kw - 1) - 1) / o.stride.1 + 1;
    let mut out = vec![0.0; n * f * oh * ow];
    for ni in 0..n {
        for fi in 0..f {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = b.map_or(0.0, |b| b.data()[fi].to_f64c());
                    for ci in 0..c {
                        for i in 0..kh {
                            for j in 0..kw {
                                let iy = (y * o.stride.0 + i * o.dilation.0) as isize - o.padding.0 as isize;
                                let ix = (xo * o.stride.1 + j * o.dilation.1) as isize - o.padding.1 as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                acc += x.at4(ni, ci, iy as usize, ix as usize).to_f64c()
                                    * w.at4(fi, ci, i, j).to_f64c();
                            }
                        }
                    }
                    out[((ni * f + fi) * oh + y) * ow + xo] = acc;
                }
            }
        }
    }
    Tensor::new(vec![n, f, oh, ow], out).unwrap()
}

/// Scatter-accumulate transposed convolution with weight `[C,F,k,k]`.
pub fn naive_conv_transpose2d<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: Option<&Tensor<S>>,
    stride: usize,
    padding: usize,
) -> Tensor<f64> {
    let (n, c, h, wd) = x.dims4().unwrap();
    let (_, f, kh, kw) = w.dims4().unwrap();
    let oh = (h - 1) * stride + kh - 2 * padding;
    let ow = (wd - 1) * stride + kw - 2 * padding;
    let mut out = vec![0.0; n * f * oh * ow];
    for ni in 0..n {
        for fi in 0..f {
            let bias = b.map_or(0.0, |b| b.data()[fi].to_f64c());
            out[(ni * f + fi) * oh * ow..(ni * f + fi + 1) * oh * ow].iter_mut().for_each(|v| *v = bias);
        }
        for ci in 0..c {
            for y in 0..h {
                for xi in 0..wd {
                    let v = x.at4(ni, ci, y, xi).to_f64c();
                    for fi in 0..f {
                        for i in 0..kh {
                            for j in 0..kw {
                                let oy = (y * stride + i) as isize - padding as isize;
                                let ox = (xi * stride + j) as isize - padding as isize;
                                if oy < 0 || ox < 0 || oy >= oh as isize || ox >= ow as isize {
                                    continue;
                                }
                                out[((ni * f + fi) * oh + oy as usize) * ow + ox as usize] +=
                                    v * w.at4(ci, fi, i, j).to_f64c();
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, f, oh, ow], out).unwrap()
}

pub fn max_abs_diff<S: Scalar>(a: &Tensor<S>, b: &Tensor<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x.to_f64c() - y).abs())
        .fold(0.0, f64::max)
}

/// Random input, weight, bias and options with a non-empty output.
pub fn random_conv_case(rng: &mut Rng) -> (Tensor<f32>, Tensor<f32>, Tensor<f32>, Conv2dOptions) {
    loop {
        let dil = [1, 2, 4, 8, 16][rng.random_range(0..5)];
        let dil2 = [1, 2, 4, 8, 16][rng.random_range(0..5)];
        let (kh, kw) = (rng.random_range(1..5), rng.random_range(1..5));
        let (h, w) = (rng.random_range(1..40), rng.random_range(1..40));
        let o = Conv2dOptions {
            stride: (rng.random_range(1..4), rng.random_range(1..4)),
            padding: (rng.random_range(0..18), rng.random_range(0..18)),
            dilation: (dil, dil2),
        };
        if h + 2 * o.padding.0 < dil * (kh - 1) + 1 || w + 2 * o.padding.1 < dil2 * (kw - 1) + 1 {
            continue;
        }
        let (n, c, f) = (rng.random_range(1..3), rng.random_range(1..5), rng.random_range(1..5));
        let s = rng.random::<u64>();
        let x = uniform(&[n, c, h, w], -1.0, 1.0, s).cast();
        let wt = uniform(&[f, c, kh, kw], -1.0, 1.0, s + 1).cast();
        let b = uniform(&[f], -1.0, 1.0, s + 2).cast();
        return (x, wt, b, o);
    }
}
