//! Convolution kernels: lowering to `im2col` + gemm for the forward pass and
//! both adjoints.

use crate::error::{Error, Result};
use crate::kernels::gemm::gemm;
use crate::par;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Stride, zero padding and dilation for a 2-D cross-correlation, given per
/// axis as `(vertical, horizontal)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dOptions {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub dilation: (usize, usize),
}

impl Conv2dOptions {
    pub fn new(stride: usize, padding: usize, dilation: usize) -> Self {
        Conv2dOptions {
            stride: (stride, stride),
            padding: (padding, padding),
            dilation: (dilation, dilation),
        }
    }

    pub fn axes(stride: (usize, usize), padding: (usize, usize), dilation: (usize, usize)) -> Self {
        Conv2dOptions {
            stride,
            padding,
            dilation,
        }
    }
}

impl Default for Conv2dOptions {
    fn default() -> Self {
        Conv2dOptions::new(1, 0, 1)
    }
}

/// `floor((input + 2p - d(k-1) - 1)/s) + 1`, or `None` when the dilated
/// kernel does not fit in the padded input.
pub fn conv_output_extent(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    dilation: usize,
) -> Option<usize> {
    if stride == 0 || kernel == 0 || dilation == 0 {
        return None;
    }
    let span = dilation * (kernel - 1) + 1;
    let padded = input + 2 * padding;
    (padded >= span).then(|| (padded - span) / stride + 1)
}

/// `(input - 1)s - 2p + k`, or `None` when that is not positive.
pub fn conv_transpose_output_extent(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Option<usize> {
    if stride == 0 || input == 0 {
        return None;
    }
    let full = (input - 1) * stride + kernel;
    (full > 2 * padding).then(|| full - 2 * padding)
}

/// Geometry of one lowered convolution: a `c×h×w` image seen through a
/// `kh×kw` window producing an `oh×ow` grid.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    opts: Conv2dOptions,
}

impl ConvGeom {
    fn new(
        c: usize,
        h: usize,
        w: usize,
        kh: usize,
        kw: usize,
        opts: Conv2dOptions,
    ) -> Result<Self> {
        let oh = conv_output_extent(h, kh, opts.stride.0, opts.padding.0, opts.dilation.0)
            .ok_or_else(|| {
                Error::dim(format!(
                    "height: kernel {kh} (dilation {}) does not fit input {h} with padding {}",
                    opts.dilation.0, opts.padding.0
                ))
            })?;
        let ow = conv_output_extent(w, kw, opts.stride.1, opts.padding.1, opts.dilation.1)
            .ok_or_else(|| {
                Error::dim(format!(
                    "width: kernel {kw} (dilation {}) does not fit input {w} with padding {}",
                    opts.dilation.1, opts.padding.1
                ))
            })?;
        Ok(ConvGeom {
            c,
            h,
            w,
            kh,
            kw,
            oh,
            ow,
            opts,
        })
    }

    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    fn pointwise(&self) -> bool {
        self.kh == 1
            && self.kw == 1
            && self.opts.stride == (1, 1)
            && self.opts.padding == (0, 0)
    }
}

/// Output positions `lo..hi` for which `o*stride + offset` lands in `0..size`.
fn valid_range(out: usize, stride: usize, offset: isize, size: usize) -> (usize, usize) {
    let s = stride as isize;
    let lo = if offset >= 0 { 0 } else { (-offset + s - 1) / s };
    let last = size as isize - 1 - offset;
    let hi = if last < 0 { 0 } else { last / s + 1 };
    let lo = (lo as usize).min(out);
    let hi = (hi as usize).min(out);
    (lo, hi.max(lo))
}

fn im2col<S: Scalar>(x: &[S], g: &ConvGeom, cols: &mut [S]) {
    let p = g.cols();
    let (sh, sw) = g.opts.stride;
    let (ph, pw) = g.opts.padding;
    let (dh, dw) = g.opts.dilation;
    par::for_each_chunk_mut(&mut cols[..g.rows() * p], p, |r, row| {
        let kj = r % g.kw;
        let ki = (r / g.kw) % g.kh;
        let c = r / (g.kw * g.kh);
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        let off_y = (ki * dh) as isize - ph as isize;
        let off_x = (kj * dw) as isize - pw as isize;
        let (ylo, yhi) = valid_range(g.oh, sh, off_y, g.h);
        let (xlo, xhi) = valid_range(g.ow, sw, off_x, g.w);
        row.iter_mut().for_each(|v| *v = S::zero());
        if xlo == xhi {
            return;
        }
        for oy in ylo..yhi {
            let iy = (oy * sh) as isize + off_y;
            let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
            let dst = &mut row[oy * g.ow..(oy + 1) * g.ow];
            let ix0 = (xlo * sw) as isize + off_x;
            if sw == 1 {
                let n = xhi - xlo;
                dst[xlo..xhi].copy_from_slice(&src[ix0 as usize..ix0 as usize + n]);
            } else {
                for (k, ox) in (xlo..xhi).enumerate() {
                    dst[ox] = src[ix0 as usize + k * sw];
                }
            }
        }
    });
}

/// Scatter-add `cols` back onto the image grid (adjoint of [`im2col`]).
fn col2im<S: Scalar>(cols: &[S], g: &ConvGeom, x: &mut [S]) {
    let p = g.cols();
    let (sh, sw) = g.opts.stride;
    let (ph, pw) = g.opts.padding;
    let (dh, dw) = g.opts.dilation;
    let kk = g.kh * g.kw;
    par::for_each_chunk_mut(&mut x[..g.c * g.h * g.w], g.h * g.w, |c, plane| {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let r = c * kk + ki * g.kw + kj;
                let row = &cols[r * p..(r + 1) * p];
                let off_y = (ki * dh) as isize - ph as isize;
                let off_x = (kj * dw) as isize - pw as isize;
                let (ylo, yhi) = valid_range(g.oh, sh, off_y, g.h);
                let (xlo, xhi) = valid_range(g.ow, sw, off_x, g.w);
                for oy in ylo..yhi {
                    let iy = ((oy * sh) as isize + off_y) as usize;
                    let dst = &mut plane[iy * g.w..(iy + 1) * g.w];
                    let src = &row[oy * g.ow..(oy + 1) * g.ow];
                    let ix0 = ((xlo * sw) as isize + off_x) as usize;
                    for (k, ox) in (xlo..xhi).enumerate() {
                        dst[ix0 + k * sw] += src[ox];
                    }
                }
            }
        }
    });
}

fn check_bias<S: Scalar>(bias: Option<&Tensor<S>>, f: usize) -> Result<()> {
    match bias {
        Some(b) if b.numel() != f => Err(Error::dim(format!(
            "bias has {} elements, expected {f} (output channels)",
            b.numel()
        ))),
        _ => Ok(()),
    }
}

fn add_bias<S: Scalar>(out: &mut [S], bias: &[S], plane: usize) {
    let f = bias.len();
    for (i, chunk) in out.chunks_mut(plane).enumerate() {
        let b = bias[i % f];
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn bias_grad<S: Scalar>(dy: &[S], f: usize, plane: usize) -> Vec<S> {
    let mut db = vec![S::zero(); f];
    for (i, chunk) in dy.chunks(plane).enumerate() {
        let mut acc = S::zero();
        for &v in chunk {
            acc += v;
        }
        db[i % f] += acc;
    }
    db
}

struct Conv2dShapes {
    n: usize,
    f: usize,
    geom: ConvGeom,
}

fn conv2d_shapes<S: Scalar>(
    x: &Tensor<S>,
    weight: &Tensor<S>,
    opts: Conv2dOptions,
) -> Result<Conv2dShapes> {
    let (n, c, h, w) = x.dims4()?;
    let (f, wc, kh, kw) = weight
        .dims4()
        .map_err(|_| Error::dim(format!("weight must be [F,C,kh,kw], got {:?}", weight.shape())))?;
    if wc != c {
        return Err(Error::dim(format!(
            "channel axis: input has {c} channels but weight expects {wc}"
        )));
    }
    let geom = ConvGeom::new(c, h, w, kh, kw, opts)?;
    Ok(Conv2dShapes { n, f, geom })
}

/// Multiply-accumulate count of one conv2d call.
pub fn conv2d_macs<S: Scalar>(x: &Tensor<S>, weight: &Tensor<S>, opts: Conv2dOptions) -> Result<u64> {
    let s = conv2d_shapes(x, weight, opts)?;
    Ok((s.n * s.f * s.geom.cols() * s.geom.rows()) as u64)
}

pub(crate) fn conv2d_forward<S: Scalar>(
    x: &Tensor<S>,
    weight: &Tensor<S>,
    bias: Option<&Tensor<S>>,
    opts: Conv2dOptions,
) -> Result<Tensor<S>> {
    let Conv2dShapes { n, f, geom: g } = conv2d_shapes(x, weight, opts)?;
    check_bias(bias, f)?;
    let (rows, p) = (g.rows(), g.cols());
    let in_len = g.c * g.h * g.w;
    let mut out = vec![S::zero(); n * f * p];
    let mut cols = if g.pointwise() {
        Vec::new()
    } else {
        vec![S::zero(); rows * p]
    };
    for b in 0..n {
        let xs = &x.data()[b * in_len..(b + 1) * in_len];
        let lowered: &[S] = if g.pointwise() {
            xs
        } else {
            im2col(xs, &g, &mut cols);
            &cols
        };
        let ys = &mut out[b * f * p..(b + 1) * f * p];
        gemm(f, rows, p, weight.data(), false, lowered, false, S::zero(), ys);
    }
    if let Some(bias) = bias {
        add_bias(&mut out, bias.data(), p);
    }
    Tensor::new(vec![n, f, g.oh, g.ow], out)
}

pub(crate) struct ConvGrads<S> {
    pub dx: Option<Vec<S>>,
    pub dw: Option<Vec<S>>,
    pub db: Vec<S>,
}

pub(crate) fn conv2d_backward<S: Scalar>(
    x: &Tensor<S>,
    weight: &Tensor<S>,
    dy: &[S],
    opts: Conv2dOptions,
    need_dx: bool,
    need_dw: bool,
) -> Result<ConvGrads<S>> {
    let Conv2dShapes { n, f, geom: g } = conv2d_shapes(x, weight, opts)?;
    let (rows, p) = (g.rows(), g.cols());
    let in_len = g.c * g.h * g.w;
    let db = bias_grad(dy, f, p);
    let mut dw = need_dw.then(|| vec![S::zero(); f * rows]);
    let mut dx = need_dx.then(|| vec![S::zero(); x.numel()]);
    let mut cols = vec![S::zero(); if g.pointwise() { 0 } else { rows * p }];
    let mut dcols = vec![S::zero(); if need_dx && !g.pointwise() { rows * p } else { 0 }];
    for b in 0..n {
        let dys = &dy[b * f * p..(b + 1) * f * p];
        if let Some(dw) = dw.as_mut() {
            let xs = &x.data()[b * in_len..(b + 1) * in_len];
            let lowered: &[S] = if g.pointwise() {
                xs
            } else {
                im2col(xs, &g, &mut cols);
                &cols
            };
            gemm(f, p, rows, dys, false, lowered, true, S::one(), dw);
        }
        if let Some(dx) = dx.as_mut() {
            let dxs = &mut dx[b * in_len..(b + 1) * in_len];
            if g.pointwise() {
                gemm(rows, f, p, weight.data(), true, dys, false, S::zero(), dxs);
            } else {
                gemm(rows, f, p, weight.data(), true, dys, false, S::zero(), &mut dcols);
                col2im(&dcols, &g, dxs);
            }
        }
    }
    Ok(ConvGrads { dx, dw, db })
}

struct ConvTShapes {
    n: usize,
    c: usize,
    f: usize,
    h: usize,
    w: usize,
    geom: ConvGeom,
}

fn conv_transpose_shapes<S: Scalar>(
    x: &Tensor<S>,
    weight: &Tensor<S>,
    stride: usize,
    padding: usize,
) -> Result<ConvTShapes> {
    let (n, c, h, w) = x.dims4()?;
    let (wc, f, kh, kw) = weight
        .dims4()
        .map_err(|_| Error::dim(format!("weight must be [C,F,kh,kw], got {:?}", weight.shape())))?;
    if wc != c {
        return Err(Error::dim(format!(
            "channel axis: input has {c} channels but weight expects {wc}"
        )));
    }
    if stride == 0 {
        return Err(Error::param("stride must be at least 1"));
    }
    let oh = conv_transpose_output_extent(h, kh, stride, padding)
        .ok_or_else(|| Error::dim(format!("height: transposed output extent is not positive (input {h}, kernel {kh}, padding {padding})")))?;
    let ow = conv_transpose_output_extent(w, kw, stride, padding)
        .ok_or_else(|| Error::dim(format!("width: transposed output extent is not positive (input {w}, kernel {kw}, padding {padding})")))?;
    let geom = ConvGeom::new(f, oh, ow, kh, kw, Conv2dOptions::new(stride, padding, 1))?;
    debug_assert_eq!((geom.oh, geom.ow), (h, w));
    Ok(ConvTShapes {
        n,
        c,
        f,
        h,
        w,
        geom,
    })
}

pub fn conv_transpose2d_macs<S: Scalar>(
    x: &Tensor<S>,
    weight: &Tensor<S>,
    stride: usize,
    padding: usize,
) -> Result<u64> {
    let s = conv_transpose_shapes(x, weight, stride, padding)?;
    Ok((s.n * s.c * s.h * s.w * s.geom.rows()) as u64)
}

pub(crate) fn conv_transpose2d_forward<S: Scalar>(
    x: &Tensor<S>,
    weight: &Tensor<S>,
    bias: Option<&Tensor<S>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<S>> {
    let ConvTShapes {
        n,
        c,
        f,
        h,
        w,
        geom: g,
    } = conv_transpose_shapes(x, weight, stride, padding)?;
    check_bias(bias, f)?;
    let (rows, p) = (g.rows(), h * w);
    let out_len = f * g.h * g.w;
    let mut out = vec![S::zero(); n * out_len];
    let mut cols = vec![S::zero(); rows * p];
    for b in 0..n {
        let xs = &x.data()[b * c * p..(b + 1) * c * p];
        gemm(rows, c, p, weight.data(), true, xs, false, S::zero(), &mut cols);
        col2im(&cols, &g, &mut out[b * out_len..(b + 1) * out_len]);
    }
    if let Some(bias) = bias {
        add_bias(&mut out, bias.data(), g.h * g.w);
    }
    Tensor::new(vec![n, f, g.h, g.w], out)
}

pub(crate) fn conv_transpose2d_backward<S: Scalar>(
    x: &Tensor<S>,
    weight: &Tensor<S>,
    dy: &[S],
    stride: usize,
    padding: usize,
    need_dx: bool,
    need_dw: bool,
) -> Result<ConvGrads<S>> {
    let ConvTShapes {
        n,
        c,
        f,
        h,
        w,
        geom: g,
    } = conv_transpose_shapes(x, weight, stride, padding)?;
    let (rows, p) = (g.rows(), h * w);
    let out_len = f * g.h * g.w;
    let db = bias_grad(dy, f, g.h * g.w);
    let mut dx = need_dx.then(|| vec![S::zero(); x.numel()]);
    let mut dw = need_dw.then(|| vec![S::zero(); c * rows]);
    let mut dcols = vec![S::zero(); rows * p];
    for b in 0..n {
        im2col(&dy[b * out_len..(b + 1) * out_len], &g, &mut dcols);
        if let Some(dx) = dx.as_mut() {
            gemm(
                c,
                rows,
                p,
                weight.data(),
                false,
                &dcols,
                false,
                S::zero(),
                &mut dx[b * c * p..(b + 1) * c * p],
            );
        }
        if let Some(dw) = dw.as_mut() {
            let xs = &x.data()[b * c * p..(b + 1) * c * p];
            gemm(c, p, rows, xs, false, &dcols, true, S::one(), dw);
        }
    }
    Ok(ConvGrads { dx, dw, db })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_range_matches_brute_force() {
        for out in 0..6 {
            for stride in 1..4 {
                for offset in -7isize..7 {
                    for size in 1..6 {
                        let (lo, hi) = valid_range(out, stride, offset, size);
                        let want: Vec<usize> = (0..out)
                            .filter(|&o| {
                                let i = (o * stride) as isize + offset;
                                i >= 0 && (i as usize) < size
                            })
                            .collect();
                        let got: Vec<usize> = (lo..hi).collect();
                        assert_eq!(got, want, "out {out} stride {stride} offset {offset} size {size}");
                    }
                }
            }
        }
    }

    #[test]
    fn output_extents() {
        assert_eq!(conv_output_extent(256, 4, 2, 1, 1), Some(128));
        assert_eq!(conv_output_extent(1, 3, 1, 16, 16), Some(1));
        assert_eq!(conv_output_extent(2, 3, 1, 0, 1), None);
        assert_eq!(conv_transpose_output_extent(128, 4, 2, 1), Some(256));
        assert_eq!(conv_transpose_output_extent(1, 1, 1, 1), None);
    }
}
