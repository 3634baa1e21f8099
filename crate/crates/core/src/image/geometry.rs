//! Geometric transforms, intensity gamma and resizing.

use crate::error::{Error, Result};

use super::buffer::clamp_u8;
use super::{ImageBuffer, ProbMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interp {
    Nearest,
    Bilinear,
}

/// Value for samples that fall outside the source frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fill {
    /// Repeat the nearest border pixel.
    Border,
    Value(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlipAxis {
    /// Mirror left-right.
    Horizontal,
    /// Mirror top-bottom.
    Vertical,
}

pub fn flip(img: &ImageBuffer, axis: FlipAxis) -> ImageBuffer {
    let (w, h) = img.dims();
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = match axis {
                FlipAxis::Horizontal => (w - 1 - x, y),
                FlipAxis::Vertical => (x, h - 1 - y),
            };
            for c in 0..img.channels() {
                out.set(x, y, c, img.get(sx, sy, c));
            }
        }
    }
    out
}

fn sample(img: &ImageBuffer, sx: f64, sy: f64, c: usize, interp: Interp, fill: Fill) -> f64 {
    let (w, h) = img.dims();
    let (wf, hf) = ((w - 1) as f64, (h - 1) as f64);
    const SLACK: f64 = 1e-9;
    let outside = sx < -SLACK || sy < -SLACK || sx > wf + SLACK || sy > hf + SLACK;
    if let (true, Fill::Value(v)) = (outside, fill) {
        return v as f64;
    }
    let (sx, sy) = (sx.clamp(0.0, wf), sy.clamp(0.0, hf));
    match interp {
        Interp::Nearest => img.get(sx.round() as usize, sy.round() as usize, c) as f64,
        Interp::Bilinear => {
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let p = |x, y| img.get(x, y, c) as f64;
            let top = p(x0, y0) + (p(x1, y0) - p(x0, y0)) * fx;
            let bottom = p(x0, y1) + (p(x1, y1) - p(x0, y1)) * fx;
            top + (bottom - top) * fy
        }
    }
}

/// Resample through an inverse map from output to source coordinates.
fn warp(img: &ImageBuffer, w: usize, h: usize, interp: Interp, fill: Fill, inv: impl Fn(f64, f64) -> (f64, f64)) -> ImageBuffer {
    let ch = img.channels();
    let mut data = vec![0u8; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = inv(x as f64, y as f64);
            for c in 0..ch {
                data[(y * w + x) * ch + c] = clamp_u8(sample(img, sx, sy, c, interp, fill));
            }
        }
    }
    ImageBuffer::new(w, h, ch, data).expect("valid dimensions")
}

/// Rotate about the image centre by `degrees` (counter-clockwise on
/// screen). Multiples of 90° use exact coefficients, so on square images
/// they permute pixels.
pub fn rotate(img: &ImageBuffer, degrees: f64, interp: Interp, fill: Fill) -> ImageBuffer {
    let (w, h) = img.dims();
    let quarter = degrees / 90.0;
    let (cos, sin) = if quarter.fract() == 0.0 {
        match (quarter as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let t = degrees.to_radians();
        (t.cos(), t.sin())
    };
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    warp(img, w, h, interp, fill, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        (cx + cos * dx - sin * dy, cy + sin * dx + cos * dy)
    })
}

/// Shift by whole pixels; content moves right/down for positive offsets.
pub fn translate(img: &ImageBuffer, dx: i64, dy: i64, fill: Fill) -> ImageBuffer {
    let (w, h) = img.dims();
    warp(img, w, h, Interp::Nearest, fill, |x, y| (x - dx as f64, y - dy as f64))
}

/// `255·(v/255)^γ`.
pub fn adjust_gamma(img: &ImageBuffer, gamma: f64) -> Result<ImageBuffer> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    let lut: Vec<u8> = (0..256).map(|v| clamp_u8(255.0 * (v as f64 / 255.0).powf(gamma))).collect();
    let data = img.data().iter().map(|&v| lut[v as usize]).collect();
    ImageBuffer::new(img.width(), img.height(), img.channels(), data)
}

/// Resize with half-pixel centres; equal sizes return the input unchanged.
pub fn resize(img: &ImageBuffer, width: usize, height: usize, interp: Interp) -> Result<ImageBuffer> {
    if width == 0 || height == 0 {
        return Err(Error::param(format!("cannot resize to {width}x{height}")));
    }
    let (w, h) = img.dims();
    if (w, h) == (width, height) {
        return Ok(img.clone());
    }
    let (sx, sy) = (w as f64 / width as f64, h as f64 / height as f64);
    Ok(match interp {
        Interp::Bilinear => warp(img, width, height, interp, Fill::Border, |x, y| {
            ((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5)
        }),
        Interp::Nearest => warp(img, width, height, interp, Fill::Border, |x, y| {
            (((x + 0.5) * sx).floor().min(w as f64 - 1.0), ((y + 0.5) * sy).floor().min(h as f64 - 1.0))
        }),
    })
}

/// Bilinear resize of a probability map with the same half-pixel grid as
/// [`resize`], kept in wide scalars.
pub fn resize_prob(prob: &ProbMask, width: usize, height: usize) -> Result<ProbMask> {
    if width == 0 || height == 0 {
        return Err(Error::param(format!("cannot resize to {width}x{height}")));
    }
    let (w, h) = (prob.width(), prob.height());
    if (w, h) == (width, height) {
        return Ok(prob.clone());
    }
    let (sx, sy) = (w as f64 / width as f64, h as f64 / height as f64);
    let src = prob.data();
    let p = |x: usize, y: usize| src[y * w + x];
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let (y0, ty) = (fy.floor() as usize, fy - fy.floor());
        let y1 = (y0 + 1).min(h - 1);
        for x in 0..width {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let (x0, tx) = (fx.floor() as usize, fx - fx.floor());
            let x1 = (x0 + 1).min(w - 1);
            let top = p(x0, y0) + (p(x1, y0) - p(x0, y0)) * tx;
            let bottom = p(x0, y1) + (p(x1, y1) - p(x0, y1)) * tx;
            out.push(top + (bottom - top) * ty);
        }
    }
    ProbMask::new(width, height, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::gray_from_fn(w, h, |x, y| ((x * 31 + y * 17 + x * y) % 256) as u8)
    }

    #[test]
    fn flips_are_involutions() {
        let img = pattern(7, 5);
        for axis in [FlipAxis::Horizontal, FlipAxis::Vertical] {
            assert_eq!(flip(&flip(&img, axis), axis), img);
        }
        assert_eq!(flip(&img, FlipAxis::Horizontal).get(0, 2, 0), img.get(6, 2, 0));
    }

    #[test]
    fn quarter_turns_permute_square_images() {
        let img = pattern(6, 6);
        let mut sorted = img.data().to_vec();
        sorted.sort_unstable();
        for k in 0..4 {
            for interp in [Interp::Nearest, Interp::Bilinear] {
                let r = rotate(&img, 90.0 * k as f64, interp, Fill::Value(0));
                let mut got = r.data().to_vec();
                got.sort_unstable();
                assert_eq!(got, sorted);
            }
        }
        let r = rotate(&img, 90.0, Interp::Nearest, Fill::Value(0));
        assert_eq!(rotate(&rotate(&r, 90.0, Interp::Nearest, Fill::Value(0)), 180.0, Interp::Nearest, Fill::Value(0)), img);
        assert_eq!(rotate(&img, 180.0, Interp::Nearest, Fill::Border), flip(&flip(&img, FlipAxis::Horizontal), FlipAxis::Vertical));
    }

    #[test]
    fn translation_fills_with_border_or_value() {
        let img = pattern(5, 4);
        let t = translate(&img, 2, 0, Fill::Value(0));
        assert_eq!(t.get(0, 1, 0), 0);
        assert_eq!(t.get(3, 1, 0), img.get(1, 1, 0));
        let b = translate(&img, 2, 0, Fill::Border);
        assert_eq!(b.get(0, 1, 0), img.get(0, 1, 0));
    }

    #[test]
    fn gamma_one_is_identity() {
        let img = pattern(8, 8);
        assert_eq!(adjust_gamma(&img, 1.0).unwrap(), img);
        assert!(adjust_gamma(&img, 0.0).is_err());
    }

    #[test]
    fn resize_keeps_masks_binary() {
        let m = ImageBuffer::gray_from_fn(37, 23, |x, y| if (x + y) % 5 == 0 { 255 } else { 0 });
        let r = resize(&m, 64, 64, Interp::Nearest).unwrap();
        assert!(r.is_binary());
        assert_eq!(resize(&r, 37, 23, Interp::Nearest).unwrap().dims(), (37, 23));
        assert_eq!(resize(&m, 37, 23, Interp::Bilinear).unwrap(), m);
    }

    #[test]
    fn prob_resize_matches_byte_resize_on_exact_levels() {
        let img = pattern(9, 7);
        let prob = ProbMask::from_image(&img).unwrap();
        let a = resize_prob(&prob, 20, 13).unwrap().to_image();
        let b = resize(&img, 20, 13, Interp::Bilinear).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.abs_diff(*y) <= 1));
        assert_eq!(resize_prob(&prob, 9, 7).unwrap(), prob);
    }
}
