//! Linear filters on wide-scalar planes and the enhancement steps built on
//! them.

use super::ImageBuffer;

/// Mirror an out-of-range coordinate back into `0..n` (edge sample repeated:
/// `c b a | a b c | c b a`).
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "gaussian sigma must be positive");
    let r = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Separable correlation with the same 1-D `taps` along both axes.
pub fn separable(plane: &[f64], width: usize, height: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            tmp[y * width + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * row[reflect(x as isize + k as isize - r, width)])
                .sum();
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[reflect(y as isize + k as isize - r, height) * width + x])
                .sum();
        }
    }
    out
}

pub fn gaussian_blur(plane: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    separable(plane, width, height, &gaussian_kernel(sigma))
}

/// Unsharp mask `in + strength·(in − blur(in))`, unclamped.
pub fn unsharp(plane: &[f64], width: usize, height: usize, radius: f64, strength: f64) -> Vec<f64> {
    let blur = gaussian_blur(plane, width, height, radius);
    plane
        .iter()
        .zip(&blur)
        .map(|(&v, &b)| v + strength * (v - b))
        .collect()
}

/// Unsharp-mask sharpening of every channel; `radius` is the Gaussian σ.
pub fn sharpen(img: &ImageBuffer, radius: f64, strength: f64) -> ImageBuffer {
    let (w, h) = img.dims();
    img.map_planes(|p| unsharp(p, w, h, radius, strength))
}

/// High-boost enhancement against a σ-blurred background estimate,
/// `in + (in − blur_σ(in))`, rescaled linearly to span `[0, 255]`. A flat
/// result maps to the mid value.
pub fn dog_enhance(img: &ImageBuffer, sigma: f64) -> ImageBuffer {
    let (w, h) = img.dims();
    img.map_planes(|p| {
        let boosted = unsharp(p, w, h, sigma, 1.0);
        let lo = boosted.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = boosted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 {
            return vec![127.5; boosted.len()];
        }
        boosted.iter().map(|v| (v - lo) / (hi - lo) * 255.0).collect()
    })
}

/// `k × k` box mean with reflected borders.
pub fn box_mean(plane: &[f64], width: usize, height: usize, k: usize) -> Vec<f64> {
    separable(plane, width, height, &vec![1.0 / k as f64; k])
}

/// Mean over the disc of integer offsets with `dx² + dy² ≤ r²`.
pub fn disk_mean(plane: &[f64], width: usize, height: usize, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();
    let norm = 1.0 / offsets.len() as f64;
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            out[y * width + x] = norm
                * offsets
                    .iter()
                    .map(|&(dx, dy)| {
                        plane[reflect(y as isize + dy, height) * width + reflect(x as isize + dx, width)]
                    })
                    .sum::<f64>();
        }
    }
    out
}
