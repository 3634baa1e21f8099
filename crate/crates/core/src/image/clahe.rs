//! Contrast-limited adaptive histogram equalization.

use crate::error::{Error, Result};

use super::ImageBuffer;

/// Pixels per tile side used to derive the default tile grid.
pub const CLAHE_TILE_PIXELS: usize = 50;
pub const CLAHE_BINS: usize = 512;
pub const CLAHE_DEFAULT_CLIP: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClaheConfig {
    /// `(rows, cols)` of the tile grid; `None` derives it from the image size.
    pub tiles: Option<(usize, usize)>,
    pub bins: usize,
    /// Clip limit relative to the uniform bin height; `None` disables
    /// clipping.
    pub clip: Option<f64>,
}

impl Default for ClaheConfig {
    fn default() -> Self {
        ClaheConfig {
            tiles: None,
            bins: CLAHE_BINS,
            clip: Some(CLAHE_DEFAULT_CLIP),
        }
    }
}

/// `max(1, H/50) × max(1, W/50)`.
pub fn default_tiles(width: usize, height: usize) -> (usize, usize) {
    (
        (height / CLAHE_TILE_PIXELS).max(1),
        (width / CLAHE_TILE_PIXELS).max(1),
    )
}

fn bounds(n: usize, parts: usize, i: usize) -> (usize, usize) {
    (i * n / parts, (i + 1) * n / parts)
}

/// Per-tile lookup table from gray level to unrounded output.
fn tile_mapping(img: &ImageBuffer, (y0, y1): (usize, usize), (x0, x1): (usize, usize), cfg: &ClaheConfig) -> [f64; 256] {
    let bins = cfg.bins;
    let bin_of = |v: usize| v * bins / 256;
    let mut hist = vec![0.0f64; bins];
    for y in y0..y1 {
        for x in x0..x1 {
            hist[bin_of(img.get(x, y, 0) as usize)] += 1.0;
        }
    }
    let total = ((y1 - y0) * (x1 - x0)) as f64;
    let mut identity = [0.0; 256];
    identity.iter_mut().enumerate().for_each(|(v, m)| *m = v as f64);
    if hist.iter().filter(|&&c| c > 0.0).count() <= 1 {
        return identity;
    }
    if let Some(clip) = cfg.clip {
        let limit = clip * total / bins as f64;
        let mut excess = 0.0;
        for c in hist.iter_mut() {
            if *c > limit {
                excess += *c - limit;
                *c = limit;
            }
        }
        let share = excess / bins as f64;
        hist.iter_mut().for_each(|c| *c += share);
    }
    let mut cdf = vec![0.0; bins];
    let mut acc = 0.0;
    for (i, c) in hist.iter().enumerate() {
        acc += c;
        cdf[i] = acc;
    }
    let cdf_min = cdf.iter().cloned().find(|&c| c > 0.0).unwrap_or(0.0);
    let denom = acc - cdf_min;
    if denom <= 0.0 {
        return identity;
    }
    let mut map = [0.0; 256];
    for (v, m) in map.iter_mut().enumerate() {
        *m = (cdf[bin_of(v)] - cdf_min) / denom * 255.0;
    }
    map
}

/// Tile indices and weight of the second one for coordinate `p`, blending
/// between tile centres and clamping outside the outermost centres.
fn blend(p: usize, n: usize, parts: usize) -> (usize, usize, f64) {
    let centre = |i: usize| {
        let (a, b) = bounds(n, parts, i);
        (a + b) as f64 / 2.0 - 0.5
    };
    let pf = p as f64;
    if parts == 1 || pf <= centre(0) {
        return (0, 0, 0.0);
    }
    if pf >= centre(parts - 1) {
        return (parts - 1, parts - 1, 0.0);
    }
    let mut i = 0;
    while centre(i + 1) <= pf {
        i += 1;
    }
    let (c0, c1) = (centre(i), centre(i + 1));
    (i, i + 1, (pf - c0) / (c1 - c0))
}

pub fn clahe(img: &ImageBuffer, cfg: &ClaheConfig) -> Result<ImageBuffer> {
    img.require_gray("CLAHE")?;
    if cfg.bins < 2 {
        return Err(Error::param("CLAHE needs at least 2 histogram bins"));
    }
    if let Some(c) = cfg.clip {
        if !(c > 0.0) {
            return Err(Error::param("CLAHE clip limit must be positive"));
        }
    }
    let (w, h) = img.dims();
    let (ty, tx) = cfg.tiles.unwrap_or_else(|| default_tiles(w, h));
    let (ty, tx) = (ty.clamp(1, h), tx.clamp(1, w));
    let maps: Vec<Vec<[f64; 256]>> = (0..ty)
        .map(|i| {
            (0..tx)
                .map(|j| tile_mapping(img, bounds(h, ty, i), bounds(w, tx, j), cfg))
                .collect()
        })
        .collect();
    let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + (b - a) * t };
    let xs: Vec<_> = (0..w).map(|x| blend(x, w, tx)).collect();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let (i0, i1, fy) = blend(y, h, ty);
        for (x, &(j0, j1, fx)) in xs.iter().enumerate() {
            let v = img.get(x, y, 0) as usize;
            let top = lerp(maps[i0][j0][v], maps[i0][j1][v], fx);
            let bottom = lerp(maps[i1][j0][v], maps[i1][j1][v], fx);
            out[y * w + x] = lerp(top, bottom, fy);
        }
    }
    ImageBuffer::from_planes(w, h, &[out])
}
