//! Synthetic fundus-like images with exactly known vessel masks.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::rng::{stream, Domain};
use crate::tape::Rng;

use super::Sample;

/// Generation parameters. Lengths are given for a 256-pixel canvas and scale
/// with `size`.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    /// Foreground fraction to reach, drawn uniformly per image.
    pub target_fraction: (f64, f64),
    pub width_range: (usize, usize),
    /// Darkening of vessel pixels relative to the local background.
    pub contrast: (f64, f64),
    /// Largest heading change per unit step, in radians.
    pub max_turn: f64,
    pub branch_probability: f64,
    pub curve_length: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            target_fraction: (0.04, 0.12),
            width_range: (1, 4),
            contrast: (40.0, 75.0),
            max_turn: 0.12,
            branch_probability: 0.012,
            curve_length: (90.0, 260.0),
        }
    }
}

pub const SYNTH_MIN_SIZE: usize = 64;

/// `n` deterministic samples of `size × size` with ids `synth_000`, ...
pub fn synth_vessels(seed: u64, size: usize, n: usize) -> Result<Vec<Sample>> {
    synth_vessels_with(seed, size, n, &SynthConfig::default())
}

pub fn synth_vessels_with(seed: u64, size: usize, n: usize, cfg: &SynthConfig) -> Result<Vec<Sample>> {
    if size < SYNTH_MIN_SIZE {
        return Err(Error::param(format!("synthetic size must be at least {SYNTH_MIN_SIZE}, got {size}")));
    }
    (0..n)
        .map(|i| {
            let mut rng = stream(seed, Domain::Synth, i as u64);
            let (image, gt) = synth_one(&mut rng, size, cfg);
            Sample::new(format!("synth_{i:03}"), image, gt, None)
        })
        .collect()
}

/// Smooth background from a handful of long-wavelength cosines.
fn background(rng: &mut Rng, size: usize) -> Vec<f64> {
    let base = rng.random_range(140.0..190.0);
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            let fx = rng.random_range(-1.5..1.5);
            let fy = rng.random_range(-1.5..1.5);
            let amp = rng.random_range(2.0..6.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            (fx, fy, amp, phase)
        })
        .collect();
    let mut out = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let (u, v) = (x as f64 / size as f64, y as f64 / size as f64);
            out[y * size + x] = base
                + waves
                    .iter()
                    .map(|&(fx, fy, a, p)| a * (2.0 * PI * (fx * u + fy * v) + p).cos())
                    .sum::<f64>();
        }
    }
    out
}

struct Walker {
    x: f64,
    y: f64,
    heading: f64,
    width: usize,
    remaining: f64,
    contrast: f64,
}

fn synth_one(rng: &mut Rng, size: usize, cfg: &SynthConfig) -> (ImageBuffer, ImageBuffer) {
    let bg = background(rng, size);
    let scale = size as f64 / 256.0;
    let target = rng.random_range(cfg.target_fraction.0..cfg.target_fraction.1);
    let mut depth = vec![0.0f64; size * size];
    let mut support = vec![false; size * size];
    let mut count = 0usize;
    let total = (size * size) as f64;
    while (count as f64) < target * total {
        let mut stack = vec![Walker {
            x: rng.random_range(0.0..size as f64),
            y: rng.random_range(0.0..size as f64),
            heading: rng.random_range(0.0..2.0 * PI),
            width: rng.random_range(cfg.width_range.0..=cfg.width_range.1),
            remaining: rng.random_range(cfg.curve_length.0..cfg.curve_length.1) * scale,
            contrast: rng.random_range(cfg.contrast.0..cfg.contrast.1),
        }];
        while let Some(mut w) = stack.pop() {
            let mut turn_rate = 0.0f64;
            while w.remaining > 0.0 {
                if !(0.0..size as f64).contains(&w.x) || !(0.0..size as f64).contains(&w.y) {
                    break;
                }
                count += stamp(&mut depth, &mut support, size, w.x, w.y, w.width, w.contrast);
                turn_rate = (turn_rate + rng.random_range(-0.03..0.03)).clamp(-cfg.max_turn, cfg.max_turn);
                w.heading += turn_rate;
                w.x += w.heading.cos();
                w.y += w.heading.sin();
                w.remaining -= 1.0;
                if rng.random::<f64>() < cfg.branch_probability {
                    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    stack.push(Walker {
                        x: w.x,
                        y: w.y,
                        heading: w.heading + side * rng.random_range(0.4..1.0),
                        width: w.width.saturating_sub(1).max(cfg.width_range.0),
                        remaining: w.remaining * 0.6,
                        contrast: w.contrast * 0.9,
                    });
                }
            }
        }
    }
    let image = ImageBuffer::from_f64(
        size,
        size,
        &bg.iter().zip(&depth).map(|(b, d)| b - d).collect::<Vec<_>>(),
    );
    let gt = ImageBuffer::new(size, size, 1, support.iter().map(|&s| if s { 255 } else { 0 }).collect())
        .expect("valid dimensions");
    (image, gt)
}

/// Paint a disc of diameter `width` centred at `(cx, cy)`, always including
/// the pixel under the centre. Returns the number of newly covered pixels.
fn stamp(depth: &mut [f64], support: &mut [bool], size: usize, cx: f64, cy: f64, width: usize, contrast: f64) -> usize {
    let r = width as f64 / 2.0;
    let reach = r.ceil() as isize + 1;
    let (px, py) = (cx.floor() as isize, cy.floor() as isize);
    let mut added = 0;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let (x, y) = (px + dx, py + dy);
            if x < 0 || y < 0 || x >= size as isize || y >= size as isize {
                continue;
            }
            let (fx, fy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            if (dx, dy) != (0, 0) && fx * fx + fy * fy > r * r {
                continue;
            }
            let i = y as usize * size + x as usize;
            if !support[i] {
                support[i] = true;
                added += 1;
            }
            depth[i] = depth[i].max(contrast);
        }
    }
    added
}
