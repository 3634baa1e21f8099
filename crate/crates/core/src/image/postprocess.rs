//! Probability map to binary vessel mask.

use super::filter::{box_mean, disk_mean, unsharp};
use super::morphology::{area_open, Connectivity};
use super::{ImageBuffer, ProbMask};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PostprocessConfig {
    pub mean_kernel: usize,
    pub blocks: usize,
    pub sharpen_radius: f64,
    pub sharpen_strength: f64,
    pub disk_radius: usize,
    /// Weight of the disc mean in `(1 − s)·p + s·disk_mean(p)`.
    pub disk_blend: f64,
    pub threshold: f64,
    pub min_area: usize,
    pub connectivity: Connectivity,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig {
            mean_kernel: 3,
            blocks: 3,
            sharpen_radius: 1.0,
            sharpen_strength: 1.15,
            disk_radius: 1,
            disk_blend: 0.8,
            threshold: 0.5,
            min_area: 10,
            connectivity: Connectivity::Eight,
        }
    }
}

/// Smoothed and sharpened probabilities before thresholding, clamped to
/// `[0, 1]` after every block.
pub fn refine(prob: &ProbMask, cfg: &PostprocessConfig) -> Vec<f64> {
    let (w, h) = (prob.width(), prob.height());
    let mut p = box_mean(prob.data(), w, h, cfg.mean_kernel);
    for _ in 0..cfg.blocks {
        let s = unsharp(&p, w, h, cfg.sharpen_radius, cfg.sharpen_strength);
        let d = disk_mean(&s, w, h, cfg.disk_radius);
        p = s
            .iter()
            .zip(&d)
            .map(|(&a, &b)| ((1.0 - cfg.disk_blend) * a + cfg.disk_blend * b).clamp(0.0, 1.0))
            .collect();
    }
    p
}

/// Binary mask with values {0, 255}.
pub fn postprocess_with(prob: &ProbMask, cfg: &PostprocessConfig) -> ImageBuffer {
    let p = ProbMask::new(prob.width(), prob.height(), refine(prob, cfg)).expect("refined values stay in [0, 1]");
    area_open(&p.threshold(cfg.threshold), cfg.min_area, cfg.connectivity)
}

pub fn postprocess(prob: &ProbMask) -> ImageBuffer {
    postprocess_with(prob, &PostprocessConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(size: usize, at: usize, side: usize) -> ProbMask {
        let data = (0..size * size)
            .map(|i| {
                let (x, y) = (i % size, i / size);
                if (at..at + side).contains(&x) && (at..at + side).contains(&y) { 1.0 } else { 0.0 }
            })
            .collect();
        ProbMask::new(size, size, data).unwrap()
    }

    #[test]
    fn zeros_stay_zero() {
        let p = ProbMask::new(16, 16, vec![0.0; 256]).unwrap();
        assert_eq!(postprocess(&p).count_nonzero(), 0);
    }

    #[test]
    fn small_blob_is_removed_large_blob_kept() {
        assert_eq!(postprocess(&square(24, 10, 3)).count_nonzero(), 0);
        let kept = postprocess(&square(24, 10, 4));
        assert!(kept.count_nonzero() >= 10);
        assert!(kept.is_binary());
    }
}
