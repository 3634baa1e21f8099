//! 8-bit raster images, enhancement, augmentation and post-processing.

pub mod augment;
pub mod buffer;
pub mod clahe;
pub mod color;
pub mod filter;
pub mod geometry;
pub mod io;
pub mod morphology;
pub mod postprocess;

pub use augment::{augment, augment_all, AugmentRecipe, Transform, AUGMENT_VARIANTS};
pub use buffer::{ImageBuffer, ProbMask};
pub use clahe::{clahe, ClaheConfig};
pub use color::to_grayscale;
pub use filter::{dog_enhance, sharpen};
pub use geometry::{adjust_gamma, flip, resize, resize_prob, rotate, translate, Fill, FlipAxis, Interp};
pub use io::{is_image_path, read_image, write_image};
pub use morphology::{area_open, label_components, Connectivity};
pub use postprocess::{postprocess, postprocess_with, PostprocessConfig};

/// Parameters of the enhancement chain applied before training and
/// inference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub clahe: ClaheConfig,
    pub sharpen_radius: f64,
    pub sharpen_strength: f64,
    pub dog_sigma: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            clahe: ClaheConfig::default(),
            sharpen_radius: 2.5,
            sharpen_strength: 3.0,
            dog_sigma: 10.0,
        }
    }
}

/// Grayscale, CLAHE, unsharp masking, then background subtraction.
pub fn preprocess(img: &ImageBuffer, cfg: &PreprocessConfig) -> crate::Result<ImageBuffer> {
    let gray = if img.channels() == 3 { to_grayscale(img)? } else { img.clone() };
    let eq = clahe(&gray, &cfg.clahe)?;
    let sharp = sharpen(&eq, cfg.sharpen_radius, cfg.sharpen_strength);
    Ok(dog_enhance(&sharp, cfg.dog_sigma))
}
