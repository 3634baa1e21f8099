//! Training-set augmentation: every input yields a fixed number of variants,
//! the first of which is the input itself.

use rand::Rng as _;

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::tape::Rng;

use super::geometry::{adjust_gamma, flip, rotate, translate, Fill, FlipAxis, Interp};
use super::ImageBuffer;

pub const AUGMENT_VARIANTS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentRecipe {
    /// Variants per input, identity included.
    pub variants: usize,
    /// Rotation drawn from `[-max_rotation, max_rotation]` degrees.
    pub max_rotation: f64,
    pub flip: bool,
    /// Shift drawn per axis from `[-max_translation, max_translation]` pixels.
    pub max_translation: i64,
    pub gamma: (f64, f64),
}

impl Default for AugmentRecipe {
    fn default() -> Self {
        AugmentRecipe {
            variants: AUGMENT_VARIANTS,
            max_rotation: 20.0,
            flip: true,
            max_translation: 10,
            gamma: (0.7, 1.5),
        }
    }
}

impl AugmentRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.variants == 0 {
            return Err(Error::param("augmentation needs at least one variant"));
        }
        if !(self.gamma.0 > 0.0 && self.gamma.0 <= self.gamma.1) {
            return Err(Error::param(format!("invalid gamma range {:?}", self.gamma)));
        }
        if !(self.max_rotation >= 0.0) || self.max_translation < 0 {
            return Err(Error::param("rotation and translation limits must be non-negative"));
        }
        Ok(())
    }
}

/// One concrete draw from a recipe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub flip: Option<FlipAxis>,
    pub rotation: f64,
    pub translation: (i64, i64),
    pub gamma: f64,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        flip: None,
        rotation: 0.0,
        translation: (0, 0),
        gamma: 1.0,
    };

    pub fn draw(recipe: &AugmentRecipe, rng: &mut Rng) -> Transform {
        let flip = (recipe.flip && rng.random::<bool>()).then(|| {
            if rng.random::<bool>() {
                FlipAxis::Horizontal
            } else {
                FlipAxis::Vertical
            }
        });
        let r = recipe.max_rotation;
        let t = recipe.max_translation;
        Transform {
            flip,
            rotation: if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 },
            translation: (rng.random_range(-t..=t), rng.random_range(-t..=t)),
            gamma: rng.random_range(recipe.gamma.0..=recipe.gamma.1),
        }
    }

    /// Geometric part only, for image-aligned masks.
    pub fn apply_geometry(&self, img: &ImageBuffer, interp: Interp, fill: Fill) -> ImageBuffer {
        let mut out = match self.flip {
            Some(axis) => flip(img, axis),
            None => img.clone(),
        };
        if self.rotation != 0.0 {
            out = rotate(&out, self.rotation, interp, fill);
        }
        if self.translation != (0, 0) {
            out = translate(&out, self.translation.0, self.translation.1, fill);
        }
        out
    }

    /// Images are resampled bilinearly with border fill and gamma-adjusted;
    /// masks use nearest neighbour and fill with 0.
    pub fn apply(&self, s: &Sample, id: String) -> Result<Sample> {
        let mut image = self.apply_geometry(&s.image, Interp::Bilinear, Fill::Border);
        if self.gamma != 1.0 {
            image = adjust_gamma(&image, self.gamma)?;
        }
        let mask = |m: &ImageBuffer| self.apply_geometry(m, Interp::Nearest, Fill::Value(0));
        let mut out = Sample::new(id, image, mask(&s.gt_mask), s.fov_mask.as_ref().map(mask))?;
        out.original_dims = s.original_dims;
        Ok(out)
    }
}

pub fn augment_with_rng(sample: &Sample, recipe: &AugmentRecipe, rng: &mut Rng) -> Result<Vec<Sample>> {
    recipe.validate()?;
    (0..recipe.variants)
        .map(|k| {
            let t = if k == 0 { Transform::IDENTITY } else { Transform::draw(recipe, rng) };
            t.apply(sample, format!("{}_aug{k:02}", sample.id))
        })
        .collect()
}

/// `recipe.variants` samples derived from `sample`, deterministic per seed.
pub fn augment(sample: &Sample, recipe: &AugmentRecipe, seed: u64) -> Result<Vec<Sample>> {
    augment_with_rng(sample, recipe, &mut stream(seed, Domain::Augment, 0))
}

/// Augment every sample, each from its own stream.
pub fn augment_all(samples: &[Sample], recipe: &AugmentRecipe, seed: u64) -> Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(samples.len() * recipe.variants);
    for (i, s) in samples.iter().enumerate() {
        out.extend(augment_with_rng(s, recipe, &mut stream(seed, Domain::Augment, i as u64))?);
    }
    Ok(out)
}
