use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Image, ground-truth vessel mask and optional field-of-view mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub image: ImageBuffer,
    /// Single channel with values {0, 255}.
    pub gt_mask: ImageBuffer,
    pub fov_mask: Option<ImageBuffer>,
    /// Dimensions before any resize to the model grid.
    pub original_dims: Option<(usize, usize)>,
}

impl Sample {
    pub fn new(id: impl Into<String>, image: ImageBuffer, gt_mask: ImageBuffer, fov_mask: Option<ImageBuffer>) -> Result<Self> {
        let id = id.into();
        let dims = image.dims();
        let mismatch = |what: &str, d: (usize, usize)| Error::Ingestion {
            id: id.clone(),
            message: format!("{what} is {}x{} but image is {}x{}", d.0, d.1, dims.0, dims.1),
        };
        if gt_mask.dims() != dims {
            return Err(mismatch("ground truth", gt_mask.dims()));
        }
        if gt_mask.channels() != 1 || !gt_mask.is_binary() {
            return Err(Error::Ingestion {
                id,
                message: "ground truth must be single-channel {0,255}".into(),
            });
        }
        if let Some(f) = &fov_mask {
            if f.dims() != dims {
                return Err(mismatch("field-of-view mask", f.dims()));
            }
        }
        Ok(Sample {
            id,
            image,
            gt_mask,
            fov_mask,
            original_dims: None,
        })
    }

    /// Network input `[1,1,H,W]` scaled to `[-1, 1]`.
    pub fn input_tensor<S: Scalar>(&self) -> Result<Tensor<S>> {
        let gray = if self.image.channels() == 3 {
            crate::image::to_grayscale(&self.image)?
        } else {
            self.image.clone()
        };
        image_to_tensor(&gray)
    }

    /// Ground truth `[1,1,H,W]` with vessels at +1 and background at -1.
    pub fn target_tensor<S: Scalar>(&self) -> Result<Tensor<S>> {
        let (w, h) = self.gt_mask.dims();
        let data = self
            .gt_mask
            .data()
            .iter()
            .map(|&v| if v > 127 { S::one() } else { -S::one() })
            .collect();
        Tensor::new(vec![1, 1, h, w], data)
    }
}

/// Gray image to a `[1,1,H,W]` tensor with `v/127.5 - 1`.
pub fn image_to_tensor<S: Scalar>(img: &ImageBuffer) -> Result<Tensor<S>> {
    img.require_gray("network input")?;
    let (w, h) = img.dims();
    let data = img.data().iter().map(|&v| S::of(v as f64 / 127.5 - 1.0)).collect();
    Tensor::new(vec![1, 1, h, w], data)
}
