//! Adversarial retinal-vessel segmentation engine.
//!
//! The crate is layered bottom-up:
//!
//! * [`tensor`], [`tape`], [`optim`]: dense tensors, reverse-mode autodiff
//!   over a per-pass tape, and Adam.
//! * [`nn`]: squeeze-excitation, pyramid pooling and the factorized residual
//!   block, plus the plain layers they are made of.
//! * [`networks`]: the encoder-decoder generator and the patch
//!   discriminator.
//! * [`train`]: adversarial losses and the alternating training loop.
//! * [`image`]: raster buffers, enhancement, augmentation and
//!   post-processing.
//! * [`metrics`]: confusion counts, F1/sensitivity/specificity/accuracy and
//!   ROC-AUC.
//! * [`dataset`]: dataset layouts, synthetic vessel images, checkpoints.
//!
//! Work inside kernels is spread over rayon when the `parallel` feature is on
//! (the default). Results are bit-identical either way.

mod atomic;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod image;
pub mod kernels;
pub mod metrics;
pub mod nn;
pub mod networks;
pub mod optim;
pub mod par;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use kernels::Conv2dOptions;
pub use params::{ParamId, ParamStore};
pub use scalar::Scalar;
pub use tape::{Activation, BatchNormOptions, Mode, Rng, Tape, Var};
pub use tensor::Tensor;
