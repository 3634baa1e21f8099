//! Numeric kernels behind the tape operations.

pub mod conv;
pub(crate) mod gemm;
pub(crate) mod pool;

pub use conv::{conv2d_macs, conv_output_extent, conv_transpose2d_macs, conv_transpose_output_extent, Conv2dOptions};
