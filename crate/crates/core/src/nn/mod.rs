//! Network building blocks.

pub mod factorized;
pub mod layers;
pub mod rank1;
pub mod se;
pub mod spp;

pub use factorized::FactorizedBlock;
pub use layers::{BatchNorm2d, Conv2d, ConvTranspose2d, Ctx, Init, Linear};
pub use rank1::compose_rank1;
pub use se::SqueezeExcite;
pub use spp::PyramidPooling;
