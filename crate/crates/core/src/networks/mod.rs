pub mod discriminator;
pub mod generator;

pub use discriminator::{DiscriminatorConfig, DiscriminatorParams};
pub use generator::{GeneratorConfig, GeneratorParams, GeneratorTrace, LayerSpec};
