//! Dataset layouts, synthetic data and checkpoints.

pub mod checkpoint;
pub mod layout;
pub mod sample;
pub mod synth;

pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layout::{
    load_dataset, resize_to_model, restore_size, Layout, SplitManifest, MANIFEST_FILE, MODEL_SIZE, STARE_TRAIN,
};
pub use sample::{image_to_tensor, Sample};
pub use synth::{synth_vessels, synth_vessels_with, SynthConfig, SYNTH_MIN_SIZE};
