//! Adversarial objectives and the alternating training loop.

pub mod log;
pub mod loss;
pub mod trainer;

pub use log::{LogEntry, TrainLog, LOG_HEADER};
pub use loss::{discriminator_loss, generator_loss, GeneratorLoss};
pub use trainer::{
    checkpoint_path, load_generator, no_observer, predict, stack_samples, StepLosses, TrainConfig, TrainObserver, NOTE_PREFIX,
    Trainer,
};
