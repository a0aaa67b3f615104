//! Adversarial residual adaptation of strip features.
//!
//! A discriminator `D` learns to tell train-store features (label 0) from
//! adapted test-store features (label 1). The adapter `F(x) = x + R(x)`
//! learns to fool it while a reconstructor `G` maps adapted features back
//! to their source, which keeps `F` from discarding content. All gradients
//! are computed analytically in `f64`.

mod checkpoint;
mod gradcheck;
mod model;
mod nn;
pub mod toy;
mod train;

pub use checkpoint::{
    read_ecoa, read_ecoa_file, write_ecoa, write_ecoa_file, AdapterManifest, ECOA_MAGIC, ECOA_VERSION,
};
pub use gradcheck::{check_gradients, GradientProbe, Objective};
pub use model::{
    discriminator_log_loss, generator_log_loss, AdaptationModel, GeneratorStep, Reconstruction, SIGMOID_EPS,
};
pub use nn::{Activation, Dense, DenseNetwork, Gradients, Trace};
pub use train::{to_columns, train, LossPoint, TrainingConfig, TrainingOutcome};
