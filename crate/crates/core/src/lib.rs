//! A small CNN engine for classifying laser speckle images of materials:
//! tensors and layers with hand-written gradients, the separable network,
//! Adam training with early stopping, image preprocessing and a synthetic
//! speckle generator, the material taxonomy with cutting presets, and
//! evaluation metrics.
//!
//! Tensors are row-major `[height, width, channels]`.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod taxonomy;
pub mod tensor;
pub mod trainer;

mod rng;

pub use dataset::{Dataset, Sample};
pub use error::{Error, Result};
pub use metrics::{confusion, report, ConfusionMatrix, MetricReport};
pub use model::{canonical_spec, init_model, load_weights, parameter_count, save_weights, Model, ModelSpec};
pub use taxonomy::{classify_with_preset, load_taxonomy, Granularity, Taxonomy};
pub use tensor::{Element, Tensor};
pub use trainer::{train, TrainingConfig, TrainingHistory};
