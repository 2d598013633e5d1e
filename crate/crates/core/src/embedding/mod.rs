//! Patch descriptors and the learned embedding.

mod features;
mod loss;
mod model;
mod train;

pub use features::{describe_patch, FeatureVector, FEATURE_DIM, HIST_BINS, REGION_DIM};
pub use loss::{distance, dual_triplet_loss, dual_triplet_terms, triplet_loss};
pub use model::{Activation, EmbeddingModel, ForwardCache, Gradients, Layer, MODEL_FORMAT_VERSION};
pub use train::{loss_gradient, mean_loss, train, TrainReport, TrainingConfig};

/// Default layer widths: descriptor, two hidden layers, embedding.
pub const DEFAULT_DIMS: [usize; 4] = [FEATURE_DIM, 64, 32, 16];
