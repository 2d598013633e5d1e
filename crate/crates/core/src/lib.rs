//! Interactive elicitation of an annotator's hierarchical perception of an image.
//!
//! The pipeline oversegments an image into superpixels, asks three-alternative
//! forced-choice (3AFC) questions ("which patch is the odd one out?"), trains a
//! patch embedding with a dual-triplet loss, clusters the embedding top-down
//! with K-means and renders each hierarchy level as a color overlay whose
//! palette mirrors embedding distances.
//!
//! Modules map onto the stages:
//!
//! * [`imaging`]: PNG I/O, synthetic test images, SLIC, patch views.
//! * [`embedding`]: patch descriptors, the embedding network and its losses.
//! * [`oracle`]: simulated annotators answering from a known hierarchy.
//! * [`query`]: candidate generation, Dirichlet filtering, enhancement.
//! * [`hierarchy`]: K-means, silhouette and divisive clustering.
//! * [`evaluation`]: node and dendrogram purity.
//! * [`viz`]: classical MDS palettes and overlays.
//! * [`session`]: the iterative loop and its on-disk state.

pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod hierarchy;
pub mod imaging;
pub mod oracle;
pub mod query;
pub mod seed;
pub mod session;
pub mod viz;

pub use embedding::{EmbeddingModel, FeatureVector, TrainingConfig};
pub use error::{Error, Result};
pub use evaluation::EvaluationReport;
pub use hierarchy::{ClusteringConfig, HierarchyTree};
pub use imaging::{Image, PatchView, SuperpixelMap, SyntheticSpec};
pub use oracle::GroundTruthHierarchy;
pub use query::{DirichletPosterior, QueryEngineConfig, QueryResponse, ResponseSource, TripletQuery};
pub use session::{Session, SessionConfig, SessionState};
pub use viz::PaletteAssignment;
