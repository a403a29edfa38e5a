//! Landmark Isomap variants, including a low-rank Fisher projection stage.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod generators;
pub mod graph;
pub mod landmarks;
pub mod linalg;
pub mod lrr;
pub mod pipeline;

pub use dataset::{load_idx_labels, load_matrix, Dataset, MatrixFormat};
pub use error::{Error, Result};
pub use eval::{loocv_flda_accuracy, EvalReport};
pub use pipeline::{run_pipeline, IsomapVariant, PipelineConfig, PipelineResult, Registry};
