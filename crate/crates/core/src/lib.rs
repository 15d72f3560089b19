//! Tandem clustering with invariant coordinate selection (ICS).
//!
//! A data matrix is reduced by ICS (or PCA), the interesting components are
//! selected, and a clustering method is run on them:
//!
//! ```
//! use tandem_ics::{datasets, run_pipeline, ClusterMethod, Reduction};
//!
//! let iris = datasets::iris::<f64>();
//! let reduction: Reduction = "ics:tcov:2,cov/normal:0.05".parse().unwrap();
//! let out = run_pipeline(&iris.x, iris.labels.as_deref(), &reduction, ClusterMethod::Kmeans, 3, 1).unwrap();
//! assert_eq!(out.selected, vec![0]);
//! assert!(out.ari.unwrap() > 0.85);
//! ```
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.

pub mod cluster;
pub mod csvio;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod ics;
pub mod matrix;
pub mod matstat;
pub mod metrics;
pub mod pca;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod scatter;
pub mod select;
pub mod simgen;

pub use cluster::{ClusterMethod, ClusterResult};
pub use error::{IcsError, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentRecord};
pub use ics::{ics, IcsResult, ScatterPair};
pub use matrix::Matrix;
pub use metrics::{ari, eta2, wilks_lambda};
pub use pca::{pca, PcaResult, PcaRule};
pub use pipeline::{run_pipeline, PipelineOutcome, Reduction};
pub use scalar::Scalar;
pub use scatter::{EstimatorId, ScatterEstimate};
pub use select::{select, Criterion, SelectionResult};
pub use simgen::Setting;

pub type Mat = Matrix<f64>;
pub type Mat32 = Matrix<f32>;
pub type Scatter = ScatterEstimate<f64>;
pub type Ics = IcsResult<f64>;
pub type Pca = PcaResult<f64>;
pub type Clustering = ClusterResult<f64>;
pub type Dataset = csvio::Dataset<f64>;
