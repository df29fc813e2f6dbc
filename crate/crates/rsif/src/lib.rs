//! Random similarity isolation forest: unsupervised outlier detection for
//! mixed-type data.
//!
//! The detector generalizes isolation forests to datasets whose features
//! are not just numbers but arbitrary objects — vectors, categories,
//! histograms, time series, graphs. At every tree node a random feature, a
//! random admissible distance measure, and a pair of reference objects
//! `(q, r)` define a one-dimensional projection `P(x) = d(r, x) - d(q, x)`;
//! a random threshold over the projected values splits the node. Examples
//! that isolate in few splits score close to 1.
//!
//! ```
//! use rsif::{DistanceConfig, DistanceId, FitParams, Forest};
//!
//! let data = rsif::eval::synth_gaussian(100, 0.1, 2, 7).unwrap();
//! let params = FitParams {
//!     trees: 25,
//!     subsample: 32,
//!     config: DistanceConfig::single("x", vec![DistanceId::Euclidean]),
//!     ..FitParams::default()
//! };
//! let model = Forest::fit(&data, &params).unwrap();
//! let scores = model.score_batch(&data).unwrap();
//! assert!(scores.iter().all(|s| (0.0..1.0).contains(s)));
//! ```

pub mod data_model;
pub mod distances;
pub mod eval;
pub mod forest;
pub mod projection;
pub mod tree;

pub use data_model::{
    load_dataset, validate, write_dataset, ColumnValues, DataError, Dataset, FeatureColumn,
    FeatureKind, GraphValue, HistogramValue, Value, ValueRef, Violation,
};
pub use distances::{CategoricalStats, DistanceError, DistanceId, DistanceMatrix};
pub use eval::{EvalError, MetricsReport, TrialPlan, TrialResult};
pub use forest::{
    avg_path_c, ColumnSchema, DistanceConfig, FitError, FitParams, Forest, ModelError, ScoreError,
};
pub use projection::{ReferencePair, SelectionStrategy};
pub use tree::{IsolationTree, TreeNode};
