//! Forest construction, anomaly scoring, thresholded prediction, and model
//! persistence.
//!
//! A forest holds `t` isolation trees, each fitted on a subsample of
//! `min(psi, n)` training rows. Reference objects for the distance
//! projections are restricted to a pool of `ceil(m * n)` rows drawn once at
//! fit time, which lets all pairwise distances used during construction be
//! precomputed as pool-by-dataset matrices. The anomaly score of an example
//! is `2^(-E/c)` where `E` is its mean root-to-leaf path length over the
//! forest and `c` normalizes by the expected path length at the subsample
//! size.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::ColumnValues;
use crate::data_model::{Dataset, FeatureKind};
use crate::distances::{
    fit_categorical_stats, precompute_matrix, CategoricalStats, DistanceError, DistanceId,
    DistanceMatrix,
};
use crate::projection::SelectionStrategy;
use crate::tree::{build_tree, BuildContext, IsolationTree};

pub const MODEL_FORMAT_VERSION: u32 = 1;

const EULER_MASCHERONI: f64 = 0.5772156649;

/// Expected path length of an unsuccessful search in a binary search tree
/// over `size` points: `2(ln(size-1) + gamma) - 2(size-1)/size`, with
/// `c(0) = c(1) = 0` and `c(2) = 1`. Used both to normalize scores and to
/// credit unisolated leaves with the splits they would still need.
pub fn avg_path_c(size: usize) -> f64 {
    match size {
        0 | 1 => 0.0,
        2 => 1.0,
        s => {
            let s = s as f64;
            2.0 * ((s - 1.0).ln() + EULER_MASCHERONI) - 2.0 * (s - 1.0) / s
        }
    }
}

/// The score law: `2^(-mean_path / c_norm)`, strictly decreasing in the
/// mean path length, with value 0.5 at `mean_path == c_norm`.
pub fn anomaly_score(mean_path: f64, c_norm: f64) -> f64 {
    2.0_f64.powf(-mean_path / c_norm)
}

fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

/// Per-feature sets of admissible distance measures.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistanceConfig {
    pub per_feature: BTreeMap<String, Vec<DistanceId>>,
}

impl DistanceConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(feature_id: impl Into<String>, distances: Vec<DistanceId>) -> Self {
        let mut config = Self::new();
        config.set(feature_id, distances);
        config
    }

    pub fn set(&mut self, feature_id: impl Into<String>, distances: Vec<DistanceId>) -> &mut Self {
        self.per_feature.insert(feature_id.into(), distances);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.per_feature.values().all(|d| d.is_empty())
    }

    /// Resolves feature ids to column indices of `dataset`, checking that
    /// every feature exists, every distance is applicable to its kind, and
    /// no distance is listed twice. Results follow dataset column order.
    pub fn resolve(&self, dataset: &Dataset) -> Result<Vec<(usize, Vec<DistanceId>)>, FitError> {
        if self.is_empty() {
            return Err(FitError::EmptyConfig);
        }
        for (id, dists) in &self.per_feature {
            let column = dataset
                .column(id)
                .ok_or_else(|| FitError::UnknownFeature(id.clone()))?;
            let mut seen = Vec::new();
            for d in dists {
                if !d.applicable_to(column.kind) {
                    return Err(FitError::NotApplicable {
                        feature: id.clone(),
                        distance: *d,
                        kind: column.kind,
                    });
                }
                if seen.contains(d) {
                    return Err(FitError::DuplicateDistance {
                        feature: id.clone(),
                        distance: *d,
                    });
                }
                seen.push(*d);
            }
        }
        let mut resolved = Vec::new();
        for (idx, column) in dataset.columns().iter().enumerate() {
            if let Some(dists) = self.per_feature.get(&column.id) {
                if !dists.is_empty() {
                    resolved.push((idx, dists.clone()));
                }
            }
        }
        Ok(resolved)
    }
}

/// Fit hyperparameters. `pool_ratio` is the fraction of training rows
/// eligible as reference objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub trees: usize,
    pub subsample: usize,
    pub pool_ratio: f64,
    pub strategy: SelectionStrategy,
    pub seed: u64,
    pub config: DistanceConfig,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            trees: 100,
            subsample: 256,
            pool_ratio: 0.5,
            strategy: SelectionStrategy::TwoStep,
            seed: 0,
            config: DistanceConfig::new(),
        }
    }
}

impl FitParams {
    fn validate(&self) -> Result<(), FitError> {
        if self.trees < 1 {
            return Err(FitError::InvalidParams(
                "tree count must be at least 1".into(),
            ));
        }
        if self.subsample < 2 {
            return Err(FitError::InvalidParams(
                "subsample size must be at least 2".into(),
            ));
        }
        if !(self.pool_ratio > 0.0 && self.pool_ratio <= 1.0) {
            return Err(FitError::InvalidParams(
                "pool ratio must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("distance configuration is empty")]
    EmptyConfig,
    #[error("config references unknown feature {0}")]
    UnknownFeature(String),
    #[error("distance {distance} not applicable to {kind} feature {feature}")]
    NotApplicable {
        feature: String,
        distance: DistanceId,
        kind: FeatureKind,
    },
    #[error("distance {distance} listed twice for feature {feature}")]
    DuplicateDistance {
        feature: String,
        distance: DistanceId,
    },
    #[error("dataset must have at least 2 examples, found {0}")]
    TooFewRows(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("unsupported model format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
}

/// Kind (and dimensionality, where applicable) of one feature the model
/// was fitted on. Scored datasets must provide matching columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub id: String,
    pub kind: FeatureKind,
    pub dim: Option<usize>,
}

/// A fitted random similarity isolation forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<IsolationTree>,
    params: FitParams,
    c_norm: f64,
    psi_eff: usize,
    pool_size: usize,
    cat_stats: BTreeMap<String, CategoricalStats>,
    schema: Vec<ColumnSchema>,
}

impl Forest {
    /// Fits a forest on `dataset`. Labels, if present, are ignored.
    /// Deterministic for a fixed `params.seed`, independent of how many
    /// worker threads build trees.
    pub fn fit(dataset: &Dataset, params: &FitParams) -> Result<Forest, FitError> {
        params.validate()?;
        let n = dataset.n();
        if n < 2 {
            return Err(FitError::TooFewRows(n));
        }
        let features = params.config.resolve(dataset)?;

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let pool_size = ((params.pool_ratio * n as f64).ceil() as usize).clamp(1, n);
        let mut pool = rand::seq::index::sample(&mut rng, n, pool_size).into_vec();
        pool.sort_unstable();
        let mut pool_member = vec![false; n];
        for &i in &pool {
            pool_member[i] = true;
        }

        let mut cat_stats_by_idx: HashMap<usize, CategoricalStats> = HashMap::new();
        let mut cat_stats: BTreeMap<String, CategoricalStats> = BTreeMap::new();
        for (col_idx, _) in &features {
            let column = &dataset.columns()[*col_idx];
            if let ColumnValues::Categorical(values) = &column.values {
                let stats = fit_categorical_stats(values.iter().map(String::as_str));
                cat_stats.insert(column.id.clone(), stats.clone());
                cat_stats_by_idx.insert(*col_idx, stats);
            }
        }

        let mut matrices: HashMap<(usize, DistanceId), DistanceMatrix> = HashMap::new();
        for (col_idx, dists) in &features {
            let column = &dataset.columns()[*col_idx];
            for d in dists {
                if d.is_identity() {
                    continue;
                }
                let matrix = precompute_matrix(
                    dataset,
                    &column.id,
                    *d,
                    &pool,
                    cat_stats_by_idx.get(col_idx),
                )?;
                matrices.insert((*col_idx, *d), matrix);
            }
        }

        let mut global_pairs = HashMap::new();
        if params.strategy == SelectionStrategy::Global {
            for (key, matrix) in &matrices {
                global_pairs.insert(*key, top_distant_pairs(matrix, &pool, 10));
            }
        }

        let psi_eff = params.subsample.min(n);
        let max_depth = ceil_log2(psi_eff);
        let ctx = BuildContext {
            dataset,
            features,
            pool_member,
            strategy: params.strategy,
            matrices,
            global_pairs,
            stats: cat_stats_by_idx,
            max_depth,
        };

        // one independent chacha stream per tree keeps parallel construction
        // order-independent (stream 0 is the fit-level rng above)
        let trees: Vec<IsolationTree> = (0..params.trees)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(1 + i as u64);
                let mut subsample = rand::seq::index::sample(&mut rng, n, psi_eff).into_vec();
                subsample.sort_unstable();
                build_tree(&ctx, subsample, &mut rng)
            })
            .collect();

        let schema = ctx
            .features
            .iter()
            .map(|(col_idx, _)| {
                let column = &dataset.columns()[*col_idx];
                ColumnSchema {
                    id: column.id.clone(),
                    kind: column.kind,
                    dim: column.dim(),
                }
            })
            .collect();

        Ok(Forest {
            trees,
            params: params.clone(),
            c_norm: avg_path_c(psi_eff),
            psi_eff,
            pool_size,
            cat_stats,
            schema,
        })
    }

    pub fn trees(&self) -> &[IsolationTree] {
        &self.trees
    }

    pub fn params(&self) -> &FitParams {
        &self.params
    }

    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    pub fn effective_subsample(&self) -> usize {
        self.psi_eff
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn categorical_stats(&self) -> &BTreeMap<String, CategoricalStats> {
        &self.cat_stats
    }

    fn check_schema<'a>(
        &self,
        dataset: &'a Dataset,
    ) -> Result<HashMap<&'a str, usize>, ScoreError> {
        let mut columns = HashMap::new();
        for schema in &self.schema {
            let idx = dataset.column_index(&schema.id).ok_or_else(|| {
                ScoreError::SchemaMismatch(format!("column {} missing from dataset", schema.id))
            })?;
            let column = &dataset.columns()[idx];
            if column.kind != schema.kind {
                return Err(ScoreError::SchemaMismatch(format!(
                    "column {} has kind {}, model expects {}",
                    schema.id, column.kind, schema.kind
                )));
            }
            if let Some(dim) = schema.dim {
                if column.dim() != Some(dim) {
                    return Err(ScoreError::SchemaMismatch(format!(
                        "column {} has dimension {:?}, model expects {dim}",
                        schema.id,
                        column.dim()
                    )));
                }
            }
            columns.insert(column.id.as_str(), idx);
        }
        Ok(columns)
    }

    fn mean_path(&self, dataset: &Dataset, columns: &HashMap<&str, usize>, row: usize) -> f64 {
        let total: f64 = self
            .trees
            .iter()
            .map(|t| {
                t.path_length_resolved(dataset, columns, row, &self.cat_stats)
                    .expect("schema checked before traversal")
            })
            .sum();
        total / self.trees.len() as f64
    }

    /// Anomaly score of one example, in `(0, 1)`; higher is more anomalous.
    pub fn score(&self, dataset: &Dataset, row: usize) -> Result<f64, ScoreError> {
        let columns = self.check_schema(dataset)?;
        Ok(anomaly_score(
            self.mean_path(dataset, &columns, row),
            self.c_norm,
        ))
    }

    /// Scores every example of `dataset`. Elementwise equal to [`score`]
    /// and independent of the worker count.
    ///
    /// [`score`]: Forest::score
    pub fn score_batch(&self, dataset: &Dataset) -> Result<Vec<f64>, ScoreError> {
        let columns = self.check_schema(dataset)?;
        Ok((0..dataset.n())
            .into_par_iter()
            .map(|row| anomaly_score(self.mean_path(dataset, &columns, row), self.c_norm))
            .collect())
    }

    /// Flags examples whose score is at least `theta`.
    pub fn predict(&self, dataset: &Dataset, theta: f64) -> Result<Vec<bool>, ScoreError> {
        Ok(self
            .score_batch(dataset)?
            .into_iter()
            .map(|s| s >= theta)
            .collect())
    }

    /// Serializes the model to `path` as versioned JSON. Identical models
    /// produce byte-identical files.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            forest: self.clone(),
        };
        let text = serde_json::to_string(&file)
            .map_err(|e| ModelError::Corrupt(format!("serialization failed: {e}")))?;
        fs::write(path, text).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Forest, ModelError> {
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let probe: VersionProbe =
            serde_json::from_str(&text).map_err(|e| ModelError::Corrupt(e.to_string()))?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion {
                found: probe.format_version,
                supported: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_str(&text).map_err(|e| ModelError::Corrupt(e.to_string()))?;
        Ok(file.forest)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    forest: Forest,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// The `k` most distant candidate pairs of one matrix, ordered by distance
/// descending with index ties resolved lexicographically. Pairs at zero
/// distance are never included.
fn top_distant_pairs(matrix: &DistanceMatrix, pool: &[usize], k: usize) -> Vec<(usize, usize)> {
    let mut best: Vec<(f64, usize, usize)> = Vec::with_capacity(k + 1);
    for (i, &a) in pool.iter().enumerate() {
        let row = matrix.row(a).expect("pool rows are matrix candidates");
        for &b in &pool[i + 1..] {
            let d = row[b];
            if d <= 0.0 {
                continue;
            }
            if best.len() == k && d <= best[k - 1].0 {
                continue;
            }
            let pos = best
                .iter()
                .position(|&(bd, ba, bb)| (d > bd) || (d == bd && (a, b) < (ba, bb)))
                .unwrap_or(best.len());
            best.insert(pos, (d, a, b));
            best.truncate(k);
        }
    }
    best.into_iter().map(|(_, a, b)| (a, b)).collect()
}
