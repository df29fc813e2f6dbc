//! Evaluation protocol: stratified splits, ranking metrics, repeated
//! trials, validation-based distance selection, and synthetic dataset
//! generators.
//!
//! Labels enter only here. Model fitting itself is unsupervised; the
//! distance-selection step is the one semi-supervised ingredient, mirroring
//! how an expert would pick measures on held-out validation data.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{ColumnValues, Dataset, FeatureColumn, FeatureKind};
use crate::forest::{DistanceConfig, FitError, FitParams, Forest, ScoreError};

/// Trial protocol: fraction of rows used for training, number of repeated
/// trials, validation share carved out of the training part for distance
/// selection, and the base seed (trial `j` uses `base_seed + j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub train_fraction: f64,
    pub trials: usize,
    pub validation_fraction: f64,
    pub base_seed: u64,
}

impl Default for TrialPlan {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            trials: 10,
            validation_fraction: 0.3,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("dataset has a single class, cannot stratify")]
    SingleClass,
    #[error("metric undefined: no positive labels")]
    NoPositives,
    #[error("scores must be finite")]
    NonFiniteScore,
    #[error("labels and scores have different lengths ({labels} vs {scores})")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("no candidate configurations supplied")]
    NoCandidates,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Splits a labeled dataset into train/test parts, preserving class
/// proportions up to rounding. The partition is exact (disjoint and
/// exhaustive) and deterministic per seed.
pub fn stratified_holdout(
    dataset: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::InvalidParams(format!(
            "fraction {fraction} not in (0, 1)"
        )));
    }
    let labels = dataset.labels().ok_or(EvalError::MissingLabels)?;
    let mut positives: Vec<usize> = Vec::new();
    let mut negatives: Vec<usize> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l {
            positives.push(i);
        } else {
            negatives.push(i);
        }
    }
    if positives.is_empty() || negatives.is_empty() {
        return Err(EvalError::SingleClass);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);

    // keep at least one member of each class on each side
    let take = |class: &[usize]| -> usize {
        let want = (fraction * class.len() as f64).round() as usize;
        if class.len() >= 2 {
            want.clamp(1, class.len() - 1)
        } else {
            want.min(1)
        }
    };
    let take_pos = take(&positives);
    let take_neg = take(&negatives);

    let mut train: Vec<usize> = positives[..take_pos]
        .iter()
        .chain(&negatives[..take_neg])
        .copied()
        .collect();
    let mut test: Vec<usize> = positives[take_pos..]
        .iter()
        .chain(&negatives[take_neg..])
        .copied()
        .collect();
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.select_rows(&train), dataset.select_rows(&test)))
}

fn check_metric_inputs(labels: &[bool], scores: &[f64]) -> Result<(), EvalError> {
    if labels.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore);
    }
    Ok(())
}

/// Step-function average precision. Examples are ranked by descending
/// score with ties resolved by ascending original index; each positive at
/// rank `k` contributes `precision@k / num_positives`.
pub fn average_precision(labels: &[bool], scores: &[f64]) -> Result<f64, EvalError> {
    check_metric_inputs(labels, scores)?;
    let num_pos = labels.iter().filter(|&&l| l).count();
    if num_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));

    let mut hits = 0usize;
    let mut ap = 0.0;
    for (rank0, &idx) in order.iter().enumerate() {
        if labels[idx] {
            hits += 1;
            ap += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(ap / num_pos as f64)
}

/// Area under the ROC curve in the rank-sum formulation, equal to
/// `P(score+ > score-) + P(score+ = score-) / 2` over all positive-negative
/// pairs.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<f64, EvalError> {
    check_metric_inputs(labels, scores)?;
    let num_pos = labels.iter().filter(|&&l| l).count();
    let num_neg = labels.len() - num_pos;
    if num_pos == 0 || num_neg == 0 {
        return Err(EvalError::SingleClass);
    }

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // tie groups share the average of their 1-based ranks
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let p = num_pos as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * num_neg as f64))
}

/// Picks the candidate configuration with the highest average precision on
/// a validation split carved from `train`. Ties keep the earliest
/// candidate.
pub fn select_distances(
    train: &Dataset,
    candidates: &[DistanceConfig],
    params: &FitParams,
    plan: &TrialPlan,
) -> Result<DistanceConfig, EvalError> {
    if candidates.is_empty() {
        return Err(EvalError::NoCandidates);
    }
    let (fit_part, val_part) =
        stratified_holdout(train, 1.0 - plan.validation_fraction, params.seed)?;
    let val_labels = val_part
        .labels()
        .expect("stratified output keeps labels")
        .to_vec();

    let mut best: Option<(f64, &DistanceConfig)> = None;
    for candidate in candidates {
        let mut p = params.clone();
        p.config = candidate.clone();
        let model = Forest::fit(&fit_part, &p)?;
        let scores = model.score_batch(&val_part)?;
        let ap = average_precision(&val_labels, &scores)?;
        if best.is_none_or(|(best_ap, _)| ap > best_ap) {
            best = Some((ap, candidate));
        }
    }
    Ok(best.expect("candidates nonempty").1.clone())
}

/// One trial's metrics; `config` records the validation-selected distance
/// configuration when selection mode was used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub ap: f64,
    pub auc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<DistanceConfig>,
}

/// Per-trial and aggregated metrics over repeated holdout trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub trials: Vec<TrialResult>,
    pub mean_ap: f64,
    pub mean_auc: f64,
    pub std_ap: f64,
    pub std_auc: f64,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `plan.trials` independent trials. Trial `j` redraws the stratified
/// split with seed `base_seed + j`, fits on the training part (selecting
/// among `candidates` first when given), scores the test part, and records
/// AP and AUC.
pub fn run_trials(
    dataset: &Dataset,
    params: &FitParams,
    plan: &TrialPlan,
    candidates: Option<&[DistanceConfig]>,
) -> Result<MetricsReport, EvalError> {
    if dataset.labels().is_none() {
        return Err(EvalError::MissingLabels);
    }
    if plan.trials < 1 {
        return Err(EvalError::InvalidParams("trials must be at least 1".into()));
    }
    let mut trials = Vec::with_capacity(plan.trials);
    for j in 0..plan.trials {
        let seed = plan.base_seed + j as u64;
        let (train, test) = stratified_holdout(dataset, plan.train_fraction, seed)?;
        let mut p = params.clone();
        p.seed = seed;
        let config = match candidates {
            Some(c) => {
                let chosen = select_distances(&train, c, &p, plan)?;
                p.config = chosen.clone();
                Some(chosen)
            }
            None => None,
        };
        let model = Forest::fit(&train, &p)?;
        let scores = model.score_batch(&test)?;
        let labels = test.labels().expect("labeled dataset");
        trials.push(TrialResult {
            seed,
            ap: average_precision(labels, &scores)?,
            auc: roc_auc(labels, &scores)?,
            config,
        });
    }
    let (mean_ap, std_ap) = mean_and_std(&trials.iter().map(|t| t.ap).collect::<Vec<_>>());
    let (mean_auc, std_auc) = mean_and_std(&trials.iter().map(|t| t.auc).collect::<Vec<_>>());
    Ok(MetricsReport {
        trials,
        mean_ap,
        mean_auc,
        std_ap,
        std_auc,
    })
}

fn std_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller transform
    loop {
        let u1: f64 = rng.gen();
        if u1 > 0.0 {
            let u2: f64 = rng.gen();
            return (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos();
        }
    }
}

fn check_synth_params(n: usize, outlier_fraction: f64) -> Result<usize, EvalError> {
    if n < 20 {
        return Err(EvalError::InvalidParams(format!(
            "need at least 20 examples, got {n}"
        )));
    }
    if !(outlier_fraction > 0.0 && outlier_fraction < 0.5) {
        return Err(EvalError::InvalidParams(format!(
            "outlier fraction {outlier_fraction} not in (0, 0.5)"
        )));
    }
    Ok(((n as f64 * outlier_fraction).round() as usize).max(1))
}

fn shuffled_labels(n: usize, num_outliers: usize, rng: &mut impl Rng) -> Vec<bool> {
    let mut labels = vec![false; n];
    for l in labels.iter_mut().take(num_outliers) {
        *l = true;
    }
    labels.shuffle(rng);
    labels
}

/// Labeled synthetic data with a single numeric/vector feature: inliers are
/// standard normal in `dims` dimensions, outliers are uniform on
/// `[-6, 6]^dims`. With `dims == 1` the column is `numeric`, otherwise
/// `vector`.
pub fn synth_gaussian(
    n: usize,
    outlier_fraction: f64,
    dims: usize,
    seed: u64,
) -> Result<Dataset, EvalError> {
    if dims < 1 {
        return Err(EvalError::InvalidParams("dims must be at least 1".into()));
    }
    let num_outliers = check_synth_params(n, outlier_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = shuffled_labels(n, num_outliers, &mut rng);

    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&outlier| {
            (0..dims)
                .map(|_| {
                    if outlier {
                        rng.gen_range(-6.0..6.0)
                    } else {
                        std_normal(&mut rng)
                    }
                })
                .collect()
        })
        .collect();

    let kind = if dims == 1 {
        FeatureKind::Numeric
    } else {
        FeatureKind::Vector
    };
    let column = FeatureColumn::new("x", kind, ColumnValues::Vector { dim: dims, rows });
    Dataset::new("synth_gaussian", vec![column], Some(labels))
        .map_err(|e| EvalError::InvalidParams(e.to_string()))
}

pub const MULTIMODAL_SERIES_LEN: usize = 32;
// several periods per window: dynamic time warping then absorbs phase
// differences between inliers cheaply, while the burst stays expensive
const SERIES_PERIODS: f64 = 3.0;
const BURST_LEN: usize = 4;
const BURST_AMPLITUDE: f64 = 5.0;

/// Labeled synthetic data with three columns where only the time-series
/// column separates outliers: `level` (numeric, standard normal for every
/// row), `group` (categorical, uniform over four tokens), and `signal`
/// (32-sample sine with random phase; outliers additionally carry a burst
/// of amplitude 5 over 4 consecutive samples).
pub fn synth_multimodal(n: usize, outlier_fraction: f64, seed: u64) -> Result<Dataset, EvalError> {
    let num_outliers = check_synth_params(n, outlier_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = shuffled_labels(n, num_outliers, &mut rng);

    let tokens = ["g0", "g1", "g2", "g3"];
    let mut level_rows = Vec::with_capacity(n);
    let mut group_rows = Vec::with_capacity(n);
    let mut signal_rows = Vec::with_capacity(n);
    for &outlier in &labels {
        level_rows.push(vec![std_normal(&mut rng)]);
        group_rows.push(tokens[rng.gen_range(0..tokens.len())].to_string());

        let phase = rng.gen_range(0.0..TAU);
        let mut samples: Vec<f64> = (0..MULTIMODAL_SERIES_LEN)
            .map(|i| (TAU * SERIES_PERIODS * i as f64 / MULTIMODAL_SERIES_LEN as f64 + phase).sin())
            .collect();
        if outlier {
            let start = rng.gen_range(0..=MULTIMODAL_SERIES_LEN - BURST_LEN);
            for s in &mut samples[start..start + BURST_LEN] {
                *s += BURST_AMPLITUDE;
            }
        }
        signal_rows.push(samples);
    }

    let columns = vec![
        FeatureColumn::new(
            "level",
            FeatureKind::Numeric,
            ColumnValues::Vector {
                dim: 1,
                rows: level_rows,
            },
        ),
        FeatureColumn::new(
            "group",
            FeatureKind::Categorical,
            ColumnValues::Categorical(group_rows),
        ),
        FeatureColumn::new(
            "signal",
            FeatureKind::Timeseries,
            ColumnValues::TimeSeries(signal_rows),
        ),
    ];
    Dataset::new("synth_multimodal", columns, Some(labels))
        .map_err(|e| EvalError::InvalidParams(e.to_string()))
}
