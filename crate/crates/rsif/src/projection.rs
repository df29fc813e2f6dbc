//! Distance-based dynamic-feature projections and the reference-pair
//! selection strategies.
//!
//! A reference pair `(q, r)` of one feature column turns any payload `x`
//! into the real value `P(x) = d(r, x) - d(q, x)`, an approximate
//! projection of `x` onto the direction from `q` to `r`. Each internal tree
//! node draws a fresh pair, so every split sees its own one-dimensional
//! ordering of the data. A pair is only useful when `d(q, r) > 0`;
//! otherwise the projection is constant.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{FeatureColumn, Value, ValueRef};
use crate::distances::{distance, CategoricalStats, DistanceError, DistanceId, DistanceMatrix};

/// The two reference payloads defining one projection, with their training
/// indices kept for fit-time bookkeeping. Payloads are stored by value so a
/// fitted model needs no access to its training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePair {
    pub feature_id: String,
    pub distance: DistanceId,
    pub q_value: Value,
    pub r_value: Value,
    pub q_index: usize,
    pub r_index: usize,
}

impl ReferencePair {
    /// Builds a pair by copying the payloads at rows `q` and `r` of a column.
    pub fn from_column(column: &FeatureColumn, distance: DistanceId, q: usize, r: usize) -> Self {
        Self {
            feature_id: column.id.clone(),
            distance,
            q_value: column.value(q).to_owned_value(),
            r_value: column.value(r).to_owned_value(),
            q_index: q,
            r_index: r,
        }
    }
}

/// How reference pairs are drawn at each internal node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// A uniformly drawn distinct pair of candidates.
    Random,
    /// A uniform draw from the 10 most distant candidate pairs, precomputed
    /// over the whole reference pool at fit time.
    Global,
    /// The exact most distant pair among the node's candidates.
    Local,
    /// A random candidate `u`, then the candidate furthest from `u`, then
    /// the candidate furthest from that.
    #[default]
    TwoStep,
}

/// All candidate pairs were at distance zero (or no pair exists); the
/// caller should retry with a different feature or distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("degenerate reference pair: no candidate pair with positive distance")]
pub struct DegeneratePair;

/// Projects one payload: `P(x) = d(r, x) - d(q, x)`, or the raw numeric
/// value itself under the identity distance.
pub fn project(
    value: ValueRef<'_>,
    pair: &ReferencePair,
    stats: Option<&CategoricalStats>,
) -> Result<f64, DistanceError> {
    if pair.distance.is_identity() {
        return match value {
            ValueRef::Vector(v) if v.len() == 1 => Ok(v[0]),
            _ => Err(DistanceError::KindMismatch {
                distance: DistanceId::Identity,
            }),
        };
    }
    let to_r = distance(pair.distance, pair.r_value.as_ref(), value, stats)?;
    let to_q = distance(pair.distance, pair.q_value.as_ref(), value, stats)?;
    Ok(to_r - to_q)
}

/// Projects the rows of a column. When a distance matrix is supplied and
/// both reference objects are candidate rows, entries come from matrix
/// lookups; this is exactly equal to direct computation because matrix
/// entries were produced by the same scalar calls.
pub fn project_column(
    column: &FeatureColumn,
    rows: &[usize],
    pair: &ReferencePair,
    stats: Option<&CategoricalStats>,
    matrix: Option<&DistanceMatrix>,
) -> Result<Vec<f64>, DistanceError> {
    if pair.distance.is_identity() {
        return rows
            .iter()
            .map(|&i| match column.value(i) {
                ValueRef::Vector(v) if v.len() == 1 => Ok(v[0]),
                _ => Err(DistanceError::KindMismatch {
                    distance: DistanceId::Identity,
                }),
            })
            .collect();
    }
    if let Some(m) = matrix {
        if let (Some(r_row), Some(q_row)) = (m.row(pair.r_index), m.row(pair.q_index)) {
            return Ok(rows.iter().map(|&i| r_row[i] - q_row[i]).collect());
        }
    }
    rows.iter()
        .map(|&i| project(column.value(i), pair, stats))
        .collect()
}

fn argmax_distance(
    candidates: &[usize],
    from: usize,
    dist: &dyn Fn(usize, usize) -> f64,
) -> (usize, f64) {
    let mut best = candidates[0];
    let mut best_d = dist(candidates[0], from);
    for &c in &candidates[1..] {
        let d = dist(c, from);
        if d > best_d {
            best = c;
            best_d = d;
        }
    }
    (best, best_d)
}

pub(crate) fn two_step_from(
    candidates: &[usize],
    u: usize,
    dist: &dyn Fn(usize, usize) -> f64,
) -> Result<(usize, usize), DegeneratePair> {
    let (q, _) = argmax_distance(candidates, u, dist);
    let (r, d_qr) = argmax_distance(candidates, q, dist);
    if q == r || d_qr <= 0.0 {
        return Err(DegeneratePair);
    }
    Ok((q, r))
}

/// Two-step selection: draw `u` uniformly from `candidates`, take `q` as
/// the candidate furthest from `u` and `r` as the candidate furthest from
/// `q`. Argmax ties resolve to the lowest index (candidates are scanned in
/// order). `dist(c, other)` must be defined for every candidate `c`.
pub fn select_pair_two_step(
    candidates: &[usize],
    dist: &dyn Fn(usize, usize) -> f64,
    rng: &mut impl Rng,
) -> Result<(usize, usize), DegeneratePair> {
    if candidates.len() < 2 {
        return Err(DegeneratePair);
    }
    let u = candidates[rng.gen_range(0..candidates.len())];
    two_step_from(candidates, u, dist)
}

/// Draws a reference pair according to `strategy`. `global_pairs` supplies
/// the fit-time top-distant pair list and is consulted only by
/// [`SelectionStrategy::Global`]. Returns indices `(q, r)`.
pub fn select_pair(
    strategy: SelectionStrategy,
    candidates: &[usize],
    dist: &dyn Fn(usize, usize) -> f64,
    global_pairs: Option<&[(usize, usize)]>,
    rng: &mut impl Rng,
) -> Result<(usize, usize), DegeneratePair> {
    match strategy {
        SelectionStrategy::Random => {
            if candidates.len() < 2 {
                return Err(DegeneratePair);
            }
            let a = rng.gen_range(0..candidates.len());
            let mut b = rng.gen_range(0..candidates.len() - 1);
            if b >= a {
                b += 1;
            }
            let (q, r) = (candidates[a], candidates[b]);
            if dist(q, r) <= 0.0 {
                return Err(DegeneratePair);
            }
            Ok((q, r))
        }
        SelectionStrategy::Global => {
            let pairs = global_pairs.unwrap_or(&[]);
            if pairs.is_empty() {
                return Err(DegeneratePair);
            }
            Ok(pairs[rng.gen_range(0..pairs.len())])
        }
        SelectionStrategy::Local => {
            if candidates.len() < 2 {
                return Err(DegeneratePair);
            }
            let mut best = (candidates[0], candidates[1]);
            let mut best_d = f64::NEG_INFINITY;
            for (i, &a) in candidates.iter().enumerate() {
                for &b in &candidates[i + 1..] {
                    let d = dist(a, b);
                    if d > best_d {
                        best = (a, b);
                        best_d = d;
                    }
                }
            }
            if best_d <= 0.0 {
                return Err(DegeneratePair);
            }
            Ok(best)
        }
        SelectionStrategy::TwoStep => select_pair_two_step(candidates, dist, rng),
    }
}

/// Pair selection for the identity projection. The projection value is the
/// raw numeric value regardless of the pair, so the pair only records which
/// rows witnessed a non-constant column: the rows holding the minimum and
/// maximum values.
pub fn select_identity_pair(
    column: &FeatureColumn,
    rows: &[usize],
) -> Result<(usize, usize), DegeneratePair> {
    let raw = |i: usize| -> f64 {
        match column.value(i) {
            ValueRef::Vector(v) if v.len() == 1 => v[0],
            _ => f64::NAN,
        }
    };
    let mut lo = rows[0];
    let mut hi = rows[0];
    for &i in &rows[1..] {
        let v = raw(i);
        if v < raw(lo) {
            lo = i;
        }
        if v > raw(hi) {
            hi = i;
        }
    }
    let spread = raw(hi) > raw(lo);
    if !spread {
        return Err(DegeneratePair);
    }
    Ok((lo, hi))
}
