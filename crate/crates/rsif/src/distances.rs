//! Distance measures per feature kind, fitted statistics for the
//! frequency-based categorical measures, and precomputed distance matrices
//! over a pool of reference candidates.
//!
//! Every measure maps two payloads of the same kind to a nonnegative real
//! and is symmetric. `identity` is the odd one out: it is not a pairwise
//! measure at all but a marker meaning "project a numeric feature onto its
//! raw value", and pairwise calls on it are rejected.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{
    Dataset, FeatureColumn, FeatureKind, GraphValue, HistogramValue, ValueRef,
};

/// Identifier of a distance measure, as spelled in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceId {
    Euclidean,
    Manhattan,
    Chebyshev,
    Cosine,
    Goodall3,
    Lin,
    Of,
    Wasserstein1,
    Dtw,
    DegreeDivergence,
    Identity,
}

impl DistanceId {
    pub const ALL: [DistanceId; 11] = [
        DistanceId::Euclidean,
        DistanceId::Manhattan,
        DistanceId::Chebyshev,
        DistanceId::Cosine,
        DistanceId::Goodall3,
        DistanceId::Lin,
        DistanceId::Of,
        DistanceId::Wasserstein1,
        DistanceId::Dtw,
        DistanceId::DegreeDivergence,
        DistanceId::Identity,
    ];

    /// Whether this measure can be used on a column of the given kind.
    pub fn applicable_to(self, kind: FeatureKind) -> bool {
        use DistanceId::*;
        use FeatureKind as K;
        match self {
            Euclidean | Manhattan | Chebyshev | Cosine => {
                matches!(kind, K::Numeric | K::Vector)
            }
            Goodall3 | Lin | Of => kind == K::Categorical,
            Wasserstein1 => kind == K::Histogram,
            Dtw => kind == K::Timeseries,
            DegreeDivergence => kind == K::Graph,
            Identity => kind == K::Numeric,
        }
    }

    pub fn is_identity(self) -> bool {
        self == DistanceId::Identity
    }

    pub fn needs_categorical_stats(self) -> bool {
        matches!(
            self,
            DistanceId::Goodall3 | DistanceId::Lin | DistanceId::Of
        )
    }
}

impl fmt::Display for DistanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DistanceId::Euclidean => "euclidean",
            DistanceId::Manhattan => "manhattan",
            DistanceId::Chebyshev => "chebyshev",
            DistanceId::Cosine => "cosine",
            DistanceId::Goodall3 => "goodall3",
            DistanceId::Lin => "lin",
            DistanceId::Of => "of",
            DistanceId::Wasserstein1 => "wasserstein1",
            DistanceId::Dtw => "dtw",
            DistanceId::DegreeDivergence => "degree_divergence",
            DistanceId::Identity => "identity",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("{distance} is not applicable to payloads of this kind")]
    KindMismatch { distance: DistanceId },
    #[error("{distance} is not applicable to {kind} columns")]
    NotApplicable {
        distance: DistanceId,
        kind: FeatureKind,
    },
    #[error("identity is not a pairwise distance")]
    IdentityNotPairwise,
    #[error("categorical distance requires fitted statistics")]
    MissingStats,
    #[error("unknown feature {0}")]
    UnknownFeature(String),
    #[error("candidate index {index} out of range for {n} examples")]
    CandidateOutOfRange { index: usize, n: usize },
}

fn check_dims(x: &[f64], y: &[f64]) -> Result<(), DistanceError> {
    if x.len() != y.len() {
        return Err(DistanceError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(DistanceError::DimensionMismatch { left: 0, right: 0 });
    }
    Ok(())
}

/// Minkowski distance of order 2.
pub fn euclidean(x: &[f64], y: &[f64]) -> Result<f64, DistanceError> {
    check_dims(x, y)?;
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Minkowski distance of order 1.
pub fn manhattan(x: &[f64], y: &[f64]) -> Result<f64, DistanceError> {
    check_dims(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum())
}

/// Minkowski distance of order infinity.
pub fn chebyshev(x: &[f64], y: &[f64]) -> Result<f64, DistanceError> {
    check_dims(x, y)?;
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `1 - cos(x, y)`, in `[0, 2]`. Zero vectors: two zero vectors are at
/// distance 0, a zero vector against a nonzero one is at distance 1.
pub fn cosine_distance(x: &[f64], y: &[f64]) -> Result<f64, DistanceError> {
    check_dims(x, y)?;
    if x == y {
        return Ok(0.0);
    }
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        nx += a * a;
        ny += b * b;
    }
    if nx == 0.0 && ny == 0.0 {
        return Ok(0.0);
    }
    if nx == 0.0 || ny == 0.0 {
        return Ok(1.0);
    }
    let sim = (dot / (nx.sqrt() * ny.sqrt())).clamp(-1.0, 1.0);
    Ok(1.0 - sim)
}

/// Category occurrence counts fitted on a training column. Categories never
/// seen in training are given a count floor of 1 at query time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalStats {
    n_train: u64,
    freq: BTreeMap<String, u64>,
}

impl CategoricalStats {
    pub fn n_train(&self) -> u64 {
        self.n_train
    }

    pub fn freq(&self) -> &BTreeMap<String, u64> {
        &self.freq
    }

    /// Occurrence count with the unseen-category floor applied.
    pub fn count(&self, category: &str) -> u64 {
        self.freq.get(category).copied().unwrap_or(1)
    }

    /// `p(a) = f(a) / n`.
    pub fn prob(&self, category: &str) -> f64 {
        self.count(category) as f64 / self.n_train as f64
    }

    /// `p2(a) = f(a)(f(a)-1) / (n(n-1))`: probability that two distinct
    /// training examples both equal `a`. Zero when fewer than two examples.
    pub fn pair_prob(&self, category: &str) -> f64 {
        let n = self.n_train as f64;
        if self.n_train < 2 {
            return 0.0;
        }
        let f = self.count(category) as f64;
        f * (f - 1.0) / (n * (n - 1.0))
    }
}

/// Counts category occurrences over a training column.
pub fn fit_categorical_stats<'a>(values: impl IntoIterator<Item = &'a str>) -> CategoricalStats {
    let mut freq: BTreeMap<String, u64> = BTreeMap::new();
    let mut n_train = 0;
    for v in values {
        *freq.entry(v.to_string()).or_insert(0) += 1;
        n_train += 1;
    }
    CategoricalStats { n_train, freq }
}

/// Frequency-based categorical distance, `1 - similarity`, in `[0, 1]`.
///
/// Similarities: Goodall3 gives `1 - p2(x)` on a match and 0 otherwise; Lin
/// gives 1 on a match and `2 ln(p(x)+p(y)) / (ln p(x) + ln p(y))` (clamped
/// to `[0, 1]`) otherwise; occurrence frequency gives 1 on a match and
/// `1 / (1 + ln(n/f(x)) ln(n/f(y)))` otherwise.
pub fn categorical_distance(
    kind: DistanceId,
    stats: &CategoricalStats,
    x: &str,
    y: &str,
) -> Result<f64, DistanceError> {
    let sim = match kind {
        DistanceId::Goodall3 => {
            if x == y {
                1.0 - stats.pair_prob(x)
            } else {
                0.0
            }
        }
        DistanceId::Lin => {
            if x == y {
                1.0
            } else {
                let px = stats.prob(x);
                let py = stats.prob(y);
                let denom = px.ln() + py.ln();
                if denom == 0.0 {
                    // both probabilities are 1; only reachable through the
                    // unseen-category floor on degenerate training data
                    1.0
                } else {
                    (2.0 * (px + py).ln() / denom).clamp(0.0, 1.0)
                }
            }
        }
        DistanceId::Of => {
            if x == y {
                1.0
            } else {
                let n = stats.n_train() as f64;
                let ix = (n / stats.count(x) as f64).ln();
                let iy = (n / stats.count(y) as f64).ln();
                1.0 / (1.0 + ix * iy)
            }
        }
        other => return Err(DistanceError::KindMismatch { distance: other }),
    };
    Ok(1.0 - sim)
}

/// One-dimensional earth mover's distance between weighted point
/// histograms: the integral of `|CDF1 - CDF2|` over the merged support.
pub fn wasserstein1(a: &HistogramValue, b: &HistogramValue) -> f64 {
    let mut points: Vec<f64> = Vec::with_capacity(a.positions.len() + b.positions.len());
    points.extend_from_slice(&a.positions);
    points.extend_from_slice(&b.positions);
    points.sort_by(|x, y| x.partial_cmp(y).expect("finite positions"));
    points.dedup();

    let mut ia = 0;
    let mut ib = 0;
    let mut cdf_a = 0.0;
    let mut cdf_b = 0.0;
    let mut total = 0.0;
    for k in 0..points.len() {
        let p = points[k];
        while ia < a.positions.len() && a.positions[ia] == p {
            cdf_a += a.masses[ia];
            ia += 1;
        }
        while ib < b.positions.len() && b.positions[ib] == p {
            cdf_b += b.masses[ib];
            ib += 1;
        }
        if k + 1 < points.len() {
            total += (cdf_a - cdf_b).abs() * (points[k + 1] - p);
        }
    }
    total
}

/// Classic unconstrained dynamic time warping with local cost `|a - b|`.
pub fn dtw(a: &[f64], b: &[f64]) -> f64 {
    assert!(
        !a.is_empty() && !b.is_empty(),
        "dtw requires nonempty sequences"
    );
    let n = b.len();
    let mut prev = vec![f64::INFINITY; n + 1];
    let mut curr = vec![f64::INFINITY; n + 1];
    prev[0] = 0.0;
    for &ai in a {
        curr[0] = f64::INFINITY;
        for j in 1..=n {
            let cost = (ai - b[j - 1]).abs();
            curr[j] = cost + prev[j].min(curr[j - 1]).min(prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[n]
}

fn degree_distribution(g: &GraphValue) -> BTreeMap<usize, f64> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for d in g.degrees() {
        *counts.entry(d).or_insert(0.0) += 1.0;
    }
    let n = g.num_nodes as f64;
    for v in counts.values_mut() {
        *v /= n;
    }
    counts
}

/// Jensen-Shannon divergence (base-2 log) between the normalized
/// node-degree distributions of two graphs, in `[0, 1]`.
pub fn degree_divergence(a: &GraphValue, b: &GraphValue) -> f64 {
    let pa = degree_distribution(a);
    let pb = degree_distribution(b);
    let degrees: std::collections::BTreeSet<usize> = pa.keys().chain(pb.keys()).copied().collect();
    let mut div = 0.0;
    for degree in degrees {
        let p = pa.get(&degree).copied().unwrap_or(0.0);
        let q = pb.get(&degree).copied().unwrap_or(0.0);
        let m = 0.5 * (p + q);
        let p_term = if p > 0.0 {
            0.5 * p * (p / m).log2()
        } else {
            0.0
        };
        let q_term = if q > 0.0 {
            0.5 * q * (q / m).log2()
        } else {
            0.0
        };
        // summing each degree's pair first keeps the result bitwise
        // symmetric in the argument order
        div += p_term + q_term;
    }
    div.clamp(0.0, 1.0)
}

/// Dispatches a pairwise distance call on two payloads of the same kind.
pub fn distance(
    id: DistanceId,
    a: ValueRef<'_>,
    b: ValueRef<'_>,
    stats: Option<&CategoricalStats>,
) -> Result<f64, DistanceError> {
    use DistanceId::*;
    match (id, a, b) {
        (Euclidean, ValueRef::Vector(x), ValueRef::Vector(y)) => euclidean(x, y),
        (Manhattan, ValueRef::Vector(x), ValueRef::Vector(y)) => manhattan(x, y),
        (Chebyshev, ValueRef::Vector(x), ValueRef::Vector(y)) => chebyshev(x, y),
        (Cosine, ValueRef::Vector(x), ValueRef::Vector(y)) => cosine_distance(x, y),
        (Goodall3 | Lin | Of, ValueRef::Categorical(x), ValueRef::Categorical(y)) => {
            let stats = stats.ok_or(DistanceError::MissingStats)?;
            categorical_distance(id, stats, x, y)
        }
        (Wasserstein1, ValueRef::Histogram(x), ValueRef::Histogram(y)) => Ok(wasserstein1(x, y)),
        (Dtw, ValueRef::TimeSeries(x), ValueRef::TimeSeries(y)) => Ok(dtw(x, y)),
        (DegreeDivergence, ValueRef::Graph(x), ValueRef::Graph(y)) => Ok(degree_divergence(x, y)),
        (Identity, _, _) => Err(DistanceError::IdentityNotPairwise),
        (id, _, _) => Err(DistanceError::KindMismatch { distance: id }),
    }
}

/// Distances from `m` reference candidates to all `n` examples of one
/// feature column, precomputed once at fit time so tree construction only
/// does lookups.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    feature_id: String,
    distance: DistanceId,
    candidates: Vec<usize>,
    n: usize,
    /// Row-major, `candidates.len() * n` entries.
    entries: Vec<f64>,
    row_of: HashMap<usize, usize>,
}

impl DistanceMatrix {
    pub fn feature_id(&self) -> &str {
        &self.feature_id
    }

    pub fn distance(&self) -> DistanceId {
        self.distance
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether `index` is one of the candidate rows.
    pub fn has_candidate(&self, index: usize) -> bool {
        self.row_of.contains_key(&index)
    }

    /// Distance from candidate example `candidate` to example `other`.
    /// Returns `None` when `candidate` is not a candidate row.
    pub fn get(&self, candidate: usize, other: usize) -> Option<f64> {
        let row = *self.row_of.get(&candidate)?;
        self.entries.get(row * self.n + other).copied()
    }

    /// The full row of distances from one candidate to every example.
    pub fn row(&self, candidate: usize) -> Option<&[f64]> {
        let row = *self.row_of.get(&candidate)?;
        Some(&self.entries[row * self.n..(row + 1) * self.n])
    }
}

/// Precomputes the `m x n` distance matrix for one `(feature, distance)`
/// pairing over the given candidate rows. Entries match pointwise calls of
/// the scalar distance functions exactly.
pub fn precompute_matrix(
    dataset: &Dataset,
    feature_id: &str,
    distance_id: DistanceId,
    candidates: &[usize],
    stats: Option<&CategoricalStats>,
) -> Result<DistanceMatrix, DistanceError> {
    let column = dataset
        .column(feature_id)
        .ok_or_else(|| DistanceError::UnknownFeature(feature_id.to_string()))?;
    if distance_id.is_identity() {
        return Err(DistanceError::IdentityNotPairwise);
    }
    if !distance_id.applicable_to(column.kind) {
        return Err(DistanceError::NotApplicable {
            distance: distance_id,
            kind: column.kind,
        });
    }
    if distance_id.needs_categorical_stats() && stats.is_none() {
        return Err(DistanceError::MissingStats);
    }
    let n = dataset.n();
    for &c in candidates {
        if c >= n {
            return Err(DistanceError::CandidateOutOfRange { index: c, n });
        }
    }

    let mut entries = vec![0.0; candidates.len() * n];
    entries
        .par_chunks_mut(n)
        .zip(candidates.par_iter())
        .for_each(|(row, &c)| {
            let from = column.value(c);
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = distance(distance_id, from, column.value(j), stats)
                    .expect("column payloads validated at load time");
            }
        });

    let row_of = candidates
        .iter()
        .enumerate()
        .map(|(row, &c)| (c, row))
        .collect();
    Ok(DistanceMatrix {
        feature_id: feature_id.to_string(),
        distance: distance_id,
        candidates: candidates.to_vec(),
        n,
        entries,
        row_of,
    })
}

/// Convenience wrapper: pairwise distance between two rows of a column.
pub fn column_distance(
    column: &FeatureColumn,
    id: DistanceId,
    stats: Option<&CategoricalStats>,
    i: usize,
    j: usize,
) -> Result<f64, DistanceError> {
    distance(id, column.value(i), column.value(j), stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{ColumnValues, Dataset, FeatureColumn, FeatureKind};

    #[test]
    fn minkowski_examples() {
        assert_eq!(euclidean(&[3.7, -1.0], &[3.7, -1.0]).unwrap(), 0.0);
        assert_eq!(manhattan(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 3.0);
        assert_eq!(chebyshev(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(matches!(
            euclidean(&[1.0], &[1.0, 2.0]),
            Err(DistanceError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            cosine_distance(&[], &[]),
            Err(DistanceError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_distance(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
        // zero-vector conventions
        assert_eq!(cosine_distance(&[0.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn categorical_stats_count_occurrences() {
        let stats = fit_categorical_stats(["a", "a", "b"]);
        assert_eq!(stats.n_train(), 3);
        assert_eq!(stats.count("a"), 2);
        assert_eq!(stats.count("b"), 1);

        let single = fit_categorical_stats(["x"]);
        assert_eq!(single.n_train(), 1);
        assert_eq!(single.count("x"), 1);

        let repeated = fit_categorical_stats(std::iter::repeat_n("c", 100));
        assert_eq!(repeated.count("c"), 100);
        // unseen categories fall back to the count floor
        assert_eq!(repeated.count("zzz"), 1);
    }

    #[test]
    fn goodall3_matches_hand_evaluation() {
        let stats = fit_categorical_stats(["a", "a", "b"]);
        // p2(a) = 2*1 / (3*2) = 1/3, similarity 2/3, distance 1/3
        let d = categorical_distance(DistanceId::Goodall3, &stats, "a", "a").unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15, "{d}");
        assert_eq!(
            categorical_distance(DistanceId::Goodall3, &stats, "a", "b").unwrap(),
            1.0
        );
    }

    #[test]
    fn goodall3_pair_prob_matches_pair_counting() {
        // independent oracle: fraction of ordered pairs (i, j), i != j, where
        // both entries equal the queried category
        let column = ["a", "b", "a", "c", "a", "b"];
        let stats = fit_categorical_stats(column);
        for cat in ["a", "b", "c"] {
            let mut hits = 0usize;
            for i in 0..column.len() {
                for j in 0..column.len() {
                    if i != j && column[i] == cat && column[j] == cat {
                        hits += 1;
                    }
                }
            }
            let oracle = hits as f64 / (column.len() * (column.len() - 1)) as f64;
            assert!((stats.pair_prob(cat) - oracle).abs() < 1e-15);
            let d = categorical_distance(DistanceId::Goodall3, &stats, cat, cat).unwrap();
            assert!((d - oracle).abs() < 1e-15);
        }
    }

    #[test]
    fn lin_examples() {
        let stats = fit_categorical_stats(["a", "b"]);
        // p(a) + p(b) = 1, numerator ln(1) = 0, distance 1
        assert_eq!(
            categorical_distance(DistanceId::Lin, &stats, "a", "b").unwrap(),
            1.0
        );
        assert_eq!(
            categorical_distance(DistanceId::Lin, &stats, "a", "a").unwrap(),
            0.0
        );

        // rarer pairs are closer under Lin than dominant/rare mixes
        let skewed = fit_categorical_stats(["a", "a", "a", "a", "a", "a", "b", "c"]);
        let bc = categorical_distance(DistanceId::Lin, &skewed, "b", "c").unwrap();
        assert!((0.0..=1.0).contains(&bc));
    }

    #[test]
    fn of_matches_numeric_evaluation() {
        let stats = fit_categorical_stats(["a", "b", "c", "d"]);
        let d = categorical_distance(DistanceId::Of, &stats, "a", "b").unwrap();
        assert!((d - 0.6577466377214567).abs() < 1e-12, "{d}");
        assert_eq!(
            categorical_distance(DistanceId::Of, &stats, "a", "a").unwrap(),
            0.0
        );
    }

    #[test]
    fn wasserstein_examples() {
        let h = HistogramValue::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(wasserstein1(&h, &h), 0.0);

        let d0 = HistogramValue::new(vec![0.0], vec![1.0]).unwrap();
        let d3 = HistogramValue::new(vec![3.0], vec![1.0]).unwrap();
        assert_eq!(wasserstein1(&d0, &d3), 3.0);

        let one = HistogramValue::new(vec![1.0], vec![1.0]).unwrap();
        assert!((wasserstein1(&h, &one) - 0.5).abs() < 1e-15);
        assert!((wasserstein1(&one, &h) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dtw_examples() {
        assert_eq!(dtw(&[5.0, 2.0, 9.0], &[5.0, 2.0, 9.0]), 0.0);
        // the repeated 2 can absorb both middle samples at zero cost
        assert_eq!(dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]), 0.0);
        assert_eq!(dtw(&[0.0, 0.0], &[1.0, 1.0]), 2.0);
        assert_eq!(dtw(&[1.0], &[4.0]), 3.0);
    }

    #[test]
    fn degree_divergence_examples() {
        let path2 = GraphValue::new(2, vec![(0, 1)]).unwrap();
        let triangle = GraphValue::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let path3 = GraphValue::new(3, vec![(0, 1), (1, 2)]).unwrap();
        // isomorphic degree multisets
        let path3_relabel = GraphValue::new(3, vec![(0, 2), (1, 2)]).unwrap();

        assert_eq!(degree_divergence(&path3, &path3), 0.0);
        assert_eq!(degree_divergence(&path3, &path3_relabel), 0.0);
        // disjoint degree supports give exactly one bit
        assert_eq!(degree_divergence(&path2, &triangle), 1.0);
        // frozen from a direct JSD evaluation of {1: 2/3, 2: 1/3} vs {2: 1}
        let d = degree_divergence(&path3, &triangle);
        assert!((d - 0.4591479170272448).abs() < 1e-12, "{d}");
    }

    #[test]
    fn dispatcher_rejects_identity_and_mixed_kinds() {
        let err = distance(
            DistanceId::Identity,
            ValueRef::Vector(&[1.0]),
            ValueRef::Vector(&[2.0]),
            None,
        );
        assert!(matches!(err, Err(DistanceError::IdentityNotPairwise)));
        let err = distance(
            DistanceId::Dtw,
            ValueRef::Vector(&[1.0]),
            ValueRef::Vector(&[2.0]),
            None,
        );
        assert!(matches!(err, Err(DistanceError::KindMismatch { .. })));
        let err = distance(
            DistanceId::Lin,
            ValueRef::Categorical("a"),
            ValueRef::Categorical("b"),
            None,
        );
        assert!(matches!(err, Err(DistanceError::MissingStats)));
    }

    fn numeric_dataset(values: &[f64]) -> Dataset {
        let col = FeatureColumn::new(
            "x",
            FeatureKind::Numeric,
            ColumnValues::Vector {
                dim: 1,
                rows: values.iter().map(|&v| vec![v]).collect(),
            },
        );
        Dataset::new("d", vec![col], None).unwrap()
    }

    #[test]
    fn matrix_single_candidate_row() {
        let ds = numeric_dataset(&[0.0, 3.0, 10.0]);
        let m = precompute_matrix(&ds, "x", DistanceId::Euclidean, &[1], None).unwrap();
        assert_eq!(m.row(1).unwrap(), &[3.0, 0.0, 7.0]);
        assert_eq!(m.get(1, 1), Some(0.0));
        assert!(m.get(0, 1).is_none());
    }

    #[test]
    fn matrix_diagonal_is_zero_for_zero_self_distance_measures() {
        let ds = numeric_dataset(&[1.5, -2.0, 0.25, 9.0]);
        for id in [
            DistanceId::Euclidean,
            DistanceId::Manhattan,
            DistanceId::Chebyshev,
            DistanceId::Cosine,
        ] {
            let m = precompute_matrix(&ds, "x", id, &[0, 2, 3], None).unwrap();
            for &c in m.candidates() {
                assert_eq!(m.get(c, c), Some(0.0), "{id} diag at {c}");
            }
        }
    }

    #[test]
    fn matrix_matches_pointwise_dtw() {
        let col = FeatureColumn::new(
            "ts",
            FeatureKind::Timeseries,
            ColumnValues::TimeSeries(vec![
                vec![0.0, 1.0, 2.0],
                vec![5.0, 5.0],
                vec![1.0, 0.0, 1.0, 0.0],
            ]),
        );
        let ds = Dataset::new("ts", vec![col], None).unwrap();
        let m = precompute_matrix(&ds, "ts", DistanceId::Dtw, &[0, 1, 2], None).unwrap();
        let col = ds.column("ts").unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let direct = column_distance(col, DistanceId::Dtw, None, i, j).unwrap();
                assert_eq!(m.get(i, j), Some(direct), "({i}, {j})");
            }
        }
    }

    #[test]
    fn matrix_rejects_inapplicable_pairing() {
        let ds = numeric_dataset(&[1.0, 2.0]);
        let err = precompute_matrix(&ds, "x", DistanceId::Dtw, &[0], None).unwrap_err();
        assert!(matches!(err, DistanceError::NotApplicable { .. }));
        let err = precompute_matrix(&ds, "x", DistanceId::Identity, &[0], None).unwrap_err();
        assert!(matches!(err, DistanceError::IdentityNotPairwise));
        let err = precompute_matrix(&ds, "x", DistanceId::Euclidean, &[5], None).unwrap_err();
        assert!(matches!(err, DistanceError::CandidateOutOfRange { .. }));
    }
}
