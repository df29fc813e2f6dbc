//! Random similarity isolation trees: recursive construction over
//! distance-based projections and per-example path-length evaluation.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{Dataset, FeatureColumn, ValueRef};
use crate::distances::{CategoricalStats, DistanceError, DistanceId, DistanceMatrix};
use crate::forest::avg_path_c;
use crate::projection::{
    project, project_column, select_identity_pair, select_pair, ReferencePair, SelectionStrategy,
};

/// Degenerate draws (feature, distance, pair) are retried this many times
/// before the node is closed as a leaf.
const MAX_SPLIT_ATTEMPTS: usize = 8;

/// Above this many candidates the usability probe samples random pairs
/// instead of checking all of them.
const EXHAUSTIVE_PROBE_LIMIT: usize = 8;
const PROBE_PAIRS: usize = 32;

/// One node of an isolation tree. Internal nodes carry the full reference
/// pair (payloads included) so scoring needs no training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        pair: ReferencePair,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Number of training examples that reached this leaf.
        size: usize,
        depth: usize,
    },
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    root: TreeNode,
    max_depth: usize,
    subsample_size: usize,
}

/// The example carries a payload the tree cannot project (missing column or
/// wrong kind). Scoring through a fitted forest validates schemas up front,
/// so this only surfaces on direct tree use.
#[derive(Debug, Error)]
#[error("tree references feature {feature}: {source}")]
pub struct TraversalError {
    pub feature: String,
    #[source]
    pub source: DistanceError,
}

impl IsolationTree {
    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn subsample_size(&self) -> usize {
        self.subsample_size
    }

    /// Path length of one example: the depth of the leaf it reaches plus
    /// the average-path adjustment for the leaf's size.
    pub fn path_length(
        &self,
        dataset: &Dataset,
        row: usize,
        stats: &BTreeMap<String, CategoricalStats>,
    ) -> Result<f64, TraversalError> {
        let columns: HashMap<&str, usize> = dataset
            .columns()
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.as_str(), i))
            .collect();
        self.path_length_resolved(dataset, &columns, row, stats)
    }

    /// Hot path used by batch scoring: column resolution is done once by
    /// the caller.
    pub(crate) fn path_length_resolved(
        &self,
        dataset: &Dataset,
        columns: &HashMap<&str, usize>,
        row: usize,
        stats: &BTreeMap<String, CategoricalStats>,
    ) -> Result<f64, TraversalError> {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { size, depth } => {
                    return Ok(*depth as f64 + avg_path_c(*size));
                }
                TreeNode::Internal {
                    pair,
                    threshold,
                    left,
                    right,
                } => {
                    let col_idx =
                        columns
                            .get(pair.feature_id.as_str())
                            .copied()
                            .ok_or_else(|| TraversalError {
                                feature: pair.feature_id.clone(),
                                source: DistanceError::UnknownFeature(pair.feature_id.clone()),
                            })?;
                    let column = &dataset.columns()[col_idx];
                    let value = column.value(row);
                    let p =
                        project(value, pair, stats.get(&pair.feature_id)).map_err(|source| {
                            TraversalError {
                                feature: pair.feature_id.clone(),
                                source,
                            }
                        })?;
                    node = if p <= *threshold { left } else { right };
                }
            }
        }
    }
}

/// Shared read-only state for building the trees of one forest.
pub(crate) struct BuildContext<'a> {
    pub dataset: &'a Dataset,
    /// Configured features: column index plus its admissible distances.
    pub features: Vec<(usize, Vec<DistanceId>)>,
    /// Pool membership, indexed by global row.
    pub pool_member: Vec<bool>,
    pub strategy: SelectionStrategy,
    pub matrices: HashMap<(usize, DistanceId), DistanceMatrix>,
    /// Per (feature, distance) top-distant candidate pairs; only populated
    /// for the global strategy.
    pub global_pairs: HashMap<(usize, DistanceId), Vec<(usize, usize)>>,
    /// Fitted stats for categorical features, by column index.
    pub stats: HashMap<usize, CategoricalStats>,
    pub max_depth: usize,
}

impl BuildContext<'_> {
    fn column(&self, col_idx: usize) -> &FeatureColumn {
        &self.dataset.columns()[col_idx]
    }
}

/// Projection values were constant, so no threshold separates them.
#[derive(Debug, Error)]
#[error("cannot draw a threshold over a constant projection")]
pub struct ConstantProjection;

/// Draws a split threshold uniformly inside the open interval
/// `(min(p), max(p))`, guaranteeing that both partitions are nonempty.
pub fn random_threshold(p: &[f64], rng: &mut impl Rng) -> Result<f64, ConstantProjection> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in p {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let spread = hi > lo;
    if !spread {
        return Err(ConstantProjection);
    }
    // gen_range samples [lo, hi); redraw the measure-zero lo hit, accepting
    // it only when the interval has no interior float
    let mut thr = rng.gen_range(lo..hi);
    for _ in 0..3 {
        if thr > lo {
            break;
        }
        thr = rng.gen_range(lo..hi);
    }
    Ok(thr)
}

/// Probes whether any candidate pair of this feature has a positive
/// distance under any of its configured pairwise measures, or (for the
/// identity projection) whether the raw values are non-constant.
fn feature_usable(
    ctx: &BuildContext<'_>,
    col_idx: usize,
    dists: &[DistanceId],
    rows: &[usize],
    candidates: &[usize],
    rng: &mut impl Rng,
) -> bool {
    if dists.contains(&DistanceId::Identity) && numeric_non_constant(ctx.column(col_idx), rows) {
        return true;
    }
    let pairwise: Vec<DistanceId> = dists.iter().copied().filter(|d| !d.is_identity()).collect();
    if pairwise.is_empty() || candidates.len() < 2 {
        return false;
    }
    let positive = |a: usize, b: usize| {
        pairwise.iter().any(|d| {
            ctx.matrices
                .get(&(col_idx, *d))
                .and_then(|m| m.get(a, b))
                .is_some_and(|v| v > 0.0)
        })
    };
    if candidates.len() <= EXHAUSTIVE_PROBE_LIMIT {
        for (i, &a) in candidates.iter().enumerate() {
            for &b in &candidates[i + 1..] {
                if positive(a, b) {
                    return true;
                }
            }
        }
        return false;
    }
    for _ in 0..PROBE_PAIRS {
        let i = rng.gen_range(0..candidates.len());
        let mut j = rng.gen_range(0..candidates.len() - 1);
        if j >= i {
            j += 1;
        }
        if positive(candidates[i], candidates[j]) {
            return true;
        }
    }
    false
}

fn numeric_non_constant(column: &FeatureColumn, rows: &[usize]) -> bool {
    let mut first = None;
    for &i in rows {
        if let ValueRef::Vector(v) = column.value(i) {
            if v.len() != 1 {
                return false;
            }
            match first {
                None => first = Some(v[0]),
                Some(f) if v[0] != f => return true,
                _ => {}
            }
        } else {
            return false;
        }
    }
    false
}

/// Draws a usable (feature, distance) pairing: the feature uniformly among
/// features whose usability probe passes, then a distance uniformly from
/// that feature's configured set. Returns `None` when nothing is usable.
pub(crate) fn usable_choices(
    ctx: &BuildContext<'_>,
    rows: &[usize],
    candidates: &[usize],
    rng: &mut impl Rng,
) -> Option<(usize, DistanceId)> {
    let mut usable = Vec::with_capacity(ctx.features.len());
    for (slot, (col_idx, dists)) in ctx.features.iter().enumerate() {
        if feature_usable(ctx, *col_idx, dists, rows, candidates, rng) {
            usable.push(slot);
        }
    }
    if usable.is_empty() {
        return None;
    }
    let (col_idx, dists) = &ctx.features[usable[rng.gen_range(0..usable.len())]];
    let dist = dists[rng.gen_range(0..dists.len())];
    Some((*col_idx, dist))
}

/// Builds one tree over `subsample` (sorted global row indices).
pub(crate) fn build_tree(
    ctx: &BuildContext<'_>,
    subsample: Vec<usize>,
    rng: &mut impl Rng,
) -> IsolationTree {
    let size = subsample.len();
    let root = grow(ctx, subsample, 0, rng);
    IsolationTree {
        root,
        max_depth: ctx.max_depth,
        subsample_size: size,
    }
}

fn grow(ctx: &BuildContext<'_>, rows: Vec<usize>, depth: usize, rng: &mut impl Rng) -> TreeNode {
    if rows.len() <= 1 || depth >= ctx.max_depth {
        return TreeNode::Leaf {
            size: rows.len(),
            depth,
        };
    }
    let candidates: Vec<usize> = rows
        .iter()
        .copied()
        .filter(|&i| ctx.pool_member[i])
        .collect();

    for _ in 0..MAX_SPLIT_ATTEMPTS {
        let Some((col_idx, dist_id)) = usable_choices(ctx, &rows, &candidates, rng) else {
            break;
        };
        let column = ctx.column(col_idx);
        let stats = ctx.stats.get(&col_idx);
        let matrix = ctx.matrices.get(&(col_idx, dist_id));

        let selected = if dist_id.is_identity() {
            select_identity_pair(column, &rows)
        } else {
            let m = matrix.expect("pairwise matrices are built for every configured distance");
            let dist = |a: usize, b: usize| m.get(a, b).expect("candidates are pool rows");
            let global = ctx.global_pairs.get(&(col_idx, dist_id)).map(Vec::as_slice);
            select_pair(ctx.strategy, &candidates, &dist, global, rng)
        };
        let Ok((q, r)) = selected else { continue };

        let pair = ReferencePair::from_column(column, dist_id, q, r);
        let Ok(p) = project_column(column, &rows, &pair, stats, matrix) else {
            continue;
        };
        let Ok(threshold) = random_threshold(&p, rng) else {
            continue;
        };

        let mut left_rows = Vec::new();
        let mut right_rows = Vec::new();
        for (&row, &value) in rows.iter().zip(&p) {
            if value <= threshold {
                left_rows.push(row);
            } else {
                right_rows.push(row);
            }
        }
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

        let left = grow(ctx, left_rows, depth + 1, rng);
        let right = grow(ctx, right_rows, depth + 1, rng);
        return TreeNode::Internal {
            pair,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        };
    }
    TreeNode::Leaf {
        size: rows.len(),
        depth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{ColumnValues, FeatureKind};
    use crate::forest::{DistanceConfig, FitParams, Forest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

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

    fn euclid_context<'a>(ds: &'a Dataset, max_depth: usize) -> BuildContext<'a> {
        let pool: Vec<usize> = (0..ds.n()).collect();
        let matrix =
            crate::distances::precompute_matrix(ds, "x", DistanceId::Euclidean, &pool, None)
                .unwrap();
        let mut matrices = HashMap::new();
        matrices.insert((0, DistanceId::Euclidean), matrix);
        BuildContext {
            dataset: ds,
            features: vec![(0, vec![DistanceId::Euclidean])],
            pool_member: vec![true; ds.n()],
            strategy: SelectionStrategy::TwoStep,
            matrices,
            global_pairs: HashMap::new(),
            stats: HashMap::new(),
            max_depth,
        }
    }

    #[test]
    fn single_example_becomes_a_leaf() {
        let ds = numeric_dataset(&[1.0, 2.0]);
        let ctx = euclid_context(&ds, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = build_tree(&ctx, vec![0], &mut rng);
        assert_eq!(tree.root(), &TreeNode::Leaf { size: 1, depth: 0 });
    }

    #[test]
    fn constant_features_give_a_root_leaf() {
        let ds = numeric_dataset(&[5.0, 5.0, 5.0, 5.0]);
        let ctx = euclid_context(&ds, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = build_tree(&ctx, vec![0, 1, 2, 3], &mut rng);
        assert_eq!(tree.root(), &TreeNode::Leaf { size: 4, depth: 0 });
    }

    fn check_structure(node: &TreeNode, depth: usize, max_depth: usize, sizes: &mut Vec<usize>) {
        match node {
            TreeNode::Leaf {
                size,
                depth: leaf_depth,
            } => {
                assert_eq!(*leaf_depth, depth);
                assert!(*leaf_depth <= max_depth);
                assert!(*size >= 1, "empty leaf");
                sizes.push(*size);
            }
            TreeNode::Internal { left, right, .. } => {
                assert!(depth < max_depth, "internal node at max depth");
                check_structure(left, depth + 1, max_depth, sizes);
                check_structure(right, depth + 1, max_depth, sizes);
            }
        }
    }

    #[test]
    fn four_distinct_values_respect_depth_and_size_bounds() {
        let ds = numeric_dataset(&[0.0, 1.0, 2.0, 3.0]);
        let ctx = euclid_context(&ds, 2); // ceil(log2(4))
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = build_tree(&ctx, vec![0, 1, 2, 3], &mut rng);
            let mut sizes = Vec::new();
            check_structure(tree.root(), 0, 2, &mut sizes);
            assert_eq!(sizes.iter().sum::<usize>(), 4, "seed {seed}");
        }
    }

    #[test]
    fn build_is_reproducible_for_a_fixed_seed() {
        let ds = numeric_dataset(&[3.0, -1.0, 0.5, 8.0, 2.0, 2.5, -4.0, 9.0]);
        let ctx = euclid_context(&ds, 3);
        let a = build_tree(&ctx, (0..8).collect(), &mut ChaCha8Rng::seed_from_u64(11));
        let b = build_tree(&ctx, (0..8).collect(), &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn threshold_separates_two_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let thr = random_threshold(&[0.0, 10.0], &mut rng).unwrap();
            assert!(thr > 0.0 && thr < 10.0);
        }
        assert!(random_threshold(&[4.0, 4.0], &mut rng).is_err());
    }

    #[test]
    fn threshold_is_uniform_over_the_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| random_threshold(&[0.0, 1.0], &mut rng).unwrap())
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn usable_choices_picks_the_only_usable_feature() {
        let ds = numeric_dataset(&[1.0, 2.0, 3.0]);
        let ctx = euclid_context(&ds, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = vec![0, 1, 2];
        let got = usable_choices(&ctx, &rows, &rows, &mut rng);
        assert_eq!(got, Some((0, DistanceId::Euclidean)));
    }

    #[test]
    fn usable_choices_returns_none_when_everything_is_constant() {
        let ds = numeric_dataset(&[2.0, 2.0, 2.0]);
        let ctx = euclid_context(&ds, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = vec![0, 1, 2];
        assert_eq!(usable_choices(&ctx, &rows, &rows, &mut rng), None);
    }

    #[test]
    fn usable_choices_draws_features_uniformly() {
        let cols = vec![
            FeatureColumn::new(
                "a",
                FeatureKind::Numeric,
                ColumnValues::Vector {
                    dim: 1,
                    rows: vec![vec![0.0], vec![1.0], vec![2.0]],
                },
            ),
            FeatureColumn::new(
                "b",
                FeatureKind::Numeric,
                ColumnValues::Vector {
                    dim: 1,
                    rows: vec![vec![5.0], vec![6.0], vec![7.0]],
                },
            ),
        ];
        let ds = Dataset::new("two", cols, None).unwrap();
        let pool: Vec<usize> = (0..3).collect();
        let mut matrices = HashMap::new();
        for (i, id) in [(0usize, "a"), (1usize, "b")] {
            let m =
                crate::distances::precompute_matrix(&ds, id, DistanceId::Euclidean, &pool, None)
                    .unwrap();
            matrices.insert((i, DistanceId::Euclidean), m);
        }
        let ctx = BuildContext {
            dataset: &ds,
            features: vec![
                (0, vec![DistanceId::Euclidean]),
                (1, vec![DistanceId::Euclidean]),
            ],
            pool_member: vec![true; 3],
            strategy: SelectionStrategy::TwoStep,
            matrices,
            global_pairs: HashMap::new(),
            stats: HashMap::new(),
            max_depth: 4,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows = vec![0, 1, 2];
        let draws = 10_000;
        let mut first = 0usize;
        for _ in 0..draws {
            match usable_choices(&ctx, &rows, &rows, &mut rng) {
                Some((0, _)) => first += 1,
                Some((1, _)) => {}
                other => panic!("unexpected draw {other:?}"),
            }
        }
        let frac = first as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 0.02, "feature draw fraction {frac}");
    }

    #[test]
    fn path_length_examples() {
        // a model fitted on two points isolates both at depth 1
        let ds = numeric_dataset(&[0.0, 10.0]);
        let params = FitParams {
            trees: 1,
            subsample: 2,
            config: DistanceConfig::single("x", vec![DistanceId::Euclidean]),
            ..FitParams::default()
        };
        let model = Forest::fit(&ds, &params).unwrap();
        let tree = &model.trees()[0];
        let stats = BTreeMap::new();
        let h0 = tree.path_length(&ds, 0, &stats).unwrap();
        let h1 = tree.path_length(&ds, 1, &stats).unwrap();
        // both isolated: depth 1 leaf of size 1, c(1) = 0
        assert_eq!(h0, 1.0);
        assert_eq!(h1, 1.0);
    }

    #[test]
    fn leaf_adjustment_uses_avg_path_c() {
        let leaf = IsolationTree {
            root: TreeNode::Leaf { size: 4, depth: 2 },
            max_depth: 2,
            subsample_size: 4,
        };
        let ds = numeric_dataset(&[0.0]);
        let h = leaf.path_length(&ds, 0, &BTreeMap::new()).unwrap();
        assert!((h - (2.0 + avg_path_c(4))).abs() < 1e-15);
        assert!((avg_path_c(4) - 1.8516559071362195).abs() < 1e-12);

        let isolated = IsolationTree {
            root: TreeNode::Leaf { size: 1, depth: 0 },
            max_depth: 2,
            subsample_size: 1,
        };
        assert_eq!(isolated.path_length(&ds, 0, &BTreeMap::new()).unwrap(), 0.0);
    }
}
