//! Shared brute-force reference implementations for the test suites. Each
//! oracle deliberately takes a different computational route than the
//! library code it checks.

#![allow(dead_code)]

use rsif::{ColumnValues, Dataset, FeatureColumn, FeatureKind};

/// Minimum warping-path cost by exhaustive recursion over all monotone
/// paths. Feasible for sequence lengths up to ~8.
pub fn dtw_brute(a: &[f64], b: &[f64]) -> f64 {
    fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
        let cost = (a[i] - b[j]).abs();
        if i + 1 == a.len() && j + 1 == b.len() {
            return cost;
        }
        let mut best = f64::INFINITY;
        if i + 1 < a.len() {
            best = best.min(go(a, b, i + 1, j));
        }
        if j + 1 < b.len() {
            best = best.min(go(a, b, i, j + 1));
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            best = best.min(go(a, b, i + 1, j + 1));
        }
        cost + best
    }
    go(a, b, 0, 0)
}

/// Optimal transport cost between two weighted point sets whose masses are
/// integer multiples of `1/denom`, found by exhaustive enumeration of all
/// integer transport plans. Because the margins are integral, the optimum
/// of the continuous transport LP is attained at an integral plan, so this
/// equals the LP optimum.
pub fn transport_lp_brute(
    positions_a: &[f64],
    units_a: &[u32],
    positions_b: &[f64],
    units_b: &[u32],
    denom: u32,
) -> f64 {
    assert_eq!(units_a.iter().sum::<u32>(), denom);
    assert_eq!(units_b.iter().sum::<u32>(), denom);

    fn enumerate(
        positions_a: &[f64],
        positions_b: &[f64],
        row_rem: &mut [u32],
        col_rem: &mut [u32],
        cell: (usize, usize),
        cost: f64,
        best: &mut f64,
    ) {
        let (i, j) = cell;
        if cost >= *best {
            return;
        }
        if i == row_rem.len() {
            *best = cost;
            return;
        }
        let unit = (positions_a[i] - positions_b[j]).abs();
        if j + 1 == col_rem.len() {
            // last column: the rest of this row's mass is forced here
            let x = row_rem[i];
            if x <= col_rem[j] {
                row_rem[i] = 0;
                col_rem[j] -= x;
                enumerate(
                    positions_a,
                    positions_b,
                    row_rem,
                    col_rem,
                    (i + 1, 0),
                    cost + x as f64 * unit,
                    best,
                );
                row_rem[i] = x;
                col_rem[j] += x;
            }
            return;
        }
        for x in 0..=row_rem[i].min(col_rem[j]) {
            row_rem[i] -= x;
            col_rem[j] -= x;
            enumerate(
                positions_a,
                positions_b,
                row_rem,
                col_rem,
                (i, j + 1),
                cost + x as f64 * unit,
                best,
            );
            row_rem[i] += x;
            col_rem[j] += x;
        }
    }

    let mut row_rem = units_a.to_vec();
    let mut col_rem = units_b.to_vec();
    let mut best = f64::INFINITY;
    enumerate(
        positions_a,
        positions_b,
        &mut row_rem,
        &mut col_rem,
        (0, 0),
        0.0,
        &mut best,
    );
    best / denom as f64
}

/// Average precision by pairwise rank counting: the rank of each example
/// is derived by counting dominating examples instead of sorting, and
/// precision at each positive's rank is recounted from scratch.
pub fn average_precision_reference(labels: &[bool], scores: &[f64]) -> f64 {
    let n = labels.len();
    let rank = |i: usize| -> usize {
        1 + (0..n)
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
            .count()
    };
    let num_pos = labels.iter().filter(|&&l| l).count();
    let mut total = 0.0;
    for i in 0..n {
        if !labels[i] {
            continue;
        }
        let r = rank(i);
        let hits = (0..n).filter(|&j| labels[j] && rank(j) <= r).count();
        total += hits as f64 / r as f64;
    }
    total / num_pos as f64
}

/// AUC by direct enumeration of all positive-negative pairs.
pub fn roc_auc_reference(labels: &[bool], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0u64;
    for i in 0..labels.len() {
        if !labels[i] {
            continue;
        }
        for j in 0..labels.len() {
            if labels[j] {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs as f64
}

/// Jensen-Shannon divergence between two degree multisets, evaluated over
/// explicit probability vectors indexed by degree.
pub fn jsd_degree_reference(degrees_a: &[usize], degrees_b: &[usize]) -> f64 {
    let max = degrees_a
        .iter()
        .chain(degrees_b)
        .copied()
        .max()
        .unwrap_or(0);
    let to_probs = |degrees: &[usize]| -> Vec<f64> {
        let mut p = vec![0.0; max + 1];
        for &d in degrees {
            p[d] += 1.0 / degrees.len() as f64;
        }
        p
    };
    let p = to_probs(degrees_a);
    let q = to_probs(degrees_b);
    let kl = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .filter(|(xi, _)| **xi > 0.0)
            .map(|(xi, yi)| xi * (xi / yi).log2())
            .sum()
    };
    let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * kl(&p, &m) + 0.5 * kl(&q, &m)
}

/// Splits a single `vector` column into one `numeric` column per dimension
/// (ids `x0`, `x1`, ...), keeping labels. Used to compare against detectors
/// that operate on scalar features.
pub fn split_vector_column(dataset: &Dataset, column_id: &str) -> Dataset {
    let column = dataset.column(column_id).expect("column exists");
    let ColumnValues::Vector { dim, rows } = &column.values else {
        panic!("{column_id} is not a vector column");
    };
    let columns = (0..*dim)
        .map(|d| {
            FeatureColumn::new(
                format!("x{d}"),
                FeatureKind::Numeric,
                ColumnValues::Vector {
                    dim: 1,
                    rows: rows.iter().map(|r| vec![r[d]]).collect(),
                },
            )
        })
        .collect();
    Dataset::new(
        dataset.name(),
        columns,
        dataset.labels().map(<[bool]>::to_vec),
    )
    .unwrap()
}

/// Extracts the rows of the named numeric columns as a plain matrix.
pub fn numeric_matrix(dataset: &Dataset, ids: &[&str]) -> Vec<Vec<f64>> {
    let cols: Vec<&FeatureColumn> = ids
        .iter()
        .map(|id| dataset.column(id).expect("column exists"))
        .collect();
    (0..dataset.n())
        .map(|i| {
            cols.iter()
                .map(|c| match &c.values {
                    ColumnValues::Vector { rows, .. } => rows[i][0],
                    _ => panic!("not numeric"),
                })
                .collect()
        })
        .collect()
}

/// A plain axis-aligned isolation forest over numeric rows, written
/// independently of the library: random non-constant feature, uniform
/// threshold within its range, same subsampling and scoring conventions.
pub mod ref_iforest {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EULER_MASCHERONI: f64 = 0.5772156649;

    fn c(size: usize) -> f64 {
        match size {
            0 | 1 => 0.0,
            2 => 1.0,
            s => {
                let s = s as f64;
                2.0 * ((s - 1.0).ln() + EULER_MASCHERONI) - 2.0 * (s - 1.0) / s
            }
        }
    }

    fn ceil_log2(x: usize) -> usize {
        if x <= 1 {
            0
        } else {
            (usize::BITS - (x - 1).leading_zeros()) as usize
        }
    }

    enum Node {
        Leaf {
            size: usize,
            depth: usize,
        },
        Split {
            feature: usize,
            threshold: f64,
            left: Box<Node>,
            right: Box<Node>,
        },
    }

    pub struct RefForest {
        trees: Vec<Node>,
        c_norm: f64,
    }

    pub fn fit(rows: &[Vec<f64>], trees: usize, subsample: usize, seed: u64) -> RefForest {
        let n = rows.len();
        let psi = subsample.min(n);
        let max_depth = ceil_log2(psi);
        let built = (0..trees)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1 + i as u64);
                let mut idx = rand::seq::index::sample(&mut rng, n, psi).into_vec();
                idx.sort_unstable();
                grow(rows, idx, 0, max_depth, &mut rng)
            })
            .collect();
        RefForest {
            trees: built,
            c_norm: c(psi),
        }
    }

    fn grow(
        rows: &[Vec<f64>],
        idx: Vec<usize>,
        depth: usize,
        max_depth: usize,
        rng: &mut ChaCha8Rng,
    ) -> Node {
        if idx.len() <= 1 || depth >= max_depth {
            return Node::Leaf {
                size: idx.len(),
                depth,
            };
        }
        let dims = rows[0].len();
        let range = |f: usize| -> (f64, f64) {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in &idx {
                lo = lo.min(rows[i][f]);
                hi = hi.max(rows[i][f]);
            }
            (lo, hi)
        };
        let usable: Vec<usize> = (0..dims)
            .filter(|&f| {
                let (lo, hi) = range(f);
                hi > lo
            })
            .collect();
        if usable.is_empty() {
            return Node::Leaf {
                size: idx.len(),
                depth,
            };
        }
        let feature = usable[rng.gen_range(0..usable.len())];
        let (lo, hi) = range(feature);
        let threshold = rng.gen_range(lo..hi);
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| rows[i][feature] <= threshold);
        Node::Split {
            feature,
            threshold,
            left: Box::new(grow(rows, left_idx, depth + 1, max_depth, rng)),
            right: Box::new(grow(rows, right_idx, depth + 1, max_depth, rng)),
        }
    }

    fn path(node: &Node, row: &[f64]) -> f64 {
        match node {
            Node::Leaf { size, depth } => *depth as f64 + c(*size),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    path(left, row)
                } else {
                    path(right, row)
                }
            }
        }
    }

    impl RefForest {
        pub fn score(&self, row: &[f64]) -> f64 {
            let mean: f64 =
                self.trees.iter().map(|t| path(t, row)).sum::<f64>() / self.trees.len() as f64;
            2.0_f64.powf(-mean / self.c_norm)
        }
    }
}
