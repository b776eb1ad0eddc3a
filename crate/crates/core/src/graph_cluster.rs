//! Graph clustering as `max_X sum_ij w_ij X_ij` over equivalence relations `X`.
//!
//! Two local weightings of a graph with weights `a` and total weight `2M`:
//!
//! * deviation to independence (Newman-Girvan modularity):
//!   `w_ij = a_ij / 2M - a_i. a_.j / (2M)^2`
//! * deviation to indetermination:
//!   `w_ij = a_ij - a_i. / n - a_.j / n + 2M / n^2`
//!
//! Both sum to zero over all pairs, so the single-class partition scores 0.
//! The diagonal enters every partition's score identically (`X_ii = 1`), so
//! dropping it shifts scores by a constant and leaves maximizers unchanged.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::association::{relational_encode, RelationalMatrix};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;

/// Undirected graph with a symmetric nonnegative weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    a: Matrix,
    two_m: f64,
}

impl WeightedGraph {
    pub fn from_matrix(a: Matrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(CoreError::DimensionMismatch(format!(
                "adjacency must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        for i in 0..n {
            for j in 0..n {
                let x = a.get(i, j);
                if x < 0.0 {
                    return Err(CoreError::InvalidMatrix(format!("negative weight {x} at ({}, {})", i + 1, j + 1)));
                }
                if x != a.get(j, i) {
                    return Err(CoreError::InvalidMatrix(format!(
                        "weights at ({}, {}) and ({}, {}) differ",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        let two_m = a.total();
        if !(two_m > 0.0) {
            return Err(CoreError::DegenerateInput("graph has no weight".into()));
        }
        Ok(Self { a, two_m })
    }

    /// Builds from an undirected edge list, each edge listed once (zero-based).
    /// Repeated edges accumulate; a self-loop `(i, i, w)` adds `w` to `a_ii`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::InvalidArgument("graph needs at least one vertex".into()));
        }
        let mut a = Matrix::zeros(n, n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(CoreError::InvalidArgument(format!("edge ({}, {}) outside {n} vertices", i + 1, j + 1)));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(CoreError::InvalidMatrix(format!("edge weight {w}")));
            }
            a.set(i, j, a.get(i, j) + w);
            if i != j {
                a.set(j, i, a.get(j, i) + w);
            }
        }
        Self::from_matrix(a)
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn two_m(&self) -> f64 {
        self.two_m
    }

    pub fn weights(&self) -> &Matrix {
        &self.a
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.a.row_sums()
    }
}

/// Pairwise gains `w_ij` of putting `i` and `j` in the same class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalWeights {
    w: Matrix,
}

impl LocalWeights {
    pub fn from_matrix(w: Matrix) -> Result<Self> {
        if w.rows() != w.cols() {
            return Err(CoreError::DimensionMismatch("local weights must be square".into()));
        }
        Ok(Self { w })
    }

    pub fn n(&self) -> usize {
        self.w.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w.get(i, j)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    pub fn total(&self) -> f64 {
        self.w.total()
    }

    pub fn diagonal_sum(&self) -> f64 {
        (0..self.n()).map(|i| self.w.get(i, i)).sum()
    }

    /// Same weights with the diagonal set to zero.
    pub fn without_diagonal(&self) -> Self {
        let mut w = self.w.clone();
        for i in 0..w.rows() {
            w.set(i, i, 0.0);
        }
        Self { w }
    }
}

/// Which null model the local weights deviate from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Independence,
    Indetermination,
}

impl Criterion {
    pub fn local_weights(self, g: &WeightedGraph) -> LocalWeights {
        match self {
            Criterion::Independence => local_weights_independence(g),
            Criterion::Indetermination => local_weights_indetermination(g),
        }
    }
}

/// `a_ij / 2M - a_i. a_.j / (2M)^2`.
pub fn local_weights_independence(g: &WeightedGraph) -> LocalWeights {
    let d = g.degrees();
    let m2 = g.two_m();
    let w = Matrix::from_fn(g.n(), g.n(), |i, j| g.a.get(i, j) / m2 - d[i] * d[j] / (m2 * m2));
    LocalWeights { w }
}

/// `a_ij - a_i. / n - a_.j / n + 2M / n^2`.
pub fn local_weights_indetermination(g: &WeightedGraph) -> LocalWeights {
    let d = g.degrees();
    let n = g.n() as f64;
    let shift = g.two_m() / (n * n);
    let w = Matrix::from_fn(g.n(), g.n(), |i, j| g.a.get(i, j) - d[i] / n - d[j] / n + shift);
    LocalWeights { w }
}

/// Class labels over `n` items, canonicalized to first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    pub fn from_labels<L: Eq + std::hash::Hash + Clone>(labels: &[L]) -> Self {
        let mut seen = std::collections::HashMap::new();
        let labels = labels
            .iter()
            .map(|l| {
                let next = seen.len();
                *seen.entry(l.clone()).or_insert(next)
            })
            .collect();
        Self { labels }
    }

    pub fn singletons(n: usize) -> Self {
        Self { labels: (0..n).collect() }
    }

    pub fn single_class(n: usize) -> Self {
        Self { labels: vec![0; n] }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count()];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn relation(&self) -> RelationalMatrix {
        relational_encode(&self.labels).expect("partition has at least one item")
    }
}

impl From<Vec<usize>> for Partition {
    fn from(labels: Vec<usize>) -> Self {
        Partition::from_labels(&labels)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}

/// `sum_ij w_ij X_ij`, including `i = j`.
pub fn global_score(w: &LocalWeights, part: &Partition) -> Result<f64> {
    if w.n() != part.n() {
        return Err(CoreError::DimensionMismatch(format!(
            "{} weights for a partition of {} items",
            w.n(),
            part.n()
        )));
    }
    Ok(score_of(w.matrix(), part.labels()))
}

fn score_of(w: &Matrix, labels: &[usize]) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for i in 0..n {
        let row = w.row(i);
        for j in 0..n {
            if labels[i] == labels[j] {
                total += row[j];
            }
        }
    }
    total
}

/// Outcome of a Louvain run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LouvainReport {
    pub partition: Partition,
    pub score: f64,
    /// Aggregation levels performed.
    pub passes: usize,
    /// Score after the start and after every accepted move.
    pub history: Vec<f64>,
}

/// Greedy multilevel maximization of [`global_score`].
///
/// Each pass runs single-node moves to convergence (node order shuffled by
/// the seed, gain ties resolved toward the smallest class label) and then
/// merges classes into super-nodes. A final sweep over the original vertices
/// leaves the result locally optimal under single-vertex relocation.
pub fn louvain(w: &LocalWeights, seed: u64, max_passes: usize) -> Result<LouvainReport> {
    if max_passes == 0 {
        return Err(CoreError::InvalidArgument("max_passes must be at least 1".into()));
    }
    let n = w.n();
    if n == 0 {
        return Err(CoreError::InvalidArgument("empty weight matrix".into()));
    }
    let eps = 1e-12 * w.matrix().max_abs().max(f64::MIN_POSITIVE) * n as f64;
    let mut rng = stream_rng(seed, 0);

    let mut membership: Vec<usize> = (0..n).collect();
    let mut score = score_of(w.matrix(), &membership);
    let mut history = vec![score];
    let mut level = w.matrix().clone();
    let mut super_of: Vec<usize> = (0..n).collect();
    let mut passes = 0;

    while passes < max_passes {
        passes += 1;
        let m = level.rows();
        let mut assign: Vec<usize> = (0..m).collect();
        let moved = local_moves(&level, &mut assign, eps, &mut rng, &mut score, &mut history);
        if !moved {
            break;
        }
        let (compact, k) = compact_labels(&assign);
        for s in super_of.iter_mut() {
            *s = compact[*s];
        }
        membership.clone_from(&super_of);
        if k == m {
            break;
        }
        level = aggregate(&level, &compact, k);
    }

    local_moves(w.matrix(), &mut membership, eps, &mut rng, &mut score, &mut history);
    let partition = Partition::from_labels(&membership);
    let score = score_of(w.matrix(), partition.labels());
    Ok(LouvainReport {
        partition,
        score,
        passes,
        history,
    })
}

/// Runs single-node moves on `w` until none improves; returns whether any moved.
fn local_moves(
    w: &Matrix,
    assign: &mut [usize],
    eps: f64,
    rng: &mut impl rand::Rng,
    score: &mut f64,
    history: &mut Vec<f64>,
) -> bool {
    let m = w.rows();
    let mut size = vec![0usize; m];
    for &c in assign.iter() {
        size[c] += 1;
    }
    let mut link = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    let mut any = false;
    loop {
        order.shuffle(rng);
        let mut moved = false;
        for &i in &order {
            link.iter_mut().for_each(|x| *x = 0.0);
            for (j, &wij) in w.row(i).iter().enumerate() {
                if j != i {
                    link[assign[j]] += wij;
                }
            }
            let cur = assign[i];
            let mut best = cur;
            let mut best_gain = 0.0;
            let mut empty_seen = false;
            for c in 0..m {
                if c == cur {
                    continue;
                }
                if size[c] == 0 {
                    // Only the smallest empty label is a distinct option, and
                    // it is a no-op for a node already alone in its class.
                    if empty_seen || size[cur] == 1 {
                        continue;
                    }
                    empty_seen = true;
                }
                let gain = 2.0 * (link[c] - link[cur]);
                if gain > best_gain + eps {
                    best = c;
                    best_gain = gain;
                }
            }
            if best != cur {
                size[cur] -= 1;
                size[best] += 1;
                assign[i] = best;
                *score += best_gain;
                history.push(*score);
                moved = true;
                any = true;
            }
        }
        if !moved {
            return any;
        }
    }
}

fn compact_labels(assign: &[usize]) -> (Vec<usize>, usize) {
    let mut map = vec![usize::MAX; assign.len()];
    let mut next = 0;
    let compact = assign
        .iter()
        .map(|&c| {
            if map[c] == usize::MAX {
                map[c] = next;
                next += 1;
            }
            map[c]
        })
        .collect();
    (compact, next)
}

fn aggregate(w: &Matrix, compact: &[usize], k: usize) -> Matrix {
    let mut out = Matrix::zeros(k, k);
    for i in 0..w.rows() {
        for (j, &wij) in w.row(i).iter().enumerate() {
            let (a, b) = (compact[i], compact[j]);
            out.set(a, b, out.get(a, b) + wij);
        }
    }
    out
}

/// Default enumeration limit of [`brute_force_best`] (Bell(10) = 115975).
pub const BRUTE_FORCE_MAX: usize = 10;

/// Exact maximizer of [`global_score`] by enumerating all set partitions.
pub fn brute_force_best(w: &LocalWeights, n_max: usize) -> Result<(Partition, f64)> {
    let n = w.n();
    if n > n_max {
        return Err(CoreError::SizeExceeded { n, max: n_max });
    }
    if n == 0 {
        return Err(CoreError::InvalidArgument("empty weight matrix".into()));
    }
    let mut labels = vec![0usize; n];
    let mut best_labels = labels.clone();
    let mut best = f64::NEG_INFINITY;
    fn recurse(
        w: &Matrix,
        i: usize,
        classes: usize,
        acc: f64,
        labels: &mut [usize],
        best: &mut f64,
        best_labels: &mut [usize],
    ) {
        let n = labels.len();
        if i == n {
            if acc > *best {
                *best = acc;
                best_labels.copy_from_slice(labels);
            }
            return;
        }
        for c in 0..=classes {
            let mut add = w.get(i, i);
            for j in 0..i {
                if labels[j] == c {
                    add += w.get(i, j) + w.get(j, i);
                }
            }
            labels[i] = c;
            recurse(w, i + 1, classes.max(c + 1), acc + add, labels, best, best_labels);
        }
    }
    recurse(w.matrix(), 0, 0, 0.0, &mut labels, &mut best, &mut best_labels);
    Ok((Partition::from_labels(&best_labels), best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn triangles() -> WeightedGraph {
        WeightedGraph::from_edges(
            6,
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn independence_weights_by_hand() {
        let w = local_weights_independence(&triangles());
        assert_abs_diff_eq!(w.get(0, 1), 1.0 / 18.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.get(0, 3), -4.0 / 144.0, epsilon = 1e-15);
        let edge = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert_abs_diff_eq!(local_weights_independence(&edge).get(0, 1), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn indetermination_weights_by_hand() {
        let w = local_weights_indetermination(&triangles());
        assert_abs_diff_eq!(w.get(0, 1), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.get(0, 3), -1.0 / 3.0, epsilon = 1e-15);
        let edge = WeightedGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap();
        assert_abs_diff_eq!(local_weights_indetermination(&edge).get(0, 1), 0.5, epsilon = 1e-15);
        let flat = WeightedGraph::from_matrix(Matrix::from_fn(3, 3, |_, _| 0.5)).unwrap();
        assert!(local_weights_indetermination(&flat).matrix().max_abs() < 1e-15);
    }

    #[test]
    fn scores_of_trivial_partitions() {
        let w = local_weights_independence(&triangles());
        assert_abs_diff_eq!(global_score(&w, &Partition::single_class(6)).unwrap(), w.total(), epsilon = 1e-15);
        assert_abs_diff_eq!(w.total(), 0.0, epsilon = 1e-15);
        let nd = w.without_diagonal();
        assert_eq!(global_score(&nd, &Partition::singletons(6)).unwrap(), 0.0);
        assert!(global_score(&w, &Partition::singletons(3)).is_err());
    }

    #[test]
    fn triangle_partition_scores() {
        let part = Partition::from_labels(&[0, 0, 0, 1, 1, 1]);
        let wx = local_weights_independence(&triangles());
        assert_abs_diff_eq!(global_score(&wx, &part).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(global_score(&wx.without_diagonal(), &part).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        let wp = local_weights_indetermination(&triangles());
        assert_abs_diff_eq!(global_score(&wp, &part).unwrap(), 6.0, epsilon = 1e-14);
    }

    #[test]
    fn louvain_finds_triangles() {
        let part = Partition::from_labels(&[0, 0, 0, 1, 1, 1]);
        for criterion in [Criterion::Independence, Criterion::Indetermination] {
            let w = criterion.local_weights(&triangles());
            for seed in 0..5 {
                let report = louvain(&w, seed, 10).unwrap();
                assert_eq!(report.partition, part, "{criterion:?} seed {seed}");
                assert!(report.history.windows(2).all(|h| h[1] >= h[0]));
            }
        }
        assert!(louvain(&local_weights_independence(&triangles()), 0, 0).is_err());
    }

    #[test]
    fn complete_graph_stays_whole() {
        let edges: Vec<_> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j, 1.0))).collect();
        let w = local_weights_independence(&WeightedGraph::from_edges(4, &edges).unwrap());
        let (best, score) = brute_force_best(&w, 10).unwrap();
        assert_eq!(best, Partition::single_class(4));
        let report = louvain(&w, 3, 10).unwrap();
        assert_eq!(report.partition, Partition::single_class(4));
        assert_abs_diff_eq!(report.score, score, epsilon = 1e-15);
    }

    #[test]
    fn brute_force_limits_and_single_vertex() {
        let w = LocalWeights::from_matrix(Matrix::from_rows(vec![vec![-0.3]]).unwrap()).unwrap();
        let (p, s) = brute_force_best(&w, 10).unwrap();
        assert_eq!(p.labels(), &[0]);
        assert_eq!(s, -0.3);
        let big = LocalWeights::from_matrix(Matrix::zeros(11, 11)).unwrap();
        assert!(matches!(brute_force_best(&big, 10), Err(CoreError::SizeExceeded { n: 11, max: 10 })));
    }

    #[test]
    fn graph_validation() {
        assert!(WeightedGraph::from_edges(2, &[(0, 2, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, &[]).is_err());
        assert!(WeightedGraph::from_matrix(Matrix::from_rows(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap()).is_err());
        let loop_only = WeightedGraph::from_edges(1, &[(0, 0, 2.0)]).unwrap();
        assert_eq!(loop_only.two_m(), 2.0);
    }

    #[test]
    fn partition_canonicalizes_and_encodes_an_equivalence() {
        let p = Partition::from_labels(&["b", "a", "b", "c"]);
        assert_eq!(p.labels(), &[0, 1, 0, 2]);
        assert_eq!(p.class_count(), 3);
        let x = p.relation();
        assert!(x.is_reflexive() && x.is_symmetric() && x.is_transitive());
    }
}
