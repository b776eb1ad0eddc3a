//! Exact sampling from an indetermination coupling.
//!
//! With rows sorted by increasing margin, the coupling decomposes as
//! `pi[u][v] = first_line[v] + delta[u] / q`, where `first_line` is the row of
//! the smallest margin `mu_min` and `delta[u] = mu[u] - mu_min`. A pair is then
//! drawn in three steps:
//!
//! 1. `u ~ mu`;
//! 2. `I ~ Bernoulli(delta[u] / mu[u])`;
//! 3. `v ~ first_line / mu_min` if `I = 0`, else `v ~ uniform(q)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{check_condition_h, condition_h_lhs, JointDistribution, Margin};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::rng::{cumulative, pick_cumulative, stream_rng, GENERATOR_VERSION};
use crate::tolerance::SUM_TOL;

/// First line plus per-row increments of an indetermination coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndetDecomposition {
    /// Original row indices ordered by ascending margin (stable on ties).
    pub sort_permutation: Vec<usize>,
    /// Row of the smallest margin; sums to `min(mu)`.
    pub first_line: Vec<f64>,
    /// `mu_sorted[k] - mu_sorted[0]`, indexed by sorted position.
    pub deltas: Vec<f64>,
    rank_of: Vec<usize>,
}

impl IndetDecomposition {
    pub fn rows(&self) -> usize {
        self.deltas.len()
    }

    pub fn cols(&self) -> usize {
        self.first_line.len()
    }

    pub fn min_margin(&self) -> f64 {
        self.first_line.iter().sum()
    }

    /// Increment of original row `u`.
    pub fn delta_of(&self, u: usize) -> f64 {
        self.deltas[self.rank_of[u]]
    }

    /// `first_line[v] + delta[u]/q`, in original labels.
    pub fn reconstruct(&self) -> Matrix {
        let q = self.cols() as f64;
        Matrix::from_fn(self.rows(), self.cols(), |u, v| self.first_line[v] + self.delta_of(u) / q)
    }

    /// Law of `V` given `U = u` under the three-step procedure.
    ///
    /// When the smallest margin is zero the first-line branch has probability
    /// zero for every reachable row; its conditional is taken as uniform.
    pub fn conditional(&self, mu: &Margin, u: usize) -> Vec<f64> {
        let q = self.cols();
        let uniform = 1.0 / q as f64;
        let mu_u = mu.get(u);
        if mu_u <= 0.0 {
            return vec![uniform; q];
        }
        let switch = self.delta_of(u) / mu_u;
        let base = self.first_line_conditional();
        base.iter().map(|b| (1.0 - switch) * b + switch * uniform).collect()
    }

    /// `first_line / min(mu)`, or uniform when `min(mu) = 0`.
    pub fn first_line_conditional(&self) -> Vec<f64> {
        let mass = self.min_margin();
        if mass > 0.0 {
            self.first_line.iter().map(|x| x / mass).collect()
        } else {
            vec![1.0 / self.cols() as f64; self.cols()]
        }
    }
}

/// Decomposes the indetermination coupling of `(mu, nu)`.
pub fn decompose(mu: &Margin, nu: &Margin) -> Result<IndetDecomposition> {
    if !check_condition_h(mu, nu) {
        return Err(CoreError::ConditionHViolation {
            lhs: condition_h_lhs(mu, nu),
        });
    }
    let (p, q) = (mu.len(), nu.len());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| mu.get(a).total_cmp(&mu.get(b)));
    let mut rank_of = vec![0; p];
    for (rank, &u) in order.iter().enumerate() {
        rank_of[u] = rank;
    }
    let mu_min = mu.get(order[0]);
    let (pf, qf) = (p as f64, q as f64);
    let first_line = nu
        .weights()
        .iter()
        .map(|n| (mu_min / qf + n / pf - 1.0 / (pf * qf)).max(0.0))
        .collect();
    let deltas = order.iter().map(|&u| mu.get(u) - mu_min).collect();
    Ok(IndetDecomposition {
        sort_permutation: order,
        first_line,
        deltas,
        rank_of,
    })
}

/// Drawn `(u, v)` pairs (zero-based) with the seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub pairs: Vec<(usize, usize)>,
    pub seed: u64,
    pub count: usize,
    pub generator_version: String,
}

/// Draws `n` pairs from the coupling described by `dec`.
///
/// `mu` must be the row margin the decomposition was built from.
pub fn draw(dec: &IndetDecomposition, mu: &Margin, n: usize, seed: u64) -> Result<SampleBatch> {
    draw_stream(dec, mu, n, seed, 0)
}

/// As [`draw`], on an explicit stream of the seed. Parallel batches must use
/// distinct stream indices.
pub fn draw_stream(
    dec: &IndetDecomposition,
    mu: &Margin,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<SampleBatch> {
    if mu.len() != dec.rows() {
        return Err(CoreError::DimensionMismatch(format!(
            "margin of length {} for a decomposition with {} rows",
            mu.len(),
            dec.rows()
        )));
    }
    let mu_min = mu.get(dec.sort_permutation[0]);
    for u in 0..mu.len() {
        if (mu.get(u) - mu_min - dec.delta_of(u)).abs() > SUM_TOL {
            return Err(CoreError::InvalidArgument(
                "margin does not match the decomposition".into(),
            ));
        }
    }

    let q = dec.cols();
    let row_cdf = cumulative(mu.weights());
    let row_total = *row_cdf.last().expect("nonempty margin");
    let line_cdf = cumulative(&dec.first_line_conditional());
    let line_total = *line_cdf.last().expect("nonempty line");
    let switch: Vec<f64> = (0..mu.len())
        .map(|u| if mu.get(u) > 0.0 { dec.delta_of(u) / mu.get(u) } else { 1.0 })
        .collect();

    let mut rng = stream_rng(seed, stream);
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let u = pick_cumulative(&row_cdf, rng.gen::<f64>() * row_total);
        let uniform_branch = rng.gen::<f64>() < switch[u];
        let v = if uniform_branch {
            rng.gen_range(0..q)
        } else {
            pick_cumulative(&line_cdf, rng.gen::<f64>() * line_total)
        };
        pairs.push((u, v));
    }
    Ok(SampleBatch {
        pairs,
        seed,
        count: n,
        generator_version: GENERATOR_VERSION.to_string(),
    })
}

/// Occurrence counts of a batch on a `p x q` grid.
pub fn histogram(batch: &SampleBatch, p: usize, q: usize) -> Result<Matrix> {
    let mut counts = Matrix::zeros(p, q);
    for &(u, v) in &batch.pairs {
        if u >= p || v >= q {
            return Err(CoreError::DimensionMismatch(format!(
                "pair ({}, {}) outside a {p}x{q} grid",
                u + 1,
                v + 1
            )));
        }
        counts.set(u, v, counts.get(u, v) + 1.0);
    }
    Ok(counts)
}

/// Empirical joint law `n_uv / n` of a batch.
pub fn empirical_joint(batch: &SampleBatch, p: usize, q: usize) -> Result<JointDistribution> {
    if batch.pairs.is_empty() {
        return Err(CoreError::DegenerateInput("empty sample batch".into()));
    }
    JointDistribution::from_counts(&histogram(batch, p, q)?)
}
