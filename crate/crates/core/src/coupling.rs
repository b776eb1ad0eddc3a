//! The two canonical couplings of a pair of discrete margins.
//!
//! Given margins `mu` (length `p`) and `nu` (length `q`), the independence
//! coupling `mu[u] * nu[v]` is the Kullback-Leibler projection of the uniform
//! law onto the set of joint laws with those margins, and the indetermination
//! coupling `mu[u]/q + nu[v]/p - 1/(pq)` is its least-squares projection. The
//! latter is a probability table only when `p*min(mu) + q*min(nu) >= 1`
//! (condition (H)); otherwise it is still the unconstrained L2 optimum and is
//! returned as a [`SignedCouplingMatrix`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;
use crate::tolerance::{MARGIN_TOL, MONGE_REL_TOL, NEG_TOL, SUM_TOL};

/// A discrete probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Margin {
    weights: Vec<f64>,
}

impl Margin {
    /// Validates nonnegativity and unit mass (within [`SUM_TOL`]).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(CoreError::InvalidMargin("margin must have at least one entry".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(CoreError::InvalidMargin(format!("entry {} is {w}", i + 1)));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(CoreError::InvalidMargin(format!("entries sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Rescales nonnegative weights (counts, unnormalized masses) to unit mass.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(CoreError::InvalidMargin(format!(
                "cannot normalize weights with total {total}"
            )));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform margin needs at least one category");
        Self {
            weights: vec![1.0 / len as f64; len],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// Always false: a margin has at least one category.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn squared_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    pub fn is_uniform(&self) -> bool {
        let target = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - target).abs() <= SUM_TOL)
    }
}

impl TryFrom<Vec<f64>> for Margin {
    type Error = CoreError;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Margin::new(weights)
    }
}

impl From<Margin> for Vec<f64> {
    fn from(m: Margin) -> Self {
        m.weights
    }
}

/// A `p x q` probability table with its margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRepr", into = "JointRepr")]
pub struct JointDistribution {
    cells: Matrix,
    row_margin: Margin,
    col_margin: Margin,
}

#[derive(Serialize, Deserialize)]
struct JointRepr {
    cells: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    row_margin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    col_margin: Option<Vec<f64>>,
}

impl TryFrom<JointRepr> for JointDistribution {
    type Error = CoreError;

    fn try_from(repr: JointRepr) -> Result<Self> {
        if let (Some(row), Some(col)) = (&repr.row_margin, &repr.col_margin) {
            return JointDistribution::with_margins(repr.cells, Margin::new(row.clone())?, Margin::new(col.clone())?);
        }
        let joint = JointDistribution::new(repr.cells)?;
        for (name, given, computed) in [
            ("row", repr.row_margin, joint.row_margin.weights()),
            ("column", repr.col_margin, joint.col_margin.weights()),
        ] {
            if let Some(given) = given {
                check_margin_agreement(name, &given, computed)?;
            }
        }
        Ok(joint)
    }
}

impl From<JointDistribution> for JointRepr {
    fn from(j: JointDistribution) -> Self {
        JointRepr {
            cells: j.cells,
            row_margin: Some(j.row_margin.into()),
            col_margin: Some(j.col_margin.into()),
        }
    }
}

fn check_margin_agreement(name: &str, expected: &[f64], actual: &[f64]) -> Result<()> {
    if expected.len() != actual.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "{name} margin has {} entries, table has {}",
            expected.len(),
            actual.len()
        )));
    }
    for (i, (e, a)) in expected.iter().zip(actual).enumerate() {
        if (e - a).abs() > MARGIN_TOL {
            return Err(CoreError::InvalidMatrix(format!(
                "{name} sum {} is {a}, margin says {e}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Clamps cells in `[-NEG_TOL, 0)` to zero and rejects anything lower.
fn clamp_rounding_negatives(cells: &mut Matrix) -> Result<()> {
    for x in cells.as_mut_slice() {
        if *x < -NEG_TOL {
            return Err(CoreError::InvalidMatrix(format!("negative cell {x}")));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    Ok(())
}

impl JointDistribution {
    /// Builds a joint law from cells, deriving its margins.
    pub fn new(mut cells: Matrix) -> Result<Self> {
        clamp_rounding_negatives(&mut cells)?;
        let total = cells.total();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(CoreError::InvalidMatrix(format!("cells sum to {total}, not 1")));
        }
        let row_margin = Margin::new(cells.row_sums())?;
        let col_margin = Margin::new(cells.col_sums())?;
        Ok(Self {
            cells,
            row_margin,
            col_margin,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// Builds a joint law that must reproduce the requested margins.
    pub fn with_margins(mut cells: Matrix, row_margin: Margin, col_margin: Margin) -> Result<Self> {
        if cells.rows() != row_margin.len() || cells.cols() != col_margin.len() {
            return Err(CoreError::DimensionMismatch(format!(
                "{}x{} table for margins of length {} and {}",
                cells.rows(),
                cells.cols(),
                row_margin.len(),
                col_margin.len()
            )));
        }
        clamp_rounding_negatives(&mut cells)?;
        let total = cells.total();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(CoreError::InvalidMatrix(format!("cells sum to {total}, not 1")));
        }
        check_margin_agreement("row", row_margin.weights(), &cells.row_sums())?;
        check_margin_agreement("column", col_margin.weights(), &cells.col_sums())?;
        Ok(Self {
            cells,
            row_margin,
            col_margin,
        })
    }

    /// Empirical joint law `n_uv / n` of a table of counts.
    pub fn from_counts(counts: &Matrix) -> Result<Self> {
        let n = counts.total();
        if !(n > 0.0) {
            return Err(CoreError::DegenerateInput("table of counts is empty".into()));
        }
        let cells = Matrix::from_fn(counts.rows(), counts.cols(), |u, v| counts.get(u, v) / n);
        Self::new(cells)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.cells.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cells.cols()
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.cells.get(u, v)
    }

    pub fn cells(&self) -> &Matrix {
        &self.cells
    }

    pub fn row_margin(&self) -> &Margin {
        &self.row_margin
    }

    pub fn col_margin(&self) -> &Margin {
        &self.col_margin
    }

    pub fn into_cells(self) -> Matrix {
        self.cells
    }

    /// `sum_uv pi_uv^2`, the probability that two independent draws coincide.
    pub fn squared_norm(&self) -> f64 {
        self.cells.as_slice().iter().map(|x| x * x).sum()
    }
}

/// The indetermination closed form when it may leave the simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignedCouplingMatrix {
    cells: Matrix,
    feasible: bool,
}

impl SignedCouplingMatrix {
    pub fn cells(&self) -> &Matrix {
        &self.cells
    }

    /// True iff every cell is at least `-1e-12`.
    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    pub fn min_cell(&self) -> f64 {
        self.cells.min()
    }

    pub fn squared_norm(&self) -> f64 {
        self.cells.as_slice().iter().map(|x| x * x).sum()
    }

    /// Converts to a probability table, failing when a cell is negative.
    pub fn into_joint(self, mu: &Margin, nu: &Margin) -> Result<JointDistribution> {
        if !self.feasible {
            return Err(CoreError::ConditionHViolation {
                lhs: condition_h_lhs(mu, nu),
            });
        }
        JointDistribution::with_margins(self.cells, mu.clone(), nu.clone())
    }
}

/// Which canonical coupling to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    Independence,
    Indetermination,
}

impl CouplingKind {
    /// Builds the coupling; indetermination is strict here.
    pub fn couple(self, mu: &Margin, nu: &Margin) -> Result<JointDistribution> {
        match self {
            CouplingKind::Independence => Ok(independence_coupling(mu, nu)),
            CouplingKind::Indetermination => indetermination_coupling(mu, nu),
        }
    }
}

/// `mu[u] * nu[v]`.
pub fn independence_coupling(mu: &Margin, nu: &Margin) -> JointDistribution {
    let cells = Matrix::from_fn(mu.len(), nu.len(), |u, v| mu.get(u) * nu.get(v));
    JointDistribution {
        cells,
        row_margin: mu.clone(),
        col_margin: nu.clone(),
    }
}

/// `mu[u]/q + nu[v]/p - 1/(pq)` without any sign requirement.
pub fn indetermination_signed(mu: &Margin, nu: &Margin) -> SignedCouplingMatrix {
    let (p, q) = (mu.len() as f64, nu.len() as f64);
    let offset = 1.0 / (p * q);
    let cells = Matrix::from_fn(mu.len(), nu.len(), |u, v| mu.get(u) / q + nu.get(v) / p - offset);
    let feasible = cells.min() >= -NEG_TOL;
    SignedCouplingMatrix { cells, feasible }
}

/// The indetermination coupling as a probability table.
///
/// Fails with [`CoreError::ConditionHViolation`] when condition (H) does not hold.
pub fn indetermination_coupling(mu: &Margin, nu: &Margin) -> Result<JointDistribution> {
    if !check_condition_h(mu, nu) {
        return Err(CoreError::ConditionHViolation {
            lhs: condition_h_lhs(mu, nu),
        });
    }
    indetermination_signed(mu, nu).into_joint(mu, nu)
}

/// `p * min(mu) + q * min(nu)`.
pub fn condition_h_lhs(mu: &Margin, nu: &Margin) -> f64 {
    mu.len() as f64 * mu.min() + nu.len() as f64 * nu.min()
}

/// Whether the indetermination coupling of `(mu, nu)` is nonnegative.
pub fn check_condition_h(mu: &Margin, nu: &Margin) -> bool {
    condition_h_lhs(mu, nu) >= 1.0 - NEG_TOL
}

/// `sum pi log(pq pi)`, with `0 log 0 = 0`.
pub fn divergence_kl_to_uniform(pi: &JointDistribution) -> f64 {
    let pq = (pi.rows() * pi.cols()) as f64;
    let d: f64 = pi
        .cells()
        .as_slice()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * (pq * x).ln())
        .sum();
    // Gibbs: only rounding can push this below zero.
    d.max(0.0)
}

/// `pq * sum (pi - 1/pq)^2`, equal to `pq * sum pi^2 - 1`.
pub fn divergence_l2_to_uniform(pi: &JointDistribution) -> f64 {
    let pq = (pi.rows() * pi.cols()) as f64;
    let u = 1.0 / pq;
    pq * pi.cells().as_slice().iter().map(|x| (x - u) * (x - u)).sum::<f64>()
}

/// `sum pi_uv^2`.
pub fn couple_matching_probability(pi: &JointDistribution) -> f64 {
    pi.squared_norm()
}

/// Adjacent-cell test for `c[u][v] + c[u+1][v+1] == c[u+1][v] + c[u][v+1]`.
///
/// The tolerance is relative to the largest absolute cell. Runs in `O(pq)`.
pub fn is_full_monge(cells: &Matrix, rel_tol: f64) -> bool {
    let tol = rel_tol * cells.max_abs();
    for u in 0..cells.rows().saturating_sub(1) {
        for v in 0..cells.cols().saturating_sub(1) {
            let d = cells.get(u, v) + cells.get(u + 1, v + 1)
                - cells.get(u + 1, v)
                - cells.get(u, v + 1);
            if d.abs() > tol {
                return false;
            }
        }
    }
    true
}

/// [`is_full_monge`] at the default tolerance.
pub fn is_full_monge_default(cells: &Matrix) -> bool {
    is_full_monge(cells, MONGE_REL_TOL)
}

/// `c[u.]/q + c[.v]/p - c[..]/(pq)`: the Full-Monge matrix sharing the row and
/// column sums of `cells`. For a probability table this is the indetermination
/// coupling of its own margins.
pub fn indetermination_projection(cells: &Matrix) -> Matrix {
    let (p, q) = (cells.rows() as f64, cells.cols() as f64);
    let rows = cells.row_sums();
    let cols = cells.col_sums();
    let total = cells.total();
    Matrix::from_fn(cells.rows(), cells.cols(), |u, v| rows[u] / q + cols[v] / p - total / (p * q))
}

/// Adds a random margin-preserving perturbation to `pi`.
///
/// The direction is a signed sum of random 2x2 exchanges (`+e` on one
/// diagonal, `-e` on the other), each oriented so that it never takes mass from
/// an empty cell, then rescaled to unit max-norm. The step is `amplitude`,
/// clipped to the largest step keeping every cell nonnegative.
pub fn perturb_coupling(pi: &JointDistribution, seed: u64, amplitude: f64) -> Result<JointDistribution> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(CoreError::InvalidArgument(format!("amplitude must be >= 0, got {amplitude}")));
    }
    let (p, q) = (pi.rows(), pi.cols());
    if amplitude == 0.0 || p < 2 || q < 2 {
        return Ok(pi.clone());
    }

    let mut rng = stream_rng(seed, 0);
    let mut direction = Matrix::zeros(p, q);
    let mut accepted = 0usize;
    for _ in 0..(2 * p * q).max(8) {
        let u1 = rng.gen_range(0..p);
        let u2 = (u1 + rng.gen_range(1..p)) % p;
        let v1 = rng.gen_range(0..q);
        let v2 = (v1 + rng.gen_range(1..q)) % q;
        let size: f64 = rng.gen_range(0.05..1.0);
        let main_diag_has_mass = pi.get(u1, v1) > 0.0 && pi.get(u2, v2) > 0.0;
        let anti_diag_has_mass = pi.get(u1, v2) > 0.0 && pi.get(u2, v1) > 0.0;
        let sign = match (rng.gen_bool(0.5), main_diag_has_mass, anti_diag_has_mass) {
            (true, _, true) | (false, false, true) => 1.0,
            (false, true, _) | (true, true, false) => -1.0,
            _ => continue,
        };
        let e = sign * size;
        for (u, v, s) in [(u1, v1, e), (u2, v2, e), (u1, v2, -e), (u2, v1, -e)] {
            direction.set(u, v, direction.get(u, v) + s);
        }
        accepted += 1;
    }

    let scale = direction.max_abs();
    if accepted == 0 || scale == 0.0 {
        return Err(CoreError::DegenerateInput(
            "no margin-preserving direction keeps every cell nonnegative".into(),
        ));
    }

    let mut step = amplitude / scale;
    for (x, d) in pi.cells().as_slice().iter().zip(direction.as_slice()) {
        if *d < 0.0 {
            step = step.min(x / -d);
        }
    }
    let cells = Matrix::from_fn(p, q, |u, v| pi.get(u, v) + step * direction.get(u, v));
    JointDistribution::with_margins(cells, pi.row_margin().clone(), pi.col_margin().clone())
}

/// Mixes arbitrary margins with uniforms so that condition (H) holds.
///
/// `mu = (1-alpha) r + alpha/p`, `nu = alpha s + (1-alpha)/q`.
pub fn generate_feasible_margins(alpha: f64, r: &Margin, s: &Margin) -> Result<(Margin, Margin)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CoreError::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let (p, q) = (r.len() as f64, s.len() as f64);
    let mu = r.weights().iter().map(|x| (1.0 - alpha) * x + alpha / p).collect();
    let nu = s.weights().iter().map(|x| alpha * x + (1.0 - alpha) / q).collect();
    Ok((Margin::new(mu)?, Margin::new(nu)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn worked_margins() -> (Margin, Margin) {
        (
            Margin::new(vec![9.0 / 27.0, 6.0 / 27.0, 3.0 / 27.0, 9.0 / 27.0]).unwrap(),
            Margin::new(vec![9.0 / 27.0, 13.0 / 27.0, 5.0 / 27.0]).unwrap(),
        )
    }

    #[test]
    fn margin_rejects_bad_input() {
        assert!(Margin::new(vec![]).is_err());
        assert!(Margin::new(vec![0.5, 0.6]).is_err());
        assert!(Margin::new(vec![1.5, -0.5]).is_err());
        assert!(Margin::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Margin::new(vec![1.0, 0.0]).is_ok());
    }

    #[test]
    fn independence_examples() {
        let half = Margin::uniform(2);
        let pi = independence_coupling(&half, &half);
        assert!(pi.cells().as_slice().iter().all(|&x| x == 0.25));

        let (mu, _) = worked_margins();
        let nu = Margin::new(vec![9.0 / 27.0, 13.0 / 27.0, 5.0 / 27.0]).unwrap();
        let mu2 = Margin::new(vec![1.0 / 3.0, 2.0 / 9.0, 1.0 / 9.0, 1.0 / 3.0]).unwrap();
        assert_abs_diff_eq!(independence_coupling(&mu2, &nu).get(2, 2), 5.0 / 243.0, epsilon = 1e-16);
        assert_eq!(independence_coupling(&mu, &nu).row_margin(), &mu);

        let point = Margin::new(vec![1.0, 0.0]).unwrap();
        let pi = independence_coupling(&point, &Margin::new(vec![0.2, 0.3, 0.5]).unwrap());
        assert!(pi.cells().row(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn worked_example_indetermination() {
        let (mu, nu) = worked_margins();
        let pi = indetermination_coupling(&mu, &nu).unwrap();
        let expected = [[3.0, 4.0, 2.0], [2.0, 3.0, 1.0], [1.0, 2.0, 0.0], [3.0, 4.0, 2.0]];
        for (u, row) in expected.iter().enumerate() {
            for (v, x) in row.iter().enumerate() {
                assert_abs_diff_eq!(pi.get(u, v), x / 27.0, epsilon = 1e-15);
            }
        }
        assert!(check_condition_h(&mu, &nu));
    }

    #[test]
    fn uniform_row_margin_collapses_to_independence() {
        let mu = Margin::uniform(3);
        let nu = Margin::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let plus = indetermination_coupling(&mu, &nu).unwrap();
        let times = independence_coupling(&mu, &nu);
        assert!(plus.cells().max_abs_diff(times.cells()).unwrap() < 1e-15);
    }

    #[test]
    fn strict_mode_reports_condition_h() {
        let m = Margin::new(vec![0.9, 0.1]).unwrap();
        assert!(!check_condition_h(&m, &m));
        match indetermination_coupling(&m, &m) {
            Err(CoreError::ConditionHViolation { lhs }) => assert_abs_diff_eq!(lhs, 0.4, epsilon = 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        let signed = indetermination_signed(&m, &m);
        assert!(!signed.is_feasible());
        assert!(signed.min_cell() < 0.0);
        let rows = signed.cells().row_sums();
        assert_abs_diff_eq!(rows[0], 0.9, epsilon = 1e-12);
        assert!(check_condition_h(&Margin::uniform(1), &Margin::uniform(1)));
    }

    #[test]
    fn divergences_on_worked_example() {
        let (mu, nu) = worked_margins();
        let plus = indetermination_coupling(&mu, &nu).unwrap();
        assert_abs_diff_eq!(couple_matching_probability(&plus), 77.0 / 729.0, epsilon = 1e-15);
        assert_abs_diff_eq!(divergence_l2_to_uniform(&plus), 65.0 / 243.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            divergence_l2_to_uniform(&plus),
            12.0 * couple_matching_probability(&plus) - 1.0,
            epsilon = 1e-14
        );

        let times = independence_coupling(&mu, &nu);
        assert_abs_diff_eq!(
            couple_matching_probability(&times),
            (207.0 / 729.0) * (275.0 / 729.0),
            epsilon = 1e-15
        );
        let additive: f64 = mu.weights().iter().map(|m| m * (4.0 * m).ln()).sum::<f64>()
            + nu.weights().iter().map(|n| n * (3.0 * n).ln()).sum::<f64>();
        assert_abs_diff_eq!(divergence_kl_to_uniform(&times), additive, epsilon = 1e-14);

        let uniform = independence_coupling(&Margin::uniform(2), &Margin::uniform(2));
        assert_eq!(divergence_kl_to_uniform(&uniform), 0.0);
        assert_eq!(divergence_l2_to_uniform(&uniform), 0.0);
        assert_eq!(couple_matching_probability(&uniform), 0.25);
    }

    #[test]
    fn full_monge_examples() {
        let fig = Matrix::from_rows(vec![
            vec![3.0, 4.0, 2.0],
            vec![2.0, 3.0, 1.0],
            vec![1.0, 2.0, 0.0],
            vec![3.0, 4.0, 2.0],
        ])
        .unwrap();
        assert!(is_full_monge_default(&fig));
        let id = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(!is_full_monge_default(&id));
        assert!(is_full_monge_default(&Matrix::from_rows(vec![vec![0.2, 0.8]]).unwrap()));
        assert!(fig.max_abs_diff(&indetermination_projection(&fig)).unwrap() < 1e-12);
    }

    #[test]
    fn perturbation_preserves_margins_and_raises_l2() {
        let (mu, nu) = worked_margins();
        let plus = indetermination_coupling(&mu, &nu).unwrap();
        assert_eq!(perturb_coupling(&plus, 3, 0.0).unwrap(), plus);
        let moved = perturb_coupling(&plus, 3, 0.01).unwrap();
        assert!(moved.cells().max_abs_diff(plus.cells()).unwrap() > 0.0);
        for (a, b) in moved.row_margin().weights().iter().zip(mu.weights()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        assert!(moved.get(2, 2) >= 0.0);
        assert!(divergence_l2_to_uniform(&moved) > divergence_l2_to_uniform(&plus));
        assert_eq!(perturb_coupling(&plus, 3, 0.01).unwrap(), moved);
        assert!(perturb_coupling(&plus, 3, -1.0).is_err());
    }

    #[test]
    fn perturbation_of_a_unique_coupling_is_degenerate() {
        let pi = JointDistribution::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(perturb_coupling(&pi, 1, 0.1), Err(CoreError::DegenerateInput(_))));
    }

    #[test]
    fn feasible_margin_generator_endpoints() {
        let r = Margin::new(vec![0.7, 0.2, 0.1]).unwrap();
        let s = Margin::new(vec![0.95, 0.05]).unwrap();
        let (mu, nu) = generate_feasible_margins(0.0, &r, &s).unwrap();
        assert_eq!(mu, r);
        assert!(nu.is_uniform());
        let (mu, nu) = generate_feasible_margins(1.0, &r, &s).unwrap();
        assert!(mu.is_uniform());
        assert_eq!(nu, s);
        let (mu, nu) = generate_feasible_margins(0.3, &r, &s).unwrap();
        assert!(check_condition_h(&mu, &nu));
        assert!(generate_feasible_margins(1.2, &r, &s).is_err());
    }

    #[test]
    fn joint_json_shape() {
        let (mu, nu) = worked_margins();
        let pi = indetermination_coupling(&mu, &nu).unwrap();
        let value = serde_json::to_value(&pi).unwrap();
        assert!(value["cells"].is_array());
        assert_eq!(value["row_margin"].as_array().unwrap().len(), 4);
        let back: JointDistribution = serde_json::from_value(value).unwrap();
        assert_eq!(back, pi);

        let bad = serde_json::json!({"cells": [[0.5, 0.5]], "row_margin": [0.9]});
        assert!(serde_json::from_value::<JointDistribution>(bad).is_err());
    }
}
