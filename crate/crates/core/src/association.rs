//! Association indices measuring how far a contingency table is from one of
//! the canonical couplings of its own margins.
//!
//! `chi_square` is the squared deviation to independence weighted by the
//! independence cells; `jv_contingency` is the Janson-Vegelius index, a
//! squared deviation to indetermination. `jv_relational` evaluates the same
//! index as a cosine between centered relational (same-modality) matrices.

use bitvec::prelude::*;
use serde::Serialize;

use crate::coupling::{indetermination_signed, JointDistribution};
use crate::error::{CoreError, Result};
use crate::matrix::Matrix;

/// Counts of `n` individuals cross-classified into `p x q` cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    pub fn new(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if rows == 0 || cols == 0 || counts.len() != rows * cols {
            return Err(CoreError::DimensionMismatch(format!(
                "{} counts for a {rows}x{cols} table",
                counts.len()
            )));
        }
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(CoreError::DegenerateInput("table holds no individuals".into()));
        }
        Ok(Self { rows, cols, counts, n })
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(CoreError::DimensionMismatch("ragged contingency table".into()));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    /// Accepts a real matrix whose cells are nonnegative integers.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        let counts = m
            .as_slice()
            .iter()
            .map(|&x| {
                if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 {
                    Ok(x as u64)
                } else {
                    Err(CoreError::InvalidMatrix(format!("{x} is not a count")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(m.rows(), m.cols(), counts)
    }

    /// Cross-tabulates two label vectors (zero-based categories).
    pub fn from_labels(x: &[usize], y: &[usize], p: usize, q: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(CoreError::DimensionMismatch("label vectors differ in length".into()));
        }
        let mut counts = vec![0u64; p * q];
        for (&u, &v) in x.iter().zip(y) {
            if u >= p || v >= q {
                return Err(CoreError::InvalidArgument(format!(
                    "label pair ({u}, {v}) outside {p}x{q}"
                )));
            }
            counts[u * q + v] += 1;
        }
        Self::new(p, q, counts)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn count(&self, u: usize, v: usize) -> u64 {
        self.counts[u * self.cols + v]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |u, v| self.count(u, v) as f64)
    }

    /// `n_uv / n`.
    pub fn joint(&self) -> JointDistribution {
        JointDistribution::from_counts(&self.to_matrix()).expect("nonempty table of counts")
    }
}

/// `sum (pi - mu x nu)^2 / (mu x nu)` on the empirical law of the table.
///
/// Fails when a whole row or column is empty.
pub fn chi_square(table: &ContingencyTable) -> Result<f64> {
    chi_square_joint(&table.joint())
}

/// [`chi_square`] for a real-valued joint law.
pub fn chi_square_joint(pi: &JointDistribution) -> Result<f64> {
    let (mu, nu) = (pi.row_margin(), pi.col_margin());
    if let Some(u) = mu.weights().iter().position(|&m| m == 0.0) {
        return Err(CoreError::DegenerateInput(format!("row {} is empty", u + 1)));
    }
    if let Some(v) = nu.weights().iter().position(|&m| m == 0.0) {
        return Err(CoreError::DegenerateInput(format!("column {} is empty", v + 1)));
    }
    let mut total = 0.0;
    for u in 0..pi.rows() {
        for v in 0..pi.cols() {
            let expected = mu.get(u) * nu.get(v);
            let d = pi.get(u, v) - expected;
            total += d * d / expected;
        }
    }
    Ok(total)
}

/// Janson-Vegelius index in contingency form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JvContingency {
    /// `sum (pi - mu (+) nu)^2`.
    pub numerator: f64,
    /// `sqrt((p-2)/p (sum mu^2 + 1)) * sqrt((q-2)/q (sum nu^2 + 1))`; `None`
    /// when `p <= 2` or `q <= 2`, where the factor is not positive.
    pub denominator: Option<f64>,
    /// `numerator / denominator` when the denominator normalizes.
    pub value: Option<f64>,
}

impl JvContingency {
    pub fn is_normalized(&self) -> bool {
        self.denominator.is_some()
    }
}

/// Squared deviation of the table's law from its indetermination coupling.
pub fn jv_contingency(table: &ContingencyTable) -> JvContingency {
    jv_contingency_joint(&table.joint())
}

/// [`jv_contingency`] for a real-valued joint law.
pub fn jv_contingency_joint(pi: &JointDistribution) -> JvContingency {
    let (mu, nu) = (pi.row_margin(), pi.col_margin());
    let plus = indetermination_signed(mu, nu);
    let numerator = pi
        .cells()
        .as_slice()
        .iter()
        .zip(plus.cells().as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let (p, q) = (pi.rows() as f64, pi.cols() as f64);
    let row_factor = (p - 2.0) / p * (mu.squared_norm() + 1.0);
    let col_factor = (q - 2.0) / q * (nu.squared_norm() + 1.0);
    let denominator = (row_factor > 0.0 && col_factor > 0.0).then(|| row_factor.sqrt() * col_factor.sqrt());
    JvContingency {
        numerator,
        denominator,
        value: denominator.map(|d| numerator / d),
    }
}

/// Symmetric 0/1 matrix with `X[i][j] = 1` iff items `i` and `j` share a
/// modality. Stored bit-packed, `n^2` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalMatrix {
    n: usize,
    bits: BitVec<u64, Lsb0>,
}

impl RelationalMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn ones(&self) -> usize {
        self.bits.count_ones()
    }

    /// Number of pairs `(i, j)` related in both matrices.
    pub fn common_ones(&self, other: &RelationalMatrix) -> usize {
        self.bits
            .as_raw_slice()
            .iter()
            .zip(other.bits.as_raw_slice())
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn is_reflexive(&self) -> bool {
        (0..self.n).all(|i| self.get(i, i))
    }

    /// `X[i][j] + X[j][k] - X[i][k] <= 1` for every triple.
    pub fn is_transitive(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| {
            (0..n).all(|j| !self.get(i, j) || (0..n).all(|k| !self.get(j, k) || self.get(i, k)))
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| u8::from(self.get(i, j))).collect())
            .collect()
    }
}

/// Relational encoding of a label vector.
pub fn relational_encode<L: PartialEq>(labels: &[L]) -> Result<RelationalMatrix> {
    let n = labels.len();
    if n == 0 {
        return Err(CoreError::InvalidArgument("need at least one item".into()));
    }
    let mut bits = bitvec![u64, Lsb0; 0; n * n];
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                bits.set(i * n + j, true);
            }
        }
    }
    Ok(RelationalMatrix { n, bits })
}

/// Cosine between `X - 1/p` and `Y - 1/q` over all `n^2` ordered pairs.
pub fn jv_relational(x: &RelationalMatrix, y: &RelationalMatrix, p: usize, q: usize) -> Result<f64> {
    if x.n() != y.n() {
        return Err(CoreError::DimensionMismatch(format!(
            "relational matrices of size {} and {}",
            x.n(),
            y.n()
        )));
    }
    if p == 0 || q == 0 {
        return Err(CoreError::InvalidArgument("p and q must be positive".into()));
    }
    let cells = (x.n() * x.n()) as f64;
    let (a, b) = (1.0 / p as f64, 1.0 / q as f64);
    let (nx, ny, nxy) = (x.ones() as f64, y.ones() as f64, x.common_ones(y) as f64);
    // Expanded over binary entries: sum (X-a)(Y-b) = nxy - b nx - a ny + a b n^2.
    let inner = nxy - b * nx - a * ny + a * b * cells;
    let norm_x = nx * (1.0 - a) * (1.0 - a) + (cells - nx) * a * a;
    let norm_y = ny * (1.0 - b) * (1.0 - b) + (cells - ny) * b * b;
    if norm_x == 0.0 || norm_y == 0.0 {
        return Err(CoreError::DegenerateInput(
            "a centered relational matrix is identically zero".into(),
        ));
    }
    Ok((inner / (norm_x * norm_y).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chi_square_examples() {
        let flat = ContingencyTable::from_rows(vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(chi_square(&flat).unwrap(), 0.0);
        let diag = ContingencyTable::from_rows(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_abs_diff_eq!(chi_square(&diag).unwrap(), 1.0, epsilon = 1e-15);
        let fig = ContingencyTable::from_rows(vec![vec![3, 4, 2], vec![2, 3, 1], vec![1, 2, 0], vec![3, 4, 2]])
            .unwrap();
        assert!(chi_square(&fig).unwrap() > 1e-6);
        let hole = ContingencyTable::from_rows(vec![vec![1, 2], vec![0, 0]]).unwrap();
        assert!(matches!(chi_square(&hole), Err(CoreError::DegenerateInput(_))));
    }

    #[test]
    fn jv_examples() {
        let fig = ContingencyTable::from_rows(vec![vec![3, 4, 2], vec![2, 3, 1], vec![1, 2, 0], vec![3, 4, 2]])
            .unwrap();
        let jv = jv_contingency(&fig);
        assert!(jv.numerator < 1e-15);
        assert!(jv.is_normalized());

        // 2x3 product table with non-uniform margins on both sides.
        let prod = ContingencyTable::from_rows(vec![vec![1, 2, 3], vec![3, 6, 9]]).unwrap();
        assert_abs_diff_eq!(chi_square(&prod).unwrap(), 0.0, epsilon = 1e-15);
        let jv = jv_contingency(&prod);
        assert!(jv.numerator > 1e-6);
        assert!(jv.denominator.is_none());

        let single = ContingencyTable::from_rows(vec![vec![5]]).unwrap();
        assert_eq!(jv_contingency(&single).numerator, 0.0);
    }

    #[test]
    fn relational_encoding_examples() {
        let x = relational_encode(&[1, 1, 2]).unwrap();
        assert_eq!(x.to_rows(), vec![vec![1, 1, 0], vec![1, 1, 0], vec![0, 0, 1]]);
        assert_eq!(relational_encode(&[7, 7, 7]).unwrap().ones(), 9);
        let id = relational_encode(&["a", "b", "c"]).unwrap();
        assert_eq!(id.to_rows(), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert!(x.is_reflexive() && x.is_symmetric() && x.is_transitive());
        assert!(relational_encode::<u8>(&[]).is_err());
    }

    #[test]
    fn jv_relational_examples() {
        let x = relational_encode(&[1, 1, 2, 2]).unwrap();
        let y = relational_encode(&[1, 2, 1, 2]).unwrap();
        assert_abs_diff_eq!(jv_relational(&x, &x, 2, 2).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(jv_relational(&x, &y, 2, 2).unwrap(), 0.0, epsilon = 1e-15);
        let all = relational_encode(&[0, 0, 0]).unwrap();
        assert!(matches!(jv_relational(&all, &all, 1, 1), Err(CoreError::DegenerateInput(_))));
        assert!(jv_relational(&x, &relational_encode(&[1, 2]).unwrap(), 2, 2).is_err());
    }
}
