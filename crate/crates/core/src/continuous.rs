//! Indetermination between two absolutely continuous margins on a rectangle.
//!
//! Densities are piecewise constant or piecewise linear so that their
//! minima, integrals and CDFs have closed forms. Everything is evaluated by
//! mapping both supports to `[0, 1]`, where the joint density is
//! `f(s) + g(t) - 1` and the CDF is `t F(s) + s G(t) - s t`.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::stream_rng;
use crate::tolerance::{DENSITY_MASS_TOL, NEG_TOL, SUM_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    /// One value per piece.
    PiecewiseConstant,
    /// One value per knot, linear in between.
    PiecewiseLinear,
}

#[derive(Deserialize)]
struct DensityRepr {
    kind: DensityKind,
    support: [f64; 2],
    knots: Vec<f64>,
    values: Vec<f64>,
}

/// A probability density on `[a, A]`.
///
/// `knots` run from `a` to `A` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr")]
pub struct DensitySpec {
    kind: DensityKind,
    support: [f64; 2],
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<DensityRepr> for DensitySpec {
    type Error = CoreError;

    fn try_from(r: DensityRepr) -> Result<Self> {
        DensitySpec::new(r.kind, r.support, r.knots, r.values)
    }
}

impl DensitySpec {
    pub fn new(kind: DensityKind, support: [f64; 2], knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let [a, b] = support;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(CoreError::InvalidDensity(format!("bad support [{a}, {b}]")));
        }
        if knots.len() < 2 || knots[0] != a || knots[knots.len() - 1] != b {
            return Err(CoreError::InvalidDensity("knots must start at a and end at A".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(CoreError::InvalidDensity("knots must be strictly increasing".into()));
        }
        let expected = match kind {
            DensityKind::PiecewiseConstant => knots.len() - 1,
            DensityKind::PiecewiseLinear => knots.len(),
        };
        if values.len() != expected {
            return Err(CoreError::InvalidDensity(format!(
                "{kind:?} with {} knots takes {expected} values, got {}",
                knots.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(CoreError::InvalidDensity(format!("density value {v} is negative or not finite")));
        }
        let spec = Self {
            kind,
            support,
            knots,
            values,
        };
        let mass = spec.mass();
        if (mass - 1.0).abs() > DENSITY_MASS_TOL {
            return Err(CoreError::InvalidDensity(format!("density integrates to {mass}, not 1")));
        }
        Ok(spec)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(DensityKind::PiecewiseConstant, [a, b], vec![a, b], vec![1.0 / (b - a)])
    }

    /// Piecewise linear on `[0, 1]` with the given values at equally spaced knots.
    pub fn linear_unit(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(CoreError::InvalidDensity("need at least two knot values".into()));
        }
        let knots = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        Self::new(DensityKind::PiecewiseLinear, [0.0, 1.0], knots, values)
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support[0], self.support[1])
    }

    pub fn width(&self) -> f64 {
        self.support[1] - self.support[0]
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.support[0] && x <= self.support[1]
    }

    fn piece(&self, x: f64) -> usize {
        let last = self.knots.len() - 2;
        self.knots.partition_point(|&k| k <= x).saturating_sub(1).min(last)
    }

    /// Left and right values of piece `i`.
    fn ends(&self, i: usize) -> (f64, f64) {
        match self.kind {
            DensityKind::PiecewiseConstant => (self.values[i], self.values[i]),
            DensityKind::PiecewiseLinear => (self.values[i], self.values[i + 1]),
        }
    }

    /// Density at `x`; right-continuous, the last piece is closed.
    pub fn eval(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        let i = self.piece(x);
        let (y0, y1) = self.ends(i);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Exact infimum over the support.
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    fn piece_mass(&self, i: usize, upto: f64) -> f64 {
        let (y0, y1) = self.ends(i);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let d = upto - x0;
        d * (y0 + 0.5 * (y1 - y0) * d / (x1 - x0))
    }

    fn mass(&self) -> f64 {
        (0..self.knots.len() - 1).map(|i| self.piece_mass(i, self.knots[i + 1])).sum()
    }

    /// Distribution function, 0 left of the support and 1 right of it.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.support[0] {
            return 0.0;
        }
        if x >= self.support[1] {
            return 1.0;
        }
        let i = self.piece(x);
        let before: f64 = (0..i).map(|j| self.piece_mass(j, self.knots[j + 1])).sum();
        (before + self.piece_mass(i, x)).clamp(0.0, 1.0)
    }

    /// The same law expressed on `[0, 1]`.
    pub fn normalized(&self) -> DensitySpec {
        let (a, w) = (self.support[0], self.width());
        let mut knots: Vec<f64> = self.knots.iter().map(|k| (k - a) / w).collect();
        knots[0] = 0.0;
        *knots.last_mut().expect("at least two knots") = 1.0;
        DensitySpec {
            kind: self.kind,
            support: [0.0, 1.0],
            knots,
            values: self.values.iter().map(|v| v * w).collect(),
        }
    }

    /// `scale * self + shift`, kept in the same representation.
    fn affine(&self, scale: f64, shift: f64) -> DensitySpec {
        DensitySpec {
            kind: self.kind,
            support: self.support,
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| (scale * v + shift).max(0.0)).collect(),
        }
    }
}

/// Indetermination law with margins `f` on `[a, A]` and `g` on `[b, B]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousCoupling {
    pub f: DensitySpec,
    pub g: DensitySpec,
}

/// `(A - a) min f + (B - b) min g`, i.e. `min f + min g` once both supports are `[0, 1]`.
pub fn condition_continuous_lhs(f: &DensitySpec, g: &DensitySpec) -> f64 {
    f.width() * f.min() + g.width() * g.min()
}

pub fn check_condition_continuous(f: &DensitySpec, g: &DensitySpec) -> bool {
    condition_continuous_lhs(f, g) >= 1.0 - SUM_TOL
}

impl ContinuousCoupling {
    /// Refuses margins for which the density would go negative.
    pub fn new(f: DensitySpec, g: DensitySpec) -> Result<Self> {
        if !check_condition_continuous(&f, &g) {
            return Err(CoreError::ContinuousConditionViolation {
                lhs: condition_continuous_lhs(&f, &g),
            });
        }
        Ok(Self { f, g })
    }

    fn to_unit(&self, u: f64, v: f64) -> Result<(f64, f64)> {
        if !self.f.contains(u) || !self.g.contains(v) {
            return Err(CoreError::OutOfSupport { u, v });
        }
        let (a, _) = self.f.support();
        let (b, _) = self.g.support();
        Ok(((u - a) / self.f.width(), (v - b) / self.g.width()))
    }

    pub fn normalized(&self) -> ContinuousCoupling {
        ContinuousCoupling {
            f: self.f.normalized(),
            g: self.g.normalized(),
        }
    }

    /// Joint density on `[0, 1]^2`.
    fn unit_density(&self, s: f64, t: f64) -> f64 {
        let (wf, wg) = (self.f.width(), self.g.width());
        let (a, _) = self.f.support();
        let (b, _) = self.g.support();
        wf * self.f.eval(a + s * wf) + wg * self.g.eval(b + t * wg) - 1.0
    }

    /// Exact minimum of the joint density; the density is a sum of one function of each axis.
    pub fn min_density(&self) -> f64 {
        (condition_continuous_lhs(&self.f, &self.g) - 1.0) / (self.f.width() * self.g.width())
    }
}

/// `f(u)/(B - b) + g(v)/(A - a) - 1/((A - a)(B - b))`.
pub fn density_eval(c: &ContinuousCoupling, u: f64, v: f64) -> Result<f64> {
    let (s, t) = c.to_unit(u, v)?;
    Ok(c.unit_density(s, t) / (c.f.width() * c.g.width()))
}

/// `P(X <= u, Y <= v)`.
pub fn cdf_eval(c: &ContinuousCoupling, u: f64, v: f64) -> Result<f64> {
    let (s, t) = c.to_unit(u, v)?;
    Ok(t * c.f.cdf(u) + s * c.g.cdf(v) - s * t)
}

/// Probability of `[u0, u1] x [v0, v1]`.
pub fn rectangle_probability(c: &ContinuousCoupling, u0: f64, u1: f64, v0: f64, v1: f64) -> Result<f64> {
    Ok(cdf_eval(c, u1, v1)? - cdf_eval(c, u0, v1)? - cdf_eval(c, u1, v0)? + cdf_eval(c, u0, v0)?)
}

/// Gauss-Legendre nodes and weights on each piece between consecutive breaks.
pub(crate) fn composite_rule(breaks: &[f64], n: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).expect("positive"));
    let mut out = Vec::with_capacity(n * breaks.len());
    for w in breaks.windows(2) {
        let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for &(x, wt) in rule.as_node_weight_pairs() {
            out.push((mid + half * x, half * wt));
        }
    }
    out
}

/// The margins of the coupling; they are `f` and `g` in closed form.
///
/// Both are checked against Gauss-Legendre integration of the joint density
/// with `n_quad` nodes per piece, at every quadrature node.
pub fn margins_of_density(c: &ContinuousCoupling, n_quad: usize) -> Result<(DensitySpec, DensitySpec)> {
    let err = margin_recovery_error(c, n_quad)?;
    if err > 1e-9 {
        return Err(CoreError::ToleranceBreach(format!("recovered margin off by {err}")));
    }
    Ok((c.f.clone(), c.g.clone()))
}

/// Largest gap between a numerically integrated margin and the given one.
pub fn margin_recovery_error(c: &ContinuousCoupling, n_quad: usize) -> Result<f64> {
    if n_quad < 16 {
        return Err(CoreError::InvalidArgument(format!("need at least 16 nodes, got {n_quad}")));
    }
    let u_rule = composite_rule(c.f.knots(), n_quad);
    let v_rule = composite_rule(c.g.knots(), n_quad);
    let mut worst = 0.0f64;
    for &(u, _) in &u_rule {
        let m: f64 = v_rule.iter().map(|&(v, w)| w * density_eval(c, u, v).unwrap_or(0.0)).sum();
        worst = worst.max((m - c.f.eval(u)).abs());
    }
    for &(v, _) in &v_rule {
        let m: f64 = u_rule.iter().map(|&(u, w)| w * density_eval(c, u, v).unwrap_or(0.0)).sum();
        worst = worst.max((m - c.g.eval(v)).abs());
    }
    Ok(worst)
}

/// Total mass of the joint density by quadrature.
pub fn total_mass(c: &ContinuousCoupling, n_quad: usize) -> f64 {
    let u_rule = composite_rule(c.f.knots(), n_quad);
    let v_rule = composite_rule(c.g.knots(), n_quad);
    u_rule
        .iter()
        .flat_map(|&(u, wu)| v_rule.iter().map(move |&(v, wv)| (u, v, wu * wv)))
        .map(|(u, v, w)| w * density_eval(c, u, v).unwrap_or(0.0))
        .sum()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(CoreError::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

fn check_unit(d: &DensitySpec, name: &str) -> Result<()> {
    if d.support() != (0.0, 1.0) {
        return Err(CoreError::InvalidDensity(format!("{name} must live on [0, 1]")));
    }
    Ok(())
}

/// `f = (1 - alpha) r + alpha`, `g = alpha s + 1 - alpha`, for densities on `[0, 1]`.
pub fn construct_margins(alpha: f64, r: &DensitySpec, s: &DensitySpec) -> Result<(DensitySpec, DensitySpec)> {
    check_alpha(alpha)?;
    check_unit(r, "r")?;
    check_unit(s, "s")?;
    Ok((r.affine(1.0 - alpha, alpha), s.affine(alpha, 1.0 - alpha)))
}

/// Inverse of [`construct_margins`] with `alpha = min f`, for margins on `[0, 1]`.
pub fn decompose_margins(f: &DensitySpec, g: &DensitySpec) -> Result<(f64, DensitySpec, DensitySpec)> {
    check_unit(f, "f")?;
    check_unit(g, "g")?;
    let alpha = f.min();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoreError::DegenerateInput(format!(
            "min f = {alpha}; the split is unique only when it lies strictly between 0 and 1"
        )));
    }
    if g.min() < 1.0 - alpha - SUM_TOL {
        return Err(CoreError::ContinuousConditionViolation {
            lhs: condition_continuous_lhs(f, g),
        });
    }
    let r = f.affine(1.0 / (1.0 - alpha), -alpha / (1.0 - alpha));
    let s = g.affine(1.0 / alpha, -(1.0 - alpha) / alpha);
    Ok((alpha, r, s))
}

/// Outcome of perturbing the joint density along margin-preserving directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2CheckReport {
    pub trials: usize,
    /// `epsilon` used per trial.
    pub epsilons: Vec<f64>,
    /// `||c + eps h||^2 - ||c||^2` per trial.
    pub increases: Vec<f64>,
    pub passed: bool,
}

pub const L2_TRIALS: usize = 20;
const L2_MODES: usize = 3;

fn sine_series(coef: &[f64; L2_MODES], x: f64) -> f64 {
    coef.iter()
        .enumerate()
        .map(|(k, a)| a * (2.0 * std::f64::consts::PI * (k + 1) as f64 * x).sin())
        .sum()
}

/// Perturbs the normalized density by `eps * phi(s) psi(t)` with `phi`, `psi`
/// mean-zero sine series, keeping it nonnegative, and checks the squared
/// norm never drops.
pub fn l2_optimality_report(c: &ContinuousCoupling, perturbation_seed: u64, trials: usize) -> Result<L2CheckReport> {
    if !check_condition_continuous(&c.f, &c.g) {
        return Err(CoreError::ContinuousConditionViolation {
            lhs: condition_continuous_lhs(&c.f, &c.g),
        });
    }
    let unit = c.normalized();
    let mut s_breaks: Vec<f64> = unit.f.knots().to_vec();
    let mut t_breaks: Vec<f64> = unit.g.knots().to_vec();
    for b in [&mut s_breaks, &mut t_breaks] {
        b.extend((1..8).map(|i| i as f64 / 8.0));
        b.sort_by(f64::total_cmp);
        b.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    }
    let s_rule = composite_rule(&s_breaks, 24);
    let t_rule = composite_rule(&t_breaks, 24);
    let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();

    // location of the smallest density value, where h is made nonnegative
    let (s_min, t_min) = {
        let mut best = (0.0, 0.0, f64::INFINITY);
        for &s in &grid {
            for &t in &grid {
                let d = unit.unit_density(s, t);
                if d < best.2 {
                    best = (s, t, d);
                }
            }
        }
        (best.0, best.1)
    };

    let mut rng = stream_rng(perturbation_seed, 0);
    let mut epsilons = Vec::with_capacity(trials);
    let mut increases = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut a = [0.0; L2_MODES];
        let mut b = [0.0; L2_MODES];
        for k in 0..L2_MODES {
            a[k] = rng.gen_range(-1.0..1.0);
            b[k] = rng.gen_range(-1.0..1.0);
        }
        let sign = if sine_series(&a, s_min) * sine_series(&b, t_min) < 0.0 { -1.0 } else { 1.0 };
        let h = |s: f64, t: f64| sign * sine_series(&a, s) * sine_series(&b, t);

        let mut ratio = f64::INFINITY;
        for &s in &grid {
            for &t in &grid {
                let hv = h(s, t);
                if hv < 0.0 {
                    ratio = ratio.min(unit.unit_density(s, t).max(0.0) / -hv);
                }
            }
        }
        let eps = 0.5f64.min(0.5 * ratio);

        let mut increase = 0.0;
        for &(s, ws) in &s_rule {
            for &(t, wt) in &t_rule {
                let hv = h(s, t);
                increase += ws * wt * (2.0 * eps * unit.unit_density(s, t) * hv + eps * eps * hv * hv);
            }
        }
        epsilons.push(eps);
        increases.push(increase);
    }
    let passed = increases.iter().all(|&d| d >= -1e-13);
    Ok(L2CheckReport {
        trials,
        epsilons,
        increases,
        passed,
    })
}

/// [`l2_optimality_report`] with the default number of trials.
pub fn l2_optimality_check(c: &ContinuousCoupling, perturbation_seed: u64) -> Result<bool> {
    Ok(l2_optimality_report(c, perturbation_seed, L2_TRIALS)?.passed)
}

/// Density and CDF on an `n x n` grid of cell midpoints.
pub fn evaluation_grid(c: &ContinuousCoupling, n: usize) -> Result<Vec<(f64, f64, f64, f64)>> {
    if n == 0 {
        return Err(CoreError::InvalidArgument("grid needs at least one point".into()));
    }
    let (a, _) = c.f.support();
    let (b, _) = c.g.support();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let u = a + c.f.width() * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let v = b + c.g.width() * (j as f64 + 0.5) / n as f64;
            let d = density_eval(c, u, v)?;
            if d < -NEG_TOL {
                return Err(CoreError::ToleranceBreach(format!("density {d} at ({u}, {v})")));
            }
            out.push((u, v, d, cdf_eval(c, u, v)?));
        }
    }
    Ok(out)
}
