//! Numerical tolerances shared by every module.
//!
//! The closed forms used throughout are exact in real arithmetic, so these
//! only absorb double-precision rounding. Genuine violations of the
//! corresponding invariants are many orders of magnitude larger.

/// Probability vectors and joint tables must sum to one within this.
pub const SUM_TOL: f64 = 1e-12;

/// Row and column sums must agree with requested margins within this.
pub const MARGIN_TOL: f64 = 1e-10;

/// Default relative tolerance of the adjacent 2x2 Full-Monge test.
pub const MONGE_REL_TOL: f64 = 1e-9;

/// Cells down to `-NEG_TOL` count as nonnegative (and are clamped to zero).
pub const NEG_TOL: f64 = 1e-12;

/// Densities must integrate to one within this.
pub const DENSITY_MASS_TOL: f64 = 1e-10;
