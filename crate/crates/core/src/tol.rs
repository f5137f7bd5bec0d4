//! Shared numerical tolerances.
//!
//! All computations in this crate are short exact sums in `f64`, so equality
//! assertions use an absolute tolerance on quantities of order one and a
//! relative tolerance otherwise.

/// Absolute tolerance for exact identities on quantities of order one.
pub const ABS_TOL: f64 = 1e-12;

/// Relative tolerance for exact identities on larger quantities.
pub const REL_TOL: f64 = 1e-9;

/// Multiplicative slack applied to explicit constants in bound checks.
pub const BOUND_SLACK: f64 = 1e-9;

/// True when `a` and `b` agree within `ABS_TOL` absolutely or `REL_TOL` relatively.
pub fn nearly_equal(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= ABS_TOL.max(REL_TOL * scale)
}

/// True when `lhs <= rhs` up to the shared identity tolerance.
pub fn nearly_le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + ABS_TOL.max(REL_TOL * lhs.abs().max(rhs.abs()))
}
