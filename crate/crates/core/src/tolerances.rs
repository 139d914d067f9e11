//! Numerical tolerances shared by the verification routines.
//!
//! Every threshold used by a check is defined here so reports can cite
//! the value they were judged against.

/// Unit-norm tolerance for sample points and probe inputs.
pub const UNIT_NORM: f64 = 1e-12;

/// Loose unit-norm tolerance accepted from callers (user-supplied points).
pub const UNIT_NORM_INPUT: f64 = 1e-9;

/// Tangency of gradients and distance of cap points from their center.
pub const GEOMETRIC: f64 = 1e-10;

/// Absolute tolerance of the adaptive 1-D quadrature behind `ball_volume`.
pub const BALL_VOLUME_ABS: f64 = 1e-12;

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Largest finite-difference step accepted by the calculus operators.
pub const MAX_STEP: f64 = 1e-2;

/// Relative slack granted to pointwise differential inequalities evaluated
/// with second-order finite differences (stencil truncation plus roundoff).
pub const FD_POINTWISE_REL: f64 = 1e-6;

/// Relative slack for equality-type integral checks that should hold
/// exactly on the quadrature (e.g. Hölder chains on the same weights).
pub const QUADRATURE_REL: f64 = 1e-9;

/// Residual floor for weak-form inequalities on the bump test family.
pub const WEAK_RESIDUAL: f64 = 1e-3;

/// Relative agreement required between the two sides of the total
/// scalar curvature identity.
pub const TOTAL_SCALAR_REL: f64 = 1e-2;

/// Multiplier on the cap standard error for monotonicity upticks.
pub const CAP_STDERR_FACTOR: f64 = 3.0;

/// Floor on monotonicity tolerance when caps are deterministic.
pub const MONOTONE_FLOOR: f64 = 1e-10;

/// Relative tolerance of the coarea perimeter estimator.
pub const PERIMETER_REL: f64 = 5e-2;

/// Slack for elementary (1-D, closed-form) inequality scans.
pub const ELEMENTARY: f64 = 1e-9;

/// Default quantile used for essential infimum estimates.
pub const ESSINF_QUANTILE: f64 = 1e-3;

/// Relative accuracy of a second-order finite-difference term at the
/// default step; pointwise curvature signs are judged against this
/// fraction of the magnitude of the terms that were differenced.
pub const FD_TERM_REL: f64 = 1e-5;

/// Relative slack on the uniform-integrability ratio (pure roundoff).
pub const UI_RATIO_REL: f64 = 1e-9;
