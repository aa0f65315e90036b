//! Numerical tolerances used across the crate.
//!
//! Every threshold a check compares against lives here so reports and tests
//! agree on the same numbers.

/// Geodesic identities for models with closed-form (affine) segments.
pub const EXACT_MODEL_TOL: f64 = 1e-9;

/// Geodesic identities on the hyperboloid (arccosh/sinh conditioning).
pub const HYPERBOLOID_TOL: f64 = 1e-6;

/// Hyperboloid points must satisfy the Minkowski constraint to this relative accuracy.
pub const HYPERBOLOID_CONSTRAINT_TOL: f64 = 1e-9;

/// Slack on sampled Lipschitz quotients against a claimed constant.
pub const LIP_SLACK: f64 = 1e-7;

/// Strictness slack: `a > b` is asserted as `a > b + STRICT_SLACK`.
pub const STRICT_SLACK: f64 = 1e-9;

/// Inverse-gauge round trip `phi(phi_inv(t)) = t`.
pub const GAUGE_ROUNDTRIP_TOL: f64 = 1e-10;

/// Residual allowed on gauge identities that hold with equality.
pub const GAUGE_EQUALITY_TOL: f64 = 1e-12;

/// Multiplicative safety margin applied to sampled (lower) estimates of
/// sup-based metric distances before comparing them against a radius.
pub const SUP_SAFETY_FACTOR: f64 = 1.1;

/// Default number of terms kept of the series metric under the log gauge.
pub const LOG_GAUGE_TRUNCATION: usize = 60;

/// Default number of terms kept of the series metric under the power gauge.
pub const POWER_GAUGE_TRUNCATION: usize = 10_000;

/// Default cap on the dimension of the l1 model.
pub const L1_DIM_LIMIT: usize = 8;

/// Largest intrinsic radius at which hyperboloid coordinates are still
/// usable; beyond this the Minkowski pairing loses all significant digits.
pub const HYPERBOLOID_MAX_RADIUS: f64 = 30.0;
