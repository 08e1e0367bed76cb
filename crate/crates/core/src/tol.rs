//! Numerical tolerances shared by solvers, checks and the verification suite.

/// Leaf probability mass must equal one to this accuracy.
pub const PROBABILITY_MASS: f64 = 1e-12;

/// Kernel weights must sum to one to this accuracy.
pub const KERNEL_SUM: f64 = 1e-12;

/// Accepted positive conditional drift of an input supermartingale.
pub const SUPERMARTINGALE: f64 = 1e-10;

/// Node-wise Skorohod product, negative push and barrier violation.
pub const SKOROHOD: f64 = 1e-12;

/// A push increment larger than this counts as "the barrier is active".
pub const ACTIVE_PUSH: f64 = 1e-12;

/// Conditional mean of the per-branch equation residual.
pub const RESIDUAL_MEAN: f64 = 1e-10;

/// Agreement between two solution routes (direct recursion vs Snell route).
pub const ROUTE_AGREEMENT: f64 = 1e-10;

/// Agreement between the solver value and the enumeration oracle.
pub const ORACLE_AGREEMENT: f64 = 1e-10;

/// Slack on the a priori majorant.
pub const MAJORANT: f64 = 1e-10;

/// Slack allowed on observed Picard distance ratios over `α`.
pub const CONTRACTION_SLACK: f64 = 0.05;

/// Bisection resolution for the contraction parameter `α`.
pub const ALPHA_RESOLUTION: f64 = 1e-9;

/// Rewards within this margin of the enumerated maximum are ties.
pub const ENUMERATION_TIE: f64 = 1e-12;
