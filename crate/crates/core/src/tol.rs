//! Default tolerances shared across modules.

/// Allowed deviation of a probability vector's total mass from 1.
pub const MASS: f64 = 1e-9;
/// Marginal error allowed for a transport plan.
pub const PLAN_MARGINAL: f64 = 1e-8;
/// Recomposition error allowed for conditional families.
pub const RECOMPOSITION: f64 = 1e-12;
/// Eigenvalue floor below which a symmetric matrix is not PSD.
pub const PSD: f64 = 1e-12;
/// Most negative weight a scheme may produce before it is an error.
pub const NEGATIVITY: f64 = 1e-12;
/// Linear program feasibility and optimality tolerance.
pub const LP: f64 = 1e-8;
/// Per-step normalization tolerance of occupation measures.
pub const NORMALIZATION: f64 = 1e-10;
/// Relative slack of sampled hypothesis inequalities.
pub const HYPOTHESIS: f64 = 1e-8;
/// Relative slack of moment monitors.
pub const MONITOR: f64 = 1e-8;
/// Default explicit CFL limit.
pub const CFL_MAX: f64 = 0.9;
/// Default boundary leakage budget for accepted runs.
pub const LEAKAGE_BUDGET: f64 = 1e-3;
