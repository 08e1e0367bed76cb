//! Picard iteration for state-dependent generators.
//!
//! `Γ(P, Q, R)` freezes `f(·, P_k, Q_k)` and `g(·, P_k, R_k)` node by node and
//! solves the resulting reflected equation with the explicit scheme. Progress
//! is measured in the composite norm
//!
//! ```text
//! d² = L_f/√α ‖ΔY‖²_A + L_g/√α ‖ΔY‖²_W + ‖ΔU‖²_p + ‖ΔZ‖²_W
//! ```
//!
//! with weights `e^{βA_k + γt_k}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{MarkProcess, NodeProcess, ScenarioTree};
use crate::rbsde::{
    check_equation_residual, check_skorohod, solve_frozen, EquationResidual, FrozenGenerators, GeneratorSpec,
    Lipschitz, RbsdeSolution, SkorohodReport,
};
use crate::tol;
use crate::wnorm::{norm_sq, NormKind, WeightedNorm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PicardError {
    #[error("β = {beta} is too small: need β > L_U² + 2L_f = {minimal}")]
    BetaTooSmall { beta: f64, minimal: f64 },
    #[error("contraction parameters (β = {beta}, γ = {gamma}, α = {alpha}) are infeasible for {lipschitz:?}")]
    Infeasible { beta: f64, gamma: f64, alpha: f64, lipschitz: Lipschitz },
    #[error("no convergence after {} iterations (last distance {:e})", .0.distances.len(), .0.distances.last().copied().unwrap_or(f64::NAN))]
    NoConvergence(Box<PicardTrace>),
}

pub const DEFAULT_MAX_ITER: usize = 40;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionConfig {
    pub beta: f64,
    pub gamma: f64,
    /// Chosen `α`, the largest admissible value below one.
    pub alpha: f64,
    /// Smallest admissible `α` (bisection), for reporting.
    pub alpha_min: f64,
    pub lipschitz: Lipschitz,
    pub max_iter: usize,
    pub tol: f64,
}

fn alpha_bound(lip: &Lipschitz, alpha: f64) -> f64 {
    lip.u * lip.u / alpha + 2.0 * lip.f / alpha.sqrt()
}

fn gamma_for(lip: &Lipschitz, alpha: f64) -> f64 {
    lip.z * lip.z / alpha + 2.0 * lip.g / alpha.sqrt()
}

/// Choose `α` and `γ` for the given constants and `β`.
///
/// `α ↦ L_U²/α + 2L_f/√α` is decreasing, so the admissible set is an
/// interval `(α_min, 1)`; `α = 1 − 1e−9` is returned and `α_min` is located
/// by bisection. `γ = L_Z²/α + 2L_g/√α + 1`.
pub fn select_contraction_parameters(lip: Lipschitz, beta: f64) -> Result<ContractionConfig, PicardError> {
    let minimal = lip.beta_threshold();
    if !(beta > minimal) {
        return Err(PicardError::BetaTooSmall { beta, minimal });
    }
    let alpha = 1.0 - tol::ALPHA_RESOLUTION;
    if !(beta > alpha_bound(&lip, alpha)) {
        return Err(PicardError::BetaTooSmall { beta, minimal });
    }
    let alpha_min = if beta > alpha_bound(&lip, tol::ALPHA_RESOLUTION) {
        tol::ALPHA_RESOLUTION
    } else {
        // invariant: lo infeasible, hi feasible
        let (mut lo, mut hi) = (tol::ALPHA_RESOLUTION, alpha);
        while hi - lo > tol::ALPHA_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if beta > alpha_bound(&lip, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(ContractionConfig {
        beta,
        gamma: gamma_for(&lip, alpha) + 1.0,
        alpha,
        alpha_min,
        lipschitz: lip,
        max_iter: DEFAULT_MAX_ITER,
        tol: DEFAULT_TOL,
    })
}

impl ContractionConfig {
    pub fn with_limits(mut self, max_iter: usize, tol: f64) -> Self {
        self.max_iter = max_iter;
        self.tol = tol;
        self
    }

    /// Both strict inequalities at the chosen `α` for the given constants.
    pub fn is_feasible_for(&self, lip: &Lipschitz) -> bool {
        self.alpha > 0.0
            && self.alpha < 1.0
            && self.beta > alpha_bound(lip, self.alpha)
            && self.gamma > gamma_for(lip, self.alpha)
    }
}

/// A candidate `(Y, U, Z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub y: NodeProcess,
    pub u: MarkProcess,
    pub z: NodeProcess,
}

impl Iterate {
    pub fn zeros(tree: &ScenarioTree) -> Self {
        Self { y: NodeProcess::zeros(tree), u: MarkProcess::zeros(tree), z: NodeProcess::zeros(tree) }
    }

    pub fn from_solution(tree: &ScenarioTree, sol: &RbsdeSolution) -> Self {
        Self { y: sol.y.clone(), u: sol.u.clone(), z: sol.z_or_zero(tree) }
    }
}

pub fn composite_distance_iterates(tree: &ScenarioTree, a: &Iterate, b: &Iterate, cfg: &ContractionConfig) -> f64 {
    let norm = |kind| WeightedNorm { kind, beta: cfg.beta, gamma: cfg.gamma };
    let dy = a.y.zip_with(&b.y, |x, y| x - y);
    let du = a.u.zip_with(&b.u, |x, y| x - y);
    let dz = a.z.zip_with(&b.z, |x, y| x - y);
    let sa = cfg.alpha.sqrt();
    let lip = &cfg.lipschitz;
    // kinds match their inputs, so the norms cannot fail
    let d2 = lip.f / sa * norm_sq(tree, &dy, &norm(NormKind::A)).unwrap_or(0.0)
        + lip.g / sa * norm_sq(tree, &dy, &norm(NormKind::W)).unwrap_or(0.0)
        + norm_sq(tree, &du, &norm(NormKind::P)).unwrap_or(0.0)
        + norm_sq(tree, &dz, &norm(NormKind::W)).unwrap_or(0.0);
    d2.max(0.0).sqrt()
}

pub fn composite_distance(tree: &ScenarioTree, a: &RbsdeSolution, b: &RbsdeSolution, cfg: &ContractionConfig) -> f64 {
    composite_distance_iterates(tree, &Iterate::from_solution(tree, a), &Iterate::from_solution(tree, b), cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardTrace {
    /// `distances[i] = d(x_{i+1}, x_i)`.
    pub distances: Vec<f64>,
    pub solution: RbsdeSolution,
    /// Generators frozen at the previous iterate that produced `solution`.
    pub frozen: FrozenGenerators,
    pub converged: bool,
    pub skorohod: SkorohodReport,
    pub equation: EquationResidual,
}

impl PicardTrace {
    pub fn iterations(&self) -> usize {
        self.distances.len()
    }

    /// `d_{i+1}/d_i` for `i ≥ 0`.
    pub fn ratios(&self) -> Vec<f64> {
        self.distances.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect()
    }

    /// Largest ratio from index `from` on.
    pub fn max_ratio_from(&self, from: usize) -> f64 {
        self.ratios().into_iter().skip(from).fold(0.0, f64::max)
    }
}

/// Iterate `Γ` from `init` (zeros by default) until the composite distance
/// between successive iterates is at most `cfg.tol`.
pub fn picard_solve(
    tree: &ScenarioTree,
    gen: &GeneratorSpec,
    cfg: &ContractionConfig,
    init: Option<&Iterate>,
) -> Result<PicardTrace, PicardError> {
    if !cfg.is_feasible_for(&gen.lipschitz) {
        return Err(PicardError::Infeasible {
            beta: cfg.beta,
            gamma: cfg.gamma,
            alpha: cfg.alpha,
            lipschitz: gen.lipschitz,
        });
    }
    let mut x = init.cloned().unwrap_or_else(|| Iterate::zeros(tree));
    let mut distances = Vec::new();
    loop {
        let frozen = FrozenGenerators::evaluate(tree, gen.driver.as_ref(), &x.y, &x.u, &x.z);
        let sol = solve_frozen(tree, gen, &frozen);
        let next = Iterate::from_solution(tree, &sol);
        let d = composite_distance_iterates(tree, &next, &x, cfg);
        distances.push(d);
        let converged = d <= cfg.tol;
        if converged || distances.len() >= cfg.max_iter {
            let skorohod = check_skorohod(tree, &sol, &gen.barrier);
            let equation = check_equation_residual(tree, &sol, &frozen);
            let trace = PicardTrace { distances, solution: sol, frozen, converged, skorohod, equation };
            return if converged { Ok(trace) } else { Err(PicardError::NoConvergence(Box::new(trace))) };
        }
        x = next;
    }
}
