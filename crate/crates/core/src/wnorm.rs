//! Weighted `L²` norms on a scenario tree.
//!
//! Increments carry left-endpoint weights `e^{βA_k + γt_k}`:
//!
//! ```text
//! A:  Σ_k E[e^{βA_k+γt_k} x_k² ΔA_k]
//! W:  Σ_k E[e^{βA_k+γt_k} x_k² Δ_k]
//! p:  Σ_k E[e^{βA_k+γt_k} Σ_e x_k(e)² φ_k(e) ΔA_k]
//! ```
//!
//! and `A+λ` is the sum of the `A` and `W` kinds. Only levels `k < N` carry
//! mass; leaf values are ignored.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{MarkProcess, NodeId, NodeProcess, ScenarioTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WNormError {
    #[error("weights must be nonnegative (β = {beta}, γ = {gamma})")]
    NegativeWeight { beta: f64, gamma: f64 },
    #[error("β must be positive for the Cauchy bound")]
    BetaZero,
    #[error("{kind:?} norm applied to a {input} process")]
    KindMismatch { kind: NormKind, input: &'static str },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    A,
    P,
    W,
    APlusLambda,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub kind: NormKind,
    pub beta: f64,
    pub gamma: f64,
}

impl WeightedNorm {
    pub fn new(kind: NormKind, beta: f64, gamma: f64) -> Result<Self, WNormError> {
        if !(beta >= 0.0 && gamma >= 0.0 && beta.is_finite() && gamma.is_finite()) {
            return Err(WNormError::NegativeWeight { beta, gamma });
        }
        Ok(Self { kind, beta, gamma })
    }

    /// `e^{βA_k + γt_k}` at `id`.
    pub fn weight(&self, tree: &ScenarioTree, id: NodeId) -> f64 {
        (self.beta * tree.node(id).state.a + self.gamma * tree.grid().time(id.level)).exp()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum NormInput<'a> {
    Scalar(&'a NodeProcess),
    Marked(&'a MarkProcess),
}

impl<'a> From<&'a NodeProcess> for NormInput<'a> {
    fn from(p: &'a NodeProcess) -> Self {
        NormInput::Scalar(p)
    }
}

impl<'a> From<&'a MarkProcess> for NormInput<'a> {
    fn from(p: &'a MarkProcess) -> Self {
        NormInput::Marked(p)
    }
}

pub fn norm_sq<'a>(tree: &ScenarioTree, x: impl Into<NormInput<'a>>, w: &WeightedNorm) -> Result<f64, WNormError> {
    let x = x.into();
    let mut total = 0.0;
    for id in tree.interior_ids() {
        let node = tree.node(id);
        let dt = tree.grid().dt(id.level);
        let mass = match (w.kind, x) {
            (NormKind::A, NormInput::Scalar(p)) => p.get(id).powi(2) * node.d_a,
            (NormKind::W, NormInput::Scalar(p)) => p.get(id).powi(2) * dt,
            (NormKind::APlusLambda, NormInput::Scalar(p)) => p.get(id).powi(2) * (node.d_a + dt),
            (NormKind::P, NormInput::Marked(u)) => {
                let phi = tree.kernel(id.level);
                u.get(id).iter().zip(phi).map(|(ue, pe)| ue * ue * pe).sum::<f64>() * node.d_a
            }
            (kind, NormInput::Scalar(_)) => return Err(WNormError::KindMismatch { kind, input: "scalar" }),
            (kind, NormInput::Marked(_)) => return Err(WNormError::KindMismatch { kind, input: "mark-indexed" }),
        };
        if mass != 0.0 {
            total += node.path_prob * w.weight(tree, id) * mass;
        }
    }
    Ok(total)
}

pub fn norm<'a>(tree: &ScenarioTree, x: impl Into<NormInput<'a>>, w: &WeightedNorm) -> Result<f64, WNormError> {
    norm_sq(tree, x, w).map(f64::sqrt)
}

/// `∫_{a0}^{a0+Δa} e^{βa} da`, equal to `e^{βa0}Δa` when `β = 0`.
pub fn exp_weight_integral(beta: f64, a0: f64, d_a: f64) -> f64 {
    if beta == 0.0 {
        d_a
    } else {
        (beta * a0).exp() * (beta * d_a).exp_m1() / beta
    }
}

/// Both sides of `(∫f dA)² ≤ β^{−1} ∫ e^{βA} f² dA`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyBound {
    /// `max_paths (Σ f ΔA)²`.
    pub lhs: f64,
    /// `β^{−1} max_paths Σ f² ∫e^{βA}dA`.
    pub rhs: f64,
    /// Largest `lhs − rhs` along a single path (≤ 0 when the bound holds path-wise).
    pub max_path_excess: f64,
}

impl CauchyBound {
    pub fn holds(&self) -> bool {
        self.max_path_excess <= 1e-12 && self.lhs <= self.rhs + 1e-12
    }
}

/// Path-wise check of the elementary Cauchy–Schwarz bound for a
/// piecewise-constant `f`. Step weights integrate `e^{βA}` exactly over
/// each `[A_k, A_{k+1}]`, which keeps the bound valid for any `βΔA`.
pub fn cauchy_weight_bound(tree: &ScenarioTree, f: &NodeProcess, beta: f64) -> Result<CauchyBound, WNormError> {
    if beta == 0.0 {
        return Err(WNormError::BetaZero);
    }
    if !(beta > 0.0) {
        return Err(WNormError::NegativeWeight { beta, gamma: 0.0 });
    }
    let mut lin = NodeProcess::zeros(tree);
    let mut sq = NodeProcess::zeros(tree);
    for k in 1..=tree.steps() {
        for id in tree.ids(k) {
            let p = tree.parent(id).expect("non-root node has a parent");
            let pn = tree.node(p);
            let fv = f.get(p);
            lin.set(id, lin.get(p) + fv * pn.d_a);
            sq.set(id, sq.get(p) + fv * fv * exp_weight_integral(beta, pn.state.a, pn.d_a));
        }
    }
    let (mut lhs, mut rhs, mut excess) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for leaf in tree.leaf_ids() {
        let l = lin.get(leaf).powi(2);
        let r = sq.get(leaf) / beta;
        lhs = lhs.max(l);
        rhs = rhs.max(r);
        excess = excess.max(l - r);
    }
    Ok(CauchyBound { lhs, rhs, max_path_excess: excess })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_tree, TimeGrid, TreeOptions};
    use crate::mpp::{CompensatorCurve, CompensatorSpec, MarkKernel, MarkSet};
    use std::f64::consts::LN_2;

    fn tree(n: usize, horizon: f64, rate: f64) -> ScenarioTree {
        let grid = TimeGrid::uniform(n, horizon).unwrap();
        let marks = MarkSet::numbered(1).unwrap();
        let comp = CompensatorSpec::new(CompensatorCurve::Linear { rate }, MarkKernel::uniform(1));
        build_tree(&grid, &marks, &comp, TreeOptions::default()).unwrap()
    }

    #[test]
    fn zero_and_lebesgue_mass() {
        let t = tree(3, 1.5, 0.2);
        let w = WeightedNorm::new(NormKind::W, 0.0, 0.0).unwrap();
        assert_eq!(norm_sq(&t, &NodeProcess::zeros(&t), &w).unwrap(), 0.0);
        let one = NodeProcess::constant(&t, 1.0);
        assert!((norm_sq(&t, &one, &w).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn single_jump_mark_norm() {
        let t = tree(1, 1.0, LN_2);
        let mut u = MarkProcess::zeros(&t);
        u.get_mut(NodeId::ROOT)[0] = 1.0;
        let w = WeightedNorm::new(NormKind::P, 0.0, 0.0).unwrap();
        assert!((norm_sq(&t, &u, &w).unwrap() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn kind_mismatch() {
        let t = tree(1, 1.0, 0.5);
        let w = WeightedNorm::new(NormKind::P, 0.0, 0.0).unwrap();
        assert!(matches!(norm_sq(&t, &NodeProcess::zeros(&t), &w), Err(WNormError::KindMismatch { .. })));
    }

    #[test]
    fn cauchy_linear_compensator() {
        let t = tree(4, 1.0, 1.0);
        let f = NodeProcess::constant(&t, 1.0);
        let b = cauchy_weight_bound(&t, &f, 1.0).unwrap();
        assert!((b.lhs - 1.0).abs() < 1e-14);
        assert!((b.rhs - (1f64.exp() - 1.0)).abs() < 1e-12);
        assert!(b.holds());
        assert_eq!(cauchy_weight_bound(&t, &f, 0.0), Err(WNormError::BetaZero));
        let z = cauchy_weight_bound(&t, &NodeProcess::zeros(&t), 1.0).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
    }

    #[test]
    fn weight_integral_limits() {
        assert_eq!(exp_weight_integral(0.0, 3.0, 0.5), 0.5);
        assert!((exp_weight_integral(1e-9, 0.0, 0.5) - 0.5).abs() < 1e-9);
        assert!((exp_weight_integral(1.0, 0.0, 1.0) - (1f64.exp() - 1.0)).abs() < 1e-15);
    }
}
