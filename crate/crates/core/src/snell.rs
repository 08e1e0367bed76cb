//! Snell envelope by backward induction and its Doob–Meyer decomposition.
//!
//! In discrete time the compensator increment `ΔK_k = R_k − E[R_{k+1} | F_k]`
//! is known at level `k` and applies over `(t_k, t_{k+1}]`, so `K` is
//! predictable and purely discontinuous; there is no continuous part.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{conditional_expectation, NodeId, NodeProcess, ScenarioTree};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnellError {
    #[error("process is not a supermartingale at node {node}: conditional drift {drift:e}")]
    NotSupermartingale { node: NodeId, drift: f64 },
}

/// `R = M − K` with `M` a martingale and `K` predictable nondecreasing, `K_0 = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnellDecomposition {
    pub envelope: NodeProcess,
    pub martingale: NodeProcess,
    /// Cumulative `K`.
    pub compensator: NodeProcess,
    /// `ΔK` decided at each node (zero at leaves).
    pub increments: NodeProcess,
}

/// Smallest supermartingale dominating `eta`: `R_N = η_N`,
/// `R_k = max(η_k, E[R_{k+1} | node])`.
pub fn snell_envelope(tree: &ScenarioTree, eta: &NodeProcess) -> NodeProcess {
    let mut r = eta.clone();
    for k in (0..tree.steps()).rev() {
        for id in tree.ids(k) {
            let cont = conditional_expectation(tree, &r, id);
            r.set(id, eta.get(id).max(cont));
        }
    }
    r
}

pub fn doob_meyer(tree: &ScenarioTree, r: &NodeProcess) -> Result<SnellDecomposition, SnellError> {
    let mut increments = NodeProcess::zeros(tree);
    for id in tree.interior_ids() {
        let drift = conditional_expectation(tree, r, id) - r.get(id);
        if drift > tol::SUPERMARTINGALE {
            return Err(SnellError::NotSupermartingale { node: id, drift });
        }
        increments.set(id, (-drift).max(0.0));
    }
    let compensator = accumulate_predictable(tree, &increments);
    let martingale = r.zip_with(&compensator, |a, b| a + b);
    Ok(SnellDecomposition { envelope: r.clone(), martingale, compensator, increments })
}

/// Cumulative sum of increments decided at ancestors: `K_child = K_parent + ΔK_parent`.
pub fn accumulate_predictable(tree: &ScenarioTree, increments: &NodeProcess) -> NodeProcess {
    let mut k = NodeProcess::zeros(tree);
    for lvl in 1..=tree.steps() {
        for id in tree.ids(lvl) {
            let p = tree.parent(id).expect("non-root node has a parent");
            k.set(id, k.get(p) + increments.get(p));
        }
    }
    k
}

/// Nodes where the envelope pushes (`ΔK > 0`) while sitting strictly above
/// the reward. Empty for a genuine Snell envelope.
pub fn envelope_jump_support(
    tree: &ScenarioTree,
    dec: &SnellDecomposition,
    eta: &NodeProcess,
) -> Vec<NodeId> {
    tree.interior_ids()
        .filter(|&id| {
            dec.increments.get(id) > tol::ACTIVE_PUSH
                && (dec.envelope.get(id) - eta.get(id)).abs() > tol::ACTIVE_PUSH
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_tree, TimeGrid, TreeOptions};
    use crate::mpp::{CompensatorCurve, CompensatorSpec, MarkKernel, MarkSet};

    fn barrier_step_tree() -> ScenarioTree {
        let grid = TimeGrid::uniform(1, 1.0).unwrap();
        let marks = MarkSet::numbered(1).unwrap();
        let comp = CompensatorSpec::new(CompensatorCurve::Zero, MarkKernel::uniform(1));
        build_tree(&grid, &marks, &comp, TreeOptions::default()).unwrap()
    }

    fn barrier_step_eta(t: &ScenarioTree) -> NodeProcess {
        NodeProcess::from_fn(t, |id, n| if id.level == 0 { 0.5 } else { n.state.w })
    }

    #[test]
    fn constant_reward_is_its_own_envelope() {
        let t = barrier_step_tree();
        let eta = NodeProcess::constant(&t, -2.0);
        assert_eq!(snell_envelope(&t, &eta), eta);
    }

    #[test]
    fn barrier_step_envelope_and_decomposition() {
        let t = barrier_step_tree();
        let eta = barrier_step_eta(&t);
        let r = snell_envelope(&t, &eta);
        assert_eq!(r.get(NodeId::ROOT), 0.5);
        let dec = doob_meyer(&t, &r).unwrap();
        assert_eq!(dec.increments.get(NodeId::ROOT), 0.5);
        for c in t.children(NodeId::ROOT) {
            let dm = dec.martingale.get(c) - dec.martingale.get(NodeId::ROOT);
            assert!((dm - t.node(c).state.w).abs() < 1e-15);
        }
        assert!(envelope_jump_support(&t, &dec, &eta).is_empty());
    }

    #[test]
    fn martingale_has_no_compensator() {
        let t = barrier_step_tree();
        let r = NodeProcess::from_fn(&t, |_, n| n.state.w + 1.0);
        let dec = doob_meyer(&t, &r).unwrap();
        assert_eq!(dec.compensator.max_abs(), 0.0);
        assert_eq!(dec.martingale, r);
    }

    #[test]
    fn submartingale_is_rejected() {
        let t = barrier_step_tree();
        let r = NodeProcess::from_fn(&t, |id, _| id.level as f64);
        assert!(matches!(doob_meyer(&t, &r), Err(SnellError::NotSupermartingale { .. })));
    }

    #[test]
    fn slack_supermartingale_violates_jump_support() {
        let t = barrier_step_tree();
        let eta = barrier_step_eta(&t);
        let mut r = snell_envelope(&t, &eta);
        r.set(NodeId::ROOT, r.get(NodeId::ROOT) + 1.0);
        let dec = doob_meyer(&t, &r).unwrap();
        assert_eq!(envelope_jump_support(&t, &dec, &eta), vec![NodeId::ROOT]);
    }
}
