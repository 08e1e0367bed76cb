//! Optimal stopping on the tree.
//!
//! A stopping rule is a set of nodes; a path stops at the first node of the
//! set it meets, and at its leaf if it meets none. On a non-recombining tree
//! a node-measurable decision is exactly an adapted one. The reward of a rule
//! started at node `o` is
//!
//! ```text
//! E[ Σ_{o ≤ j < τ} (f_j ΔA_j + g_j Δ_j) + h_τ 1{τ < N} + ξ 1{τ = N} | o ].
//! ```
//!
//! The brute-force oracle enumerates every rule on small trees and evaluates
//! rewards path by path, without backward induction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{NodeId, NodeProcess, ScenarioTree};
use crate::rbsde::{FrozenGenerators, GeneratorSpec, RbsdeSolution};
use crate::tol;

/// Largest subtree (in interior nodes) the oracle will enumerate.
pub const ENUMERATION_CAP: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoppingError {
    #[error("subtree at {origin} has {interior} interior nodes; enumeration is capped at {cap}")]
    EnumerationBudgetExceeded { origin: NodeId, interior: usize, cap: usize },
}

/// First-entry stop set below `origin`. Leaves are always stop nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub origin: NodeId,
    /// Interior first-entry stop nodes, in breadth-first order.
    pub stops: Vec<NodeId>,
}

/// Interior nodes of the subtree at `origin`, breadth-first.
pub fn subtree_interior(tree: &ScenarioTree, origin: NodeId) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut frontier = vec![origin];
    while !frontier.is_empty() && frontier[0].level < tree.steps() {
        out.extend_from_slice(&frontier);
        frontier = frontier.iter().flat_map(|&id| tree.children(id)).collect();
    }
    out
}

pub fn subtree_leaves(tree: &ScenarioTree, origin: NodeId) -> Vec<NodeId> {
    let mut frontier = vec![origin];
    while frontier[0].level < tree.steps() {
        frontier = frontier.iter().flat_map(|&id| tree.children(id)).collect();
    }
    frontier
}

impl StoppingRule {
    /// Stop at the first node (below `origin`) satisfying `pred`.
    pub fn first_entry(tree: &ScenarioTree, origin: NodeId, pred: impl Fn(NodeId) -> bool) -> Self {
        let mut stops = Vec::new();
        let mut frontier = vec![origin];
        while !frontier.is_empty() && frontier[0].level < tree.steps() {
            let mut next = Vec::new();
            for id in frontier {
                if pred(id) {
                    stops.push(id);
                } else {
                    next.extend(tree.children(id));
                }
            }
            frontier = next;
        }
        Self { origin, stops }
    }

    pub fn leaves_only(origin: NodeId) -> Self {
        Self { origin, stops: Vec::new() }
    }

    pub fn at_origin(tree: &ScenarioTree, origin: NodeId) -> Self {
        if origin.level == tree.steps() {
            Self::leaves_only(origin)
        } else {
            Self { origin, stops: vec![origin] }
        }
    }

    /// Node where the path through `leaf` stops.
    pub fn stop_node(&self, tree: &ScenarioTree, leaf: NodeId) -> NodeId {
        tree.path_to(leaf)[self.origin.level..]
            .iter()
            .copied()
            .find(|id| self.stops.contains(id))
            .unwrap_or(leaf)
    }

    /// Stop level for each leaf of the subtree, in leaf order.
    pub fn stop_levels(&self, tree: &ScenarioTree) -> Vec<usize> {
        subtree_leaves(tree, self.origin).into_iter().map(|l| self.stop_node(tree, l).level).collect()
    }

    /// `self` stops no later than `other` on every path.
    pub fn pathwise_le(&self, tree: &ScenarioTree, other: &StoppingRule) -> bool {
        self.stop_levels(tree).iter().zip(other.stop_levels(tree)).all(|(a, b)| *a <= b)
    }
}

/// Per-node payoff when stopping there, relative to the running integral.
struct Payoffs {
    running: NodeProcess,
    stop_value: NodeProcess,
}

impl Payoffs {
    fn new(tree: &ScenarioTree, gen: &GeneratorSpec, frozen: &FrozenGenerators) -> Self {
        let running = frozen.running_integral(tree);
        let mut stop_value = gen.barrier.clone();
        for (leaf, xi) in tree.leaf_ids().zip(&gen.terminal) {
            stop_value.set(leaf, *xi);
        }
        Self { running, stop_value }
    }

    fn at(&self, origin: NodeId, s: NodeId) -> f64 {
        self.running.get(s) - self.running.get(origin) + self.stop_value.get(s)
    }
}

/// Expected reward of `rule`, summed leaf by leaf.
pub fn reward_of_rule(
    tree: &ScenarioTree,
    gen: &GeneratorSpec,
    frozen: &FrozenGenerators,
    rule: &StoppingRule,
) -> f64 {
    let pay = Payoffs::new(tree, gen, frozen);
    let base = tree.node(rule.origin).path_prob;
    subtree_leaves(tree, rule.origin)
        .into_iter()
        .map(|leaf| tree.node(leaf).path_prob / base * pay.at(rule.origin, rule.stop_node(tree, leaf)))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingCertificate {
    pub value: f64,
    pub best_rule: StoppingRule,
    /// Rewards of every enumerated rule, when the table is small.
    pub all_values: Option<Vec<f64>>,
    pub epsilon: f64,
    pub enumerated: usize,
    /// Rules within the oracle tolerance of the optimum.
    pub optimal_rules: Vec<StoppingRule>,
    /// Discrete barriers always qualify for the left-USCE hypothesis.
    pub left_usce_surrogate: bool,
}

const VALUE_TABLE_LIMIT: usize = 1024;

pub fn brute_force_value(
    tree: &ScenarioTree,
    gen: &GeneratorSpec,
    frozen: &FrozenGenerators,
) -> Result<StoppingCertificate, StoppingError> {
    brute_force_value_at(tree, gen, frozen, NodeId::ROOT)
}

/// Enumerate every first-entry rule of the subtree at `origin`.
///
/// Rules correspond one-to-one to antichains of interior nodes, encoded as
/// bit masks in breadth-first order (first node = most significant bit).
/// Among tied maxima the numerically largest mask, i.e. the earliest stop
/// set in level-lexicographic order, wins.
pub fn brute_force_value_at(
    tree: &ScenarioTree,
    gen: &GeneratorSpec,
    frozen: &FrozenGenerators,
    origin: NodeId,
) -> Result<StoppingCertificate, StoppingError> {
    let interior = subtree_interior(tree, origin);
    let n = interior.len();
    if n > ENUMERATION_CAP {
        return Err(StoppingError::EnumerationBudgetExceeded { origin, interior: n, cap: ENUMERATION_CAP });
    }
    let pay = Payoffs::new(tree, gen, frozen);
    let base = tree.node(origin).path_prob;
    let bit = |i: usize| 1u32 << (n - 1 - i);
    let pos = |id: NodeId| interior.iter().position(|&x| x == id);
    // per node: mask of strict interior ancestors within the subtree
    let ancestors: Vec<u32> = interior
        .iter()
        .map(|&id| {
            tree.path_to(id)[origin.level..]
                .iter()
                .filter(|&&a| a != id)
                .filter_map(|&a| pos(a))
                .fold(0, |m, i| m | bit(i))
        })
        .collect();
    // per leaf: (weight, [(bit, payoff)] along the path, leaf payoff)
    let leaves: Vec<(f64, Vec<(u32, f64)>, f64)> = subtree_leaves(tree, origin)
        .into_iter()
        .map(|leaf| {
            let path = tree.path_to(leaf)[origin.level..leaf.level]
                .iter()
                .map(|&a| (bit(pos(a).expect("interior ancestor")), pay.at(origin, a)))
                .collect();
            (tree.node(leaf).path_prob / base, path, pay.at(origin, leaf))
        })
        .collect();
    let is_antichain = |mask: u32| {
        (0..n).all(|i| mask & bit(i) == 0 || mask & ancestors[i] == 0)
    };
    let reward = |mask: u32| -> f64 {
        leaves
            .iter()
            .map(|(w, path, leaf_pay)| {
                let v = path.iter().find(|(b, _)| mask & b != 0).map_or(*leaf_pay, |(_, p)| *p);
                w * v
            })
            .sum()
    };
    let rules: Vec<(u32, f64)> = (0..(1u64 << n))
        .into_par_iter()
        .map(|m| m as u32)
        .filter(|&m| is_antichain(m))
        .map(|m| (m, reward(m)))
        .collect();
    let value = rules.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let best_mask = rules
        .iter()
        .filter(|r| r.1 >= value - tol::ENUMERATION_TIE)
        .map(|r| r.0)
        .max()
        .expect("at least the leaves-only rule exists");
    let to_rule = |mask: u32| StoppingRule {
        origin,
        stops: (0..n).filter(|&i| mask & bit(i) != 0).map(|i| interior[i]).collect(),
    };
    let optimal_rules = rules
        .iter()
        .filter(|r| r.1 >= value - tol::ORACLE_AGREEMENT)
        .map(|r| to_rule(r.0))
        .collect();
    Ok(StoppingCertificate {
        value,
        best_rule: to_rule(best_mask),
        all_values: (rules.len() <= VALUE_TABLE_LIMIT).then(|| rules.iter().map(|r| r.1).collect()),
        epsilon: 0.0,
        enumerated: rules.len(),
        optimal_rules,
        left_usce_surrogate: true,
    })
}

/// Number of first-entry rules below `origin`: `R = 1 + Π R(children)`, leaves 1.
pub fn rule_count(tree: &ScenarioTree, origin: NodeId) -> u128 {
    if origin.level == tree.steps() {
        return 1;
    }
    1u128.saturating_add(tree.children(origin).map(|c| rule_count(tree, c)).fold(1u128, u128::saturating_mul))
}

/// `D^ε`: stop at the first node where `Y ≤ h + ε`.
pub fn epsilon_optimal_time(tree: &ScenarioTree, sol: &RbsdeSolution, h: &NodeProcess, epsilon: f64) -> StoppingRule {
    StoppingRule::first_entry(tree, NodeId::ROOT, |id| sol.y.get(id) <= h.get(id) + epsilon)
}

/// `τ* = D^0`. Contact `Y = h` is detected up to a relative rounding slack
/// of `1e−12`: a continuation value that averages to the barrier may land
/// an ulp above it.
pub fn smallest_optimal_time(tree: &ScenarioTree, sol: &RbsdeSolution, h: &NodeProcess) -> StoppingRule {
    StoppingRule::first_entry(tree, NodeId::ROOT, |id| {
        let hv = h.get(id);
        sol.y.get(id) <= hv + tol::ACTIVE_PUSH * hv.abs().max(1.0)
    })
}

/// Largest `K` accumulated strictly before the stop node over all paths.
pub fn k_flatness_before_stop(tree: &ScenarioTree, sol: &RbsdeSolution, rule: &StoppingRule) -> f64 {
    let k0 = sol.k.get(rule.origin);
    subtree_leaves(tree, rule.origin)
        .into_iter()
        .map(|leaf| sol.k.get(rule.stop_node(tree, leaf)) - k0)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_tree, TimeGrid, TreeOptions};
    use crate::mpp::{CompensatorCurve, CompensatorSpec, MarkKernel, MarkSet};
    use crate::rbsde::{solve_given_generators, AffineDriver, Driver};
    use std::sync::Arc;

    fn barrier_step() -> (ScenarioTree, GeneratorSpec, FrozenGenerators) {
        let grid = TimeGrid::uniform(1, 1.0).unwrap();
        let marks = MarkSet::numbered(1).unwrap();
        let comp = CompensatorSpec::new(CompensatorCurve::Zero, MarkKernel::uniform(1));
        let t = build_tree(&grid, &marks, &comp, TreeOptions::default()).unwrap();
        let driver: Arc<dyn Driver> = Arc::new(AffineDriver::default());
        let xi = t.level(1).iter().map(|n| n.state.w).collect();
        let h = NodeProcess::from_fn(&t, |id, _| if id.level == 0 { 0.5 } else { -10.0 });
        let gen = GeneratorSpec::new(&t, xi, h, driver, 1.0, 0.5).unwrap();
        let frozen = FrozenGenerators::at_zero(&t, gen.driver.as_ref());
        (t, gen, frozen)
    }

    #[test]
    fn barrier_step_two_rules() {
        let (t, gen, frozen) = barrier_step();
        let root = StoppingRule::at_origin(&t, NodeId::ROOT);
        assert_eq!(reward_of_rule(&t, &gen, &frozen, &root), 0.5);
        assert_eq!(reward_of_rule(&t, &gen, &frozen, &StoppingRule::leaves_only(NodeId::ROOT)), 0.0);
        let cert = brute_force_value(&t, &gen, &frozen).unwrap();
        assert_eq!(cert.value, 0.5);
        assert_eq!(cert.best_rule, root);
        assert_eq!(cert.enumerated, 2);
        assert_eq!(rule_count(&t, NodeId::ROOT), 2);
    }

    #[test]
    fn barrier_step_stopping_times() {
        let (t, gen, _) = barrier_step();
        let sol = solve_given_generators(&t, &gen).unwrap();
        let tau = smallest_optimal_time(&t, &sol, &gen.barrier);
        assert_eq!(tau.stops, vec![NodeId::ROOT]);
        let d = epsilon_optimal_time(&t, &sol, &gen.barrier, 0.1);
        assert_eq!(k_flatness_before_stop(&t, &sol, &d), 0.0);
        // stopping after the reflection node picks up the push
        let late = StoppingRule::leaves_only(NodeId::ROOT);
        assert_eq!(k_flatness_before_stop(&t, &sol, &late), 0.5);
    }

    #[test]
    fn inactive_barrier_stops_at_leaves() {
        let (t, mut gen, _) = barrier_step();
        gen.barrier = NodeProcess::constant(&t, -10.0);
        let sol = solve_given_generators(&t, &gen).unwrap();
        assert!(smallest_optimal_time(&t, &sol, &gen.barrier).stops.is_empty());
    }

    #[test]
    fn rule_counts_match_enumeration() {
        let grid = TimeGrid::uniform(3, 3.0).unwrap();
        let marks = MarkSet::numbered(1).unwrap();
        let comp = CompensatorSpec::new(CompensatorCurve::Zero, MarkKernel::uniform(1));
        let t = build_tree(&grid, &marks, &comp, TreeOptions::default()).unwrap();
        let driver: Arc<dyn Driver> = Arc::new(AffineDriver::default());
        let gen = GeneratorSpec::new(&t, vec![0.0; 8], NodeProcess::constant(&t, -1.0), driver, 1.0, 0.5).unwrap();
        let frozen = FrozenGenerators::at_zero(&t, gen.driver.as_ref());
        let cert = brute_force_value(&t, &gen, &frozen).unwrap();
        assert_eq!(rule_count(&t, NodeId::ROOT), 26);
        assert_eq!(cert.enumerated, 26);
        assert_eq!(cert.value, 0.0);
        assert!(cert.best_rule.stops.is_empty());
    }
}
