//! Finite scenario tree carrying Brownian and jump/mark branching.
//!
//! Each non-terminal node at level `k` has up to `2(1+m)` children: the
//! Brownian increment is `±√Δ_k` with factor 1/2 each, and independently the
//! jump outcome is "no jump" with factor `e^{−ΔA}` or mark `e` with factor
//! `(1 − e^{−ΔA})·φ_{t_k}(e)`. Branches of zero probability are pruned, so
//! `ΔA = 0` yields a plain binomial tree. With Brownian branching disabled
//! the only Brownian outcome is a zero increment.
//!
//! The tree is non-recombining: every node is a distinct path prefix, so any
//! adapted (path-dependent) quantity is a plain per-node value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mpp::{jump_probability, CompensatorSpec, MarkSet, MppError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("tree needs {required} nodes, budget is {budget}")]
    BudgetExceeded { required: u128, budget: usize },
    #[error(transparent)]
    Mpp(#[from] MppError),
}

/// `0 = t_0 < t_1 < … < t_N = T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(steps: usize, horizon: f64) -> Result<Self, LatticeError> {
        if steps == 0 {
            return Err(LatticeError::InvalidGrid("at least one step is required".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(LatticeError::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        let mut times: Vec<f64> =
            (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
        times[steps] = horizon;
        Self::from_times(times)
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self, LatticeError> {
        if times.len() < 2 {
            return Err(LatticeError::InvalidGrid("at least one step is required".into()));
        }
        if times[0] != 0.0 {
            return Err(LatticeError::InvalidGrid("grid must start at 0".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LatticeError::InvalidGrid("times must be finite and strictly increasing".into()));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    /// `Δ_k = t_{k+1} − t_k`.
    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub level: usize,
    pub index: usize,
}

impl NodeId {
    pub const ROOT: NodeId = NodeId { level: 0, index: 0 };

    pub fn new(level: usize, index: usize) -> Self {
        Self { level, index }
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.level, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BrownianMove {
    Up,
    Down,
    Flat,
}

/// Label of the branch leading into a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub brownian: BrownianMove,
    pub mark: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    /// Cumulative Brownian value `W_{t_k}`.
    pub w: f64,
    /// Jump count `N_{t_k}`.
    pub n: u32,
    pub last_mark: Option<usize>,
    /// Cumulative compensator `A_{t_k}`.
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub branch: Option<Branch>,
    /// Conditional probability of the branch from the parent.
    pub prob: f64,
    /// Unconditional probability of the path prefix.
    pub path_prob: f64,
    pub state: NodeState,
    /// Compensator increment over the next step (0 at leaves).
    pub d_a: f64,
    first_child: usize,
    child_count: usize,
}

impl TreeNode {
    pub fn child_range(&self) -> std::ops::Range<usize> {
        self.first_child..self.first_child + self.child_count
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeOptions {
    pub brownian: bool,
    pub budget: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self { brownian: true, budget: 2_000_000 }
    }
}

impl TreeOptions {
    pub fn jumps_only() -> Self {
        Self { brownian: false, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub level_sizes: Vec<usize>,
    pub node_count: usize,
    pub leaf_mass: f64,
    pub brownian: bool,
    pub marks: usize,
}

#[derive(Clone, Debug)]
pub struct ScenarioTree {
    grid: TimeGrid,
    marks: MarkSet,
    compensator: CompensatorSpec,
    brownian: bool,
    kernels: Vec<Vec<f64>>,
    levels: Vec<Vec<TreeNode>>,
}

/// Node count of the tree [`build_tree`] would produce.
pub fn required_nodes(
    grid: &TimeGrid,
    marks: &MarkSet,
    comp: &CompensatorSpec,
    brownian: bool,
) -> Result<u128, LatticeError> {
    comp.validate(marks)?;
    let base = comp.increments(grid)?;
    let nb: u128 = if brownian { 2 } else { 1 };
    let mut width: u128 = 1;
    let mut total: u128 = 1;
    for (k, &d) in base.iter().enumerate() {
        let outcomes = if d > 0.0 {
            1 + comp.kernel_at(grid.time(k)).iter().filter(|&&w| w > 0.0).count() as u128
        } else {
            1
        };
        width = width.saturating_mul(nb * outcomes);
        total = total.saturating_add(width);
    }
    Ok(total)
}

/// Build the full non-recombining tree.
pub fn build_tree(
    grid: &TimeGrid,
    marks: &MarkSet,
    comp: &CompensatorSpec,
    options: TreeOptions,
) -> Result<ScenarioTree, LatticeError> {
    comp.validate(marks)?;
    let required = required_nodes(grid, marks, comp, options.brownian)?;
    if required > options.budget as u128 {
        return Err(LatticeError::BudgetExceeded { required, budget: options.budget });
    }
    let base = comp.increments(grid)?;
    let n_steps = grid.steps();
    let kernels: Vec<Vec<f64>> = (0..n_steps).map(|k| comp.kernel_at(grid.time(k)).to_vec()).collect();
    let moves: &[BrownianMove] =
        if options.brownian { &[BrownianMove::Up, BrownianMove::Down] } else { &[BrownianMove::Flat] };

    let root_state = NodeState { w: 0.0, n: 0, last_mark: None, a: 0.0 };
    let root = TreeNode {
        parent: None,
        branch: None,
        prob: 1.0,
        path_prob: 1.0,
        state: root_state,
        d_a: if n_steps > 0 { comp.scaled_increment(base[0], 0) } else { 0.0 },
        first_child: 0,
        child_count: 0,
    };
    let mut levels = vec![vec![root]];
    for k in 0..n_steps {
        let sqrt_dt = grid.dt(k).sqrt();
        let phi = &kernels[k];
        let mut next: Vec<TreeNode> = Vec::new();
        for (i, node) in levels[k].iter_mut().enumerate() {
            node.first_child = next.len();
            let p_jump = jump_probability(node.d_a);
            let p_stay = (-node.d_a).exp();
            let mut outcomes: Vec<(Option<usize>, f64)> = Vec::with_capacity(1 + phi.len());
            if p_stay > 0.0 {
                outcomes.push((None, p_stay));
            }
            if node.d_a > 0.0 {
                for (e, &w) in phi.iter().enumerate() {
                    let p = p_jump * w;
                    if p > 0.0 {
                        outcomes.push((Some(e), p));
                    }
                }
            }
            let b_factor = 1.0 / moves.len() as f64;
            for &mv in moves {
                let dw = match mv {
                    BrownianMove::Up => sqrt_dt,
                    BrownianMove::Down => -sqrt_dt,
                    BrownianMove::Flat => 0.0,
                };
                for &(mark, pj) in &outcomes {
                    let prob = b_factor * pj;
                    let n = node.state.n + u32::from(mark.is_some());
                    let d_a = if k + 1 < n_steps { comp.scaled_increment(base[k + 1], n) } else { 0.0 };
                    next.push(TreeNode {
                        parent: Some(i),
                        branch: Some(Branch { brownian: mv, mark }),
                        prob,
                        path_prob: node.path_prob * prob,
                        state: NodeState {
                            w: node.state.w + dw,
                            n,
                            last_mark: mark.or(node.state.last_mark),
                            a: node.state.a + node.d_a,
                        },
                        d_a,
                        first_child: 0,
                        child_count: 0,
                    });
                }
            }
            node.child_count = next.len() - node.first_child;
        }
        levels.push(next);
    }
    Ok(ScenarioTree {
        grid: grid.clone(),
        marks: marks.clone(),
        compensator: comp.clone(),
        brownian: options.brownian,
        kernels,
        levels,
    })
}

impl ScenarioTree {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn marks(&self) -> &MarkSet {
        &self.marks
    }

    pub fn mark_count(&self) -> usize {
        self.marks.len()
    }

    pub fn compensator(&self) -> &CompensatorSpec {
        &self.compensator
    }

    pub fn has_brownian(&self) -> bool {
        self.brownian
    }

    /// Number of steps `N`; levels run `0..=N`.
    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn level(&self, k: usize) -> &[TreeNode] {
        &self.levels[k]
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.levels[id.level][id.index]
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn interior_count(&self) -> usize {
        self.levels[..self.steps()].iter().map(Vec::len).sum()
    }

    /// Mark kernel `φ_{t_k}` used on step `k`.
    pub fn kernel(&self, k: usize) -> &[f64] {
        &self.kernels[k]
    }

    pub fn ids(&self, k: usize) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.levels[k].len()).map(move |i| NodeId::new(k, i))
    }

    pub fn all_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..=self.steps()).flat_map(move |k| self.ids(k))
    }

    pub fn interior_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.steps()).flat_map(move |k| self.ids(k))
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids(self.steps())
    }

    pub fn children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let r = self.node(id).child_range();
        r.map(move |i| NodeId::new(id.level + 1, i))
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.node(id).parent.map(|p| NodeId::new(id.level - 1, p))
    }

    /// Root-to-node path, root first.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Brownian increment on the branch into `child`.
    pub fn dw(&self, child: NodeId) -> f64 {
        let node = self.node(child);
        match node.branch.map(|b| b.brownian) {
            Some(BrownianMove::Up) => self.grid.dt(child.level - 1).sqrt(),
            Some(BrownianMove::Down) => -self.grid.dt(child.level - 1).sqrt(),
            _ => 0.0,
        }
    }

    /// Mark on the branch into `child`, if a jump happened there.
    pub fn jump_mark(&self, child: NodeId) -> Option<usize> {
        self.node(child).branch.and_then(|b| b.mark)
    }

    /// Compensator weights `(1 − e^{−ΔA})·φ(e)` of the step leaving `id`.
    pub fn jump_weights(&self, id: NodeId) -> Vec<f64> {
        let p = jump_probability(self.node(id).d_a);
        self.kernel(id.level).iter().map(|w| p * w).collect()
    }

    pub fn leaf_mass(&self) -> f64 {
        self.levels[self.steps()].iter().map(|n| n.path_prob).sum()
    }

    pub fn summary(&self) -> TreeSummary {
        TreeSummary {
            level_sizes: self.level_sizes(),
            node_count: self.node_count(),
            leaf_mass: self.leaf_mass(),
            brownian: self.brownian,
            marks: self.mark_count(),
        }
    }

    /// `E[v]` from leaf values weighted by path probability.
    pub fn expect_leaves(&self, leaf_values: &[f64]) -> f64 {
        self.levels[self.steps()].iter().zip(leaf_values).map(|(n, v)| n.path_prob * v).sum()
    }

    /// Martingale `E[X | node]` generated by leaf values, by backward averaging.
    pub fn martingale_from_leaves(&self, leaf_values: &[f64]) -> NodeProcess {
        let mut p = NodeProcess::zeros(self);
        p.levels[self.steps()].copy_from_slice(leaf_values);
        for k in (0..self.steps()).rev() {
            for id in self.ids(k) {
                let v = conditional_expectation(self, &p, id);
                p.set(id, v);
            }
        }
        p
    }
}

/// Real-valued process on every node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeProcess {
    levels: Vec<Vec<f64>>,
}

impl NodeProcess {
    pub fn zeros(tree: &ScenarioTree) -> Self {
        Self { levels: tree.levels.iter().map(|l| vec![0.0; l.len()]).collect() }
    }

    pub fn constant(tree: &ScenarioTree, c: f64) -> Self {
        Self { levels: tree.levels.iter().map(|l| vec![c; l.len()]).collect() }
    }

    pub fn from_fn<F>(tree: &ScenarioTree, mut f: F) -> Self
    where
        F: FnMut(NodeId, &TreeNode) -> f64,
    {
        Self {
            levels: tree
                .levels
                .iter()
                .enumerate()
                .map(|(k, l)| l.iter().enumerate().map(|(i, n)| f(NodeId::new(k, i), n)).collect())
                .collect(),
        }
    }

    pub fn get(&self, id: NodeId) -> f64 {
        self.levels[id.level][id.index]
    }

    pub fn set(&mut self, id: NodeId, v: f64) {
        self.levels[id.level][id.index] = v;
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.levels[k]
    }

    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().flatten().copied()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { levels: self.levels.iter().map(|l| l.iter().map(|&x| f(x)).collect()).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            levels: self
                .levels
                .iter()
                .zip(&other.levels)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values().zip(other.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values().map(f64::abs).fold(0.0, f64::max)
    }
}

/// Mark-indexed process: an `m`-vector on every node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkProcess {
    marks: usize,
    levels: Vec<Vec<f64>>,
}

impl MarkProcess {
    pub fn zeros(tree: &ScenarioTree) -> Self {
        let m = tree.mark_count();
        Self { marks: m, levels: tree.levels.iter().map(|l| vec![0.0; l.len() * m]).collect() }
    }

    pub fn marks(&self) -> usize {
        self.marks
    }

    pub fn get(&self, id: NodeId) -> &[f64] {
        &self.levels[id.level][id.index * self.marks..(id.index + 1) * self.marks]
    }

    pub fn get_mut(&mut self, id: NodeId) -> &mut [f64] {
        &mut self.levels[id.level][id.index * self.marks..(id.index + 1) * self.marks]
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().flatten().copied()
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            marks: self.marks,
            levels: self
                .levels
                .iter()
                .zip(&other.levels)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values().zip(other.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `E[v_{k+1} | node]`: probability-weighted average over the children.
pub fn conditional_expectation(tree: &ScenarioTree, v: &NodeProcess, node: NodeId) -> f64 {
    tree.children(node).map(|c| tree.node(c).prob * v.get(c)).sum()
}

/// One-step martingale representation of `v_{k+1}` at `node`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    /// `E[v | node]`.
    pub mean: f64,
    pub z: f64,
    pub u: Vec<f64>,
    /// `L²` norm of the unexplained part under the child measure.
    pub residual: f64,
    /// Unexplained part on each child, in child order.
    pub branch_residuals: Vec<f64>,
    /// Marks whose conditioning event has probability zero (`u(e) := 0`).
    pub degenerate_marks: Vec<usize>,
}

/// `z = E[v ΔW]/Δ`, `u(e) = E[v | mark e] − E[v | no jump]`, and the residual
/// `v − E[v] − zΔW − Σ_e u(e)(1_{e} − (1−e^{−ΔA})φ(e))`.
pub fn extract_representation(tree: &ScenarioTree, v: &NodeProcess, node: NodeId) -> Representation {
    let m = tree.mark_count();
    let dt = tree.grid().dt(node.level);
    let comp_weights = tree.jump_weights(node);
    let mut mean = 0.0;
    let mut cov_w = 0.0;
    let mut mass = vec![0.0; m + 1];
    let mut sums = vec![0.0; m + 1];
    for c in tree.children(node) {
        let p = tree.node(c).prob;
        let x = v.get(c);
        mean += p * x;
        cov_w += p * x * tree.dw(c);
        let slot = tree.jump_mark(c).map_or(0, |e| e + 1);
        mass[slot] += p;
        sums[slot] += p * x;
    }
    let z = if tree.has_brownian() { cov_w / dt } else { 0.0 };
    let base = if mass[0] > 0.0 { Some(sums[0] / mass[0]) } else { None };
    let mut u = vec![0.0; m];
    let mut degenerate_marks = Vec::new();
    for e in 0..m {
        match base {
            Some(b) if mass[e + 1] > 0.0 => u[e] = sums[e + 1] / mass[e + 1] - b,
            _ => degenerate_marks.push(e),
        }
    }
    let mut sq = 0.0;
    let branch_residuals: Vec<f64> = tree
        .children(node)
        .map(|c| {
            let mark = tree.jump_mark(c);
            let jump_part: f64 = (0..m)
                .map(|e| u[e] * (f64::from(u8::from(mark == Some(e))) - comp_weights[e]))
                .sum();
            let r = v.get(c) - mean - z * tree.dw(c) - jump_part;
            sq += tree.node(c).prob * r * r;
            r
        })
        .collect();
    Representation { mean, z, u, residual: sq.sqrt(), branch_residuals, degenerate_marks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpp::{CompensatorCurve, MarkKernel};
    use std::f64::consts::LN_2;

    fn tree(n: usize, m: usize, rate: f64, brownian: bool) -> ScenarioTree {
        let grid = TimeGrid::uniform(n, n as f64).unwrap();
        let marks = MarkSet::numbered(m).unwrap();
        let comp = CompensatorSpec::new(CompensatorCurve::Linear { rate }, MarkKernel::uniform(m));
        build_tree(&grid, &marks, &comp, TreeOptions { brownian, ..TreeOptions::default() }).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::uniform(0, 1.0).is_err());
        assert!(TimeGrid::from_times(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::from_times(vec![0.1, 0.5]).is_err());
        let g = TimeGrid::uniform(3, 1.5).unwrap();
        assert_eq!(g.horizon(), 1.5);
        assert_eq!(g.steps(), 3);
    }

    #[test]
    fn one_step_one_mark_has_four_leaves() {
        let t = tree(1, 1, 0.3, true);
        let probs: Vec<f64> = t.level(1).iter().map(|n| n.prob).collect();
        let q = (-0.3f64).exp();
        let mut expect = vec![0.5 * q, 0.5 * (1.0 - q), 0.5 * q, 0.5 * (1.0 - q)];
        let mut got = probs.clone();
        expect.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((t.leaf_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_compensator_gives_binomial_tree() {
        let t = tree(3, 2, 0.0, true);
        assert_eq!(t.level_sizes(), vec![1, 2, 4, 8]);
        assert!(t.level(3).iter().all(|n| n.state.n == 0));
    }

    #[test]
    fn two_steps_two_marks_ln2_enumerated() {
        let t = tree(2, 2, LN_2, true);
        assert_eq!(t.level(2).len(), 36);
        // single-branch factors: 1/2 · {1/2 (no jump), 1/4 (mark 1), 1/4 (mark 2)}
        for leaf in t.leaf_ids() {
            let p: f64 = t.path_to(leaf)[1..]
                .iter()
                .map(|&id| 0.5 * if t.jump_mark(id).is_some() { 0.25 } else { 0.5 })
                .product();
            assert!((t.node(leaf).path_prob - p).abs() < 1e-15);
        }
        assert!((t.leaf_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let grid = TimeGrid::uniform(8, 1.0).unwrap();
        let marks = MarkSet::numbered(3).unwrap();
        let comp = CompensatorSpec::new(CompensatorCurve::Linear { rate: 1.0 }, MarkKernel::uniform(3));
        let err = build_tree(&grid, &marks, &comp, TreeOptions::default()).unwrap_err();
        match err {
            LatticeError::BudgetExceeded { required, .. } => {
                let expect: u128 = (0..=8).map(|k| 8u128.pow(k)).sum();
                assert_eq!(required, expect);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn node_count_matches_formula() {
        let t = tree(3, 1, 0.5, true);
        assert_eq!(t.node_count(), 1 + 4 + 16 + 64);
        let j = tree(3, 2, 0.5, false);
        assert_eq!(j.node_count(), 1 + 3 + 9 + 27);
    }

    #[test]
    fn conditional_expectation_examples() {
        let t = tree(1, 1, LN_2, true);
        let c = NodeProcess::constant(&t, 3.5);
        assert!((conditional_expectation(&t, &c, NodeId::ROOT) - 3.5).abs() < 1e-15);
        let dw = NodeProcess::from_fn(&t, |id, _| if id.level == 0 { 0.0 } else { t.dw(id) });
        assert!(conditional_expectation(&t, &dw, NodeId::ROOT).abs() < 1e-15);
        let n1 = NodeProcess::from_fn(&t, |_, n| f64::from(n.state.n));
        assert!((conditional_expectation(&t, &n1, NodeId::ROOT) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn representation_examples() {
        let t = tree(1, 1, LN_2, true);
        let c = NodeProcess::constant(&t, 2.0);
        let r = extract_representation(&t, &c, NodeId::ROOT);
        assert_eq!((r.z, r.u[0]), (0.0, 0.0));
        assert!(r.residual < 1e-15);

        let w = NodeProcess::from_fn(&t, |_, n| n.state.w);
        let r = extract_representation(&t, &w, NodeId::ROOT);
        assert!((r.z - 1.0).abs() < 1e-15 && r.u[0].abs() < 1e-15 && r.residual < 1e-15);

        let n = NodeProcess::from_fn(&t, |_, n| f64::from(n.state.n));
        let r = extract_representation(&t, &n, NodeId::ROOT);
        assert!((r.u[0] - 1.0).abs() < 1e-15 && r.z.abs() < 1e-15 && r.residual < 1e-15);
    }

    #[test]
    fn missing_jump_branches_are_flagged() {
        let t = tree(1, 2, 0.0, true);
        let w = NodeProcess::from_fn(&t, |_, n| n.state.w);
        let r = extract_representation(&t, &w, NodeId::ROOT);
        assert_eq!(r.degenerate_marks, vec![0, 1]);
        assert_eq!(r.u, vec![0.0, 0.0]);
    }

    #[test]
    fn tower_property() {
        let t = tree(3, 2, 0.7, true);
        let leaves: Vec<f64> = t.level(3).iter().map(|n| n.state.w.sin() + f64::from(n.state.n).powi(2)).collect();
        let mart = t.martingale_from_leaves(&leaves);
        assert!((mart.get(NodeId::ROOT) - t.expect_leaves(&leaves)).abs() < 1e-12);
    }
}
