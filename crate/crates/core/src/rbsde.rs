//! Reflected BSDE on a scenario tree.
//!
//! With generators frozen to known processes `f_k`, `g_k` the one-step
//! scheme is explicit:
//!
//! ```text
//! Y_N = ξ
//! Ỹ_k = E[Y_{k+1} | F_k] + f_k ΔA_k + g_k Δ_k
//! Y_k = max(Ỹ_k, h_k),   ΔK_k = (h_k − Ỹ_k)⁺
//! ```
//!
//! and `(Z_k, U_k)` come from the one-step representation of `Y_{k+1}`. The
//! push `ΔK_k` is positive only when `Y_k = h_k`, which is the discrete
//! Skorohod condition `(Y_k − h_k)·ΔK_k = 0`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{
    conditional_expectation, extract_representation, MarkProcess, NodeId, NodeProcess, NodeState,
    ScenarioTree,
};
use crate::snell::{self, SnellDecomposition, SnellError};
use crate::tol;
use crate::wnorm::exp_weight_integral;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RbsdeError {
    #[error("terminal payoff has {got} values, tree has {expected} leaves")]
    TerminalShape { got: usize, expected: usize },
    #[error("barrier does not cover the tree")]
    BarrierShape,
    #[error("non-finite {what} at node {node}")]
    NonFinite { what: &'static str, node: NodeId },
    #[error("barrier {h} exceeds terminal payoff {xi} at leaf {leaf}")]
    BarrierAboveTerminal { leaf: NodeId, h: f64, xi: f64 },
    #[error("β must be nonnegative and δ positive (β = {beta}, δ = {delta})")]
    InvalidWeights { beta: f64, delta: f64 },
    #[error("mark weights have {got} entries, expected {expected}")]
    MarkWeightsShape { got: usize, expected: usize },
    #[error("stated Lipschitz constants {stated:?} are below the certified {certified:?}")]
    LipschitzUnderstated { stated: Lipschitz, certified: Lipschitz },
    #[error("generator depends on the solution; use the Picard solver")]
    StateDependentGenerator,
    #[error("tree was built with Brownian branching")]
    BrownianBranchesPresent,
    #[error("the dt-generator g must vanish in MPP-only mode (|g| = {0} at some node)")]
    BrownianDriverPresent(f64),
    #[error(transparent)]
    Snell(#[from] SnellError),
}

/// `(L_f, L_U, L_g, L_Z)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Lipschitz {
    pub f: f64,
    pub u: f64,
    pub g: f64,
    pub z: f64,
}

impl Lipschitz {
    pub const ZERO: Lipschitz = Lipschitz { f: 0.0, u: 0.0, g: 0.0, z: 0.0 };

    pub fn dominates(&self, other: &Lipschitz) -> bool {
        self.f >= other.f && self.u >= other.u && self.g >= other.g && self.z >= other.z
    }

    /// Smallest admissible `β` is anything above `L_U² + 2L_f`.
    pub fn beta_threshold(&self) -> f64 {
        self.u * self.u + 2.0 * self.f
    }
}

/// Where a generator is being evaluated.
#[derive(Clone, Copy, Debug)]
pub struct NodeContext<'a> {
    pub id: NodeId,
    pub time: f64,
    pub state: &'a NodeState,
    /// `φ_{t_k}`.
    pub kernel: &'a [f64],
}

/// Generators `f(t, y, u)` (against `dA`) and `g(t, y, z)` (against `dt`).
pub trait Driver: Send + Sync + fmt::Debug {
    fn f(&self, ctx: &NodeContext<'_>, y: f64, u: &[f64]) -> f64;
    fn g(&self, ctx: &NodeContext<'_>, y: f64, z: f64) -> f64;
    /// Certified global Lipschitz constants.
    fn lipschitz(&self) -> Lipschitz;

    fn is_state_free(&self) -> bool {
        self.lipschitz() == Lipschitz::ZERO
    }
}

/// State-free part `c + c_t·t + c_w·w + c_n·n (+ table[node])`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub time: f64,
    #[serde(default)]
    pub w: f64,
    #[serde(default)]
    pub n: f64,
    #[serde(skip)]
    pub table: Option<NodeProcess>,
}

impl Drift {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, ..Self::default() }
    }

    pub fn table(p: NodeProcess) -> Self {
        Self { table: Some(p), ..Self::default() }
    }

    pub fn eval(&self, ctx: &NodeContext<'_>) -> f64 {
        self.constant
            + self.time * ctx.time
            + self.w * ctx.state.w
            + self.n * f64::from(ctx.state.n)
            + self.table.as_ref().map_or(0.0, |t| t.get(ctx.id))
    }
}

fn clip(x: f64, bound: Option<f64>) -> f64 {
    match bound {
        Some(b) => x.clamp(-b, b),
        None => x,
    }
}

/// `f = clip(a·y + b·Σ_e c_e φ(e) u(e)) + drift`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineF {
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub u: f64,
    /// Per-mark weights `c`; empty means all ones.
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub drift: Drift,
    #[serde(default)]
    pub clip: Option<f64>,
}

/// `g = clip(a·y + b·z) + drift`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineG {
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub z: f64,
    #[serde(default)]
    pub drift: Drift,
    #[serde(default)]
    pub clip: Option<f64>,
}

/// Affine and clipped-affine generators with certified constants.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineDriver {
    #[serde(default)]
    pub f: AffineF,
    #[serde(default)]
    pub g: AffineG,
}

impl AffineDriver {
    /// Given (state-free) generators from tabulated processes.
    pub fn given(f: NodeProcess, g: NodeProcess) -> Self {
        Self {
            f: AffineF { drift: Drift::table(f), ..AffineF::default() },
            g: AffineG { drift: Drift::table(g), ..AffineG::default() },
        }
    }
}

impl Driver for AffineDriver {
    fn f(&self, ctx: &NodeContext<'_>, y: f64, u: &[f64]) -> f64 {
        let weighted: f64 = if self.f.u == 0.0 {
            0.0
        } else {
            u.iter()
                .zip(ctx.kernel)
                .enumerate()
                .map(|(e, (ue, phi))| self.f.weights.get(e).copied().unwrap_or(1.0) * phi * ue)
                .sum()
        };
        clip(self.f.y * y + self.f.u * weighted, self.f.clip) + self.f.drift.eval(ctx)
    }

    fn g(&self, ctx: &NodeContext<'_>, y: f64, z: f64) -> f64 {
        clip(self.g.y * y + self.g.z * z, self.g.clip) + self.g.drift.eval(ctx)
    }

    fn lipschitz(&self) -> Lipschitz {
        let c_max = if self.f.weights.is_empty() {
            1.0
        } else {
            self.f.weights.iter().map(|c| c.abs()).fold(0.0, f64::max)
        };
        Lipschitz { f: self.f.y.abs(), u: self.f.u.abs() * c_max, g: self.g.y.abs(), z: self.g.z.abs() }
    }
}

/// Problem data `(ξ, f, g, h)` with constants and weights.
#[derive(Clone)]
pub struct GeneratorSpec {
    /// Terminal payoff, indexed by leaf.
    pub terminal: Vec<f64>,
    pub barrier: NodeProcess,
    pub driver: Arc<dyn Driver>,
    pub lipschitz: Lipschitz,
    pub beta: f64,
    pub delta: f64,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("leaves", &self.terminal.len())
            .field("driver", &self.driver)
            .field("lipschitz", &self.lipschitz)
            .field("beta", &self.beta)
            .field("delta", &self.delta)
            .finish()
    }
}

impl GeneratorSpec {
    pub fn new(
        tree: &ScenarioTree,
        terminal: Vec<f64>,
        barrier: NodeProcess,
        driver: Arc<dyn Driver>,
        beta: f64,
        delta: f64,
    ) -> Result<Self, RbsdeError> {
        let leaves = tree.level(tree.steps()).len();
        if terminal.len() != leaves {
            return Err(RbsdeError::TerminalShape { got: terminal.len(), expected: leaves });
        }
        if barrier.levels() != tree.steps() + 1
            || (0..=tree.steps()).any(|k| barrier.level(k).len() != tree.level(k).len())
        {
            return Err(RbsdeError::BarrierShape);
        }
        if !(beta >= 0.0 && beta.is_finite() && delta > 0.0 && delta.is_finite()) {
            return Err(RbsdeError::InvalidWeights { beta, delta });
        }
        for id in tree.all_ids() {
            if !barrier.get(id).is_finite() {
                return Err(RbsdeError::NonFinite { what: "barrier", node: id });
            }
        }
        for (leaf, &xi) in tree.leaf_ids().zip(&terminal) {
            if !xi.is_finite() {
                return Err(RbsdeError::NonFinite { what: "terminal payoff", node: leaf });
            }
            let h = barrier.get(leaf);
            if h > xi {
                return Err(RbsdeError::BarrierAboveTerminal { leaf, h, xi });
            }
        }
        let lipschitz = driver.lipschitz();
        Ok(Self { terminal, barrier, driver, lipschitz, beta, delta })
    }

    /// Replace the certified constants by larger stated ones.
    pub fn with_lipschitz(mut self, stated: Lipschitz) -> Result<Self, RbsdeError> {
        let certified = self.driver.lipschitz();
        if !stated.dominates(&certified) {
            return Err(RbsdeError::LipschitzUnderstated { stated, certified });
        }
        self.lipschitz = stated;
        Ok(self)
    }
}

/// Generators evaluated into known processes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenGenerators {
    pub f: NodeProcess,
    pub g: NodeProcess,
}

impl FrozenGenerators {
    pub fn new(f: NodeProcess, g: NodeProcess) -> Self {
        Self { f, g }
    }

    /// `f(·, P, Q)` and `g(·, P, R)` at every interior node.
    pub fn evaluate(
        tree: &ScenarioTree,
        driver: &dyn Driver,
        p: &NodeProcess,
        q: &MarkProcess,
        r: &NodeProcess,
    ) -> Self {
        let mut f = NodeProcess::zeros(tree);
        let mut g = NodeProcess::zeros(tree);
        for id in tree.interior_ids() {
            let ctx = NodeContext {
                id,
                time: tree.grid().time(id.level),
                state: &tree.node(id).state,
                kernel: tree.kernel(id.level),
            };
            f.set(id, driver.f(&ctx, p.get(id), q.get(id)));
            g.set(id, driver.g(&ctx, p.get(id), r.get(id)));
        }
        Self { f, g }
    }

    pub fn at_zero(tree: &ScenarioTree, driver: &dyn Driver) -> Self {
        Self::evaluate(
            tree,
            driver,
            &NodeProcess::zeros(tree),
            &MarkProcess::zeros(tree),
            &NodeProcess::zeros(tree),
        )
    }

    /// Running integral `Σ_{j<k} (f_j ΔA_j + g_j Δ_j)` along each path.
    pub fn running_integral(&self, tree: &ScenarioTree) -> NodeProcess {
        let mut incr = NodeProcess::zeros(tree);
        for id in tree.interior_ids() {
            incr.set(id, self.increment(tree, id));
        }
        snell::accumulate_predictable(tree, &incr)
    }

    fn increment(&self, tree: &ScenarioTree, id: NodeId) -> f64 {
        self.f.get(id) * tree.node(id).d_a + self.g.get(id) * tree.grid().dt(id.level)
    }
}

/// `(Y, U, Z, K)` plus representation diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbsdeSolution {
    pub y: NodeProcess,
    pub u: MarkProcess,
    /// `None` in MPP-only mode.
    pub z: Option<NodeProcess>,
    /// Cumulative push, `K_0 = 0`.
    pub k: NodeProcess,
    /// Push decided at each node.
    pub dk: NodeProcess,
    /// Per-node `L²` representation residual.
    pub residual: NodeProcess,
    /// Residual on the branch into each node.
    pub branch_residual: NodeProcess,
    /// Number of (node, mark) pairs whose jump branch was absent.
    pub degenerate_marks: usize,
}

impl RbsdeSolution {
    pub fn z_or_zero(&self, tree: &ScenarioTree) -> NodeProcess {
        self.z.clone().unwrap_or_else(|| NodeProcess::zeros(tree))
    }
}

/// Solve with state-free generators.
pub fn solve_given_generators(tree: &ScenarioTree, gen: &GeneratorSpec) -> Result<RbsdeSolution, RbsdeError> {
    if !gen.driver.is_state_free() {
        return Err(RbsdeError::StateDependentGenerator);
    }
    let frozen = FrozenGenerators::at_zero(tree, gen.driver.as_ref());
    Ok(solve_frozen(tree, gen, &frozen))
}

/// The explicit reflected recursion with the given frozen generators; `ξ` and
/// `h` are taken from `gen`, its driver is ignored.
pub fn solve_frozen(tree: &ScenarioTree, gen: &GeneratorSpec, frozen: &FrozenGenerators) -> RbsdeSolution {
    let n = tree.steps();
    let mut y = NodeProcess::zeros(tree);
    y.level_mut(n).copy_from_slice(&gen.terminal);
    let mut u = MarkProcess::zeros(tree);
    let mut z = NodeProcess::zeros(tree);
    let mut dk = NodeProcess::zeros(tree);
    let mut residual = NodeProcess::zeros(tree);
    let mut branch_residual = NodeProcess::zeros(tree);
    let mut degenerate_marks = 0;
    for k in (0..n).rev() {
        for id in tree.ids(k) {
            let rep = extract_representation(tree, &y, id);
            let pre = rep.mean + frozen.increment(tree, id);
            let h = gen.barrier.get(id);
            y.set(id, pre.max(h));
            dk.set(id, (h - pre).max(0.0));
            z.set(id, rep.z);
            u.get_mut(id).copy_from_slice(&rep.u);
            residual.set(id, rep.residual);
            for (c, r) in tree.children(id).zip(&rep.branch_residuals) {
                branch_residual.set(c, *r);
            }
            degenerate_marks += rep.degenerate_marks.len();
        }
    }
    let k_cum = snell::accumulate_predictable(tree, &dk);
    RbsdeSolution { y, u, z: Some(z), k: k_cum, dk, residual, branch_residual, degenerate_marks }
}

/// Jump-only recursion (no `Z`, `g ≡ 0`).
pub fn solve_mpp_only(tree: &ScenarioTree, gen: &GeneratorSpec) -> Result<RbsdeSolution, RbsdeError> {
    if !gen.driver.is_state_free() {
        return Err(RbsdeError::StateDependentGenerator);
    }
    let frozen = FrozenGenerators::at_zero(tree, gen.driver.as_ref());
    solve_frozen_mpp(tree, gen, &frozen)
}

pub fn solve_frozen_mpp(
    tree: &ScenarioTree,
    gen: &GeneratorSpec,
    frozen: &FrozenGenerators,
) -> Result<RbsdeSolution, RbsdeError> {
    if tree.has_brownian() {
        return Err(RbsdeError::BrownianBranchesPresent);
    }
    let g_max = frozen.g.max_abs();
    if g_max > 0.0 {
        return Err(RbsdeError::BrownianDriverPresent(g_max));
    }
    let n = tree.steps();
    let m = tree.mark_count();
    let mut y = NodeProcess::zeros(tree);
    y.level_mut(n).copy_from_slice(&gen.terminal);
    let mut u = MarkProcess::zeros(tree);
    let mut dk = NodeProcess::zeros(tree);
    let mut residual = NodeProcess::zeros(tree);
    let mut branch_residual = NodeProcess::zeros(tree);
    let mut degenerate_marks = 0;
    for k in (0..n).rev() {
        for id in tree.ids(k) {
            let mut cont = 0.0;
            let mut stay = None;
            let mut jump = vec![None; m];
            for c in tree.children(id) {
                let v = y.get(c);
                cont += tree.node(c).prob * v;
                match tree.jump_mark(c) {
                    None => stay = Some(v),
                    Some(e) => jump[e] = Some(v),
                }
            }
            let ue = u.get_mut(id);
            for e in 0..m {
                match (stay, jump[e]) {
                    (Some(s), Some(j)) => ue[e] = j - s,
                    _ => degenerate_marks += 1,
                }
            }
            let ue = ue.to_vec();
            let weights = tree.jump_weights(id);
            let mut sq = 0.0;
            for c in tree.children(id) {
                let mark = tree.jump_mark(c);
                let comp: f64 = (0..m)
                    .map(|e| ue[e] * (f64::from(u8::from(mark == Some(e))) - weights[e]))
                    .sum();
                let r = y.get(c) - cont - comp;
                sq += tree.node(c).prob * r * r;
                branch_residual.set(c, r);
            }
            residual.set(id, sq.sqrt());
            let pre = cont + frozen.f.get(id) * tree.node(id).d_a;
            let h = gen.barrier.get(id);
            y.set(id, pre.max(h));
            dk.set(id, (h - pre).max(0.0));
        }
    }
    let k_cum = snell::accumulate_predictable(tree, &dk);
    Ok(RbsdeSolution { y, u, z: None, k: k_cum, dk, residual, branch_residual, degenerate_marks })
}

/// Result of solving through the Snell envelope of `η`.
#[derive(Clone, Debug, PartialEq)]
pub struct SnellRoute {
    pub eta: NodeProcess,
    pub running: NodeProcess,
    pub decomposition: SnellDecomposition,
    /// `Y = R(η) − running integral`.
    pub y: NodeProcess,
}

/// `η_k = I_k + h_k` (`k < N`), `η_N = I_N + ξ`, where `I` is the running integral.
pub fn reward_process(tree: &ScenarioTree, gen: &GeneratorSpec, frozen: &FrozenGenerators) -> (NodeProcess, NodeProcess) {
    let running = frozen.running_integral(tree);
    let n = tree.steps();
    let mut eta = running.zip_with(&gen.barrier, |i, h| i + h);
    for (j, leaf) in tree.leaf_ids().enumerate() {
        eta.set(leaf, running.get(leaf) + gen.terminal[j]);
    }
    debug_assert_eq!(eta.levels(), n + 1);
    (eta, running)
}

pub fn solve_via_snell(
    tree: &ScenarioTree,
    gen: &GeneratorSpec,
    frozen: &FrozenGenerators,
) -> Result<SnellRoute, RbsdeError> {
    let (eta, running) = reward_process(tree, gen, frozen);
    let r = snell::snell_envelope(tree, &eta);
    let decomposition = snell::doob_meyer(tree, &r)?;
    let y = r.zip_with(&running, |a, b| a - b);
    Ok(SnellRoute { eta, running, decomposition, y })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkorohodReport {
    /// `max (Y_k − h_k)·ΔK_k`.
    pub max_product: f64,
    /// `max (−ΔK_k)⁺`.
    pub max_negative_push: f64,
    /// `max (h_k − Y_k)⁺`.
    pub max_barrier_violation: f64,
    /// Node attaining the largest product.
    pub worst_node: Option<NodeId>,
    pub passed: bool,
}

pub fn check_skorohod(tree: &ScenarioTree, sol: &RbsdeSolution, barrier: &NodeProcess) -> SkorohodReport {
    let mut max_product: f64 = 0.0;
    let mut worst_node = None;
    let mut max_negative_push: f64 = 0.0;
    let mut max_barrier_violation: f64 = 0.0;
    for id in tree.all_ids() {
        let (y, h, dk) = (sol.y.get(id), barrier.get(id), sol.dk.get(id));
        let prod = (y - h) * dk;
        if prod > max_product {
            max_product = prod;
            worst_node = Some(id);
        }
        max_negative_push = max_negative_push.max(-dk);
        max_barrier_violation = max_barrier_violation.max(h - y);
    }
    let passed = max_product <= tol::SKOROHOD
        && max_negative_push <= tol::SKOROHOD
        && max_barrier_violation <= tol::SKOROHOD;
    SkorohodReport { max_product, max_negative_push, max_barrier_violation, worst_node, passed }
}

/// `max_leaf |Y_N − ξ|`.
pub fn check_terminal(tree: &ScenarioTree, sol: &RbsdeSolution, terminal: &[f64]) -> f64 {
    tree.leaf_ids().zip(terminal).map(|(l, xi)| (sol.y.get(l) - xi).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationResidual {
    /// Residual on the branch into each node.
    pub branch: NodeProcess,
    /// Conditional mean of the branch residuals at each interior node.
    pub conditional_mean: NodeProcess,
    pub max_abs: f64,
    pub max_conditional_mean: f64,
    /// `max |‖residual‖_{L²(children)} − solution.residual|`.
    pub max_lattice_mismatch: f64,
}

/// Per-branch residual `Y_k − [Y_{k+1} + fΔA + gΔ − Σ_e U(e)Δq(e) − ZΔW + ΔK]`.
pub fn check_equation_residual(
    tree: &ScenarioTree,
    sol: &RbsdeSolution,
    frozen: &FrozenGenerators,
) -> EquationResidual {
    let z = sol.z_or_zero(tree);
    let mut branch = NodeProcess::zeros(tree);
    let mut conditional_mean = NodeProcess::zeros(tree);
    let (mut max_abs, mut max_cm, mut max_mis) = (0.0f64, 0.0f64, 0.0f64);
    for id in tree.interior_ids() {
        let weights = tree.jump_weights(id);
        let u = sol.u.get(id);
        let drive = frozen.increment(tree, id);
        let (mut mean, mut sq) = (0.0, 0.0);
        for c in tree.children(id) {
            let mark = tree.jump_mark(c);
            let dq: f64 = u
                .iter()
                .zip(&weights)
                .enumerate()
                .map(|(e, (ue, w))| ue * (f64::from(u8::from(mark == Some(e))) - w))
                .sum();
            let rhs = sol.y.get(c) + drive - dq - z.get(id) * tree.dw(c) + sol.dk.get(id);
            let r = sol.y.get(id) - rhs;
            branch.set(c, r);
            let p = tree.node(c).prob;
            mean += p * r;
            sq += p * r * r;
            max_abs = max_abs.max(r.abs());
        }
        conditional_mean.set(id, mean);
        max_cm = max_cm.max(mean.abs());
        max_mis = max_mis.max((sq.sqrt() - sol.residual.get(id)).abs());
    }
    EquationResidual {
        branch,
        conditional_mean,
        max_abs,
        max_conditional_mean: max_cm,
        max_lattice_mismatch: max_mis,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorantViolation {
    pub node: NodeId,
    pub weighted_y: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Majorant {
    /// `S_k`.
    pub bound: NodeProcess,
    pub violations: Vec<MajorantViolation>,
}

/// `S_k = E[e^{βA_N/2}|ξ| + β^{−1/2}(∫e^{βA} f² dA)^{1/2} + Σ e^{βA_j/2}|g_j|Δ_j
/// + max_{j<N} e^{βA_j/2}|h_j| | F_k]`, checked against `e^{βA_k/2}|Y_k|`.
///
/// `∫ e^{βA} dA` over a step is integrated exactly for the piecewise-constant
/// `f`. With `β = 0` the `f`-term is infinite unless `f` vanishes on the path.
pub fn a_priori_majorant(
    tree: &ScenarioTree,
    gen: &GeneratorSpec,
    frozen: &FrozenGenerators,
    sol: &RbsdeSolution,
) -> Majorant {
    let beta = gen.beta;
    let n = tree.steps();
    // forward accumulators along paths
    let mut f_acc = NodeProcess::zeros(tree);
    let mut g_acc = NodeProcess::zeros(tree);
    let mut h_max = NodeProcess::zeros(tree);
    for k in 0..=n {
        for id in tree.ids(k) {
            let node = tree.node(id);
            let (mut f_sq, mut g_sum, mut h_sup) = match tree.parent(id) {
                Some(p) => {
                    let pn = tree.node(p);
                    let f_inc = frozen.f.get(p).powi(2) * exp_weight_integral(beta, pn.state.a, pn.d_a);
                    let g_inc = (beta * pn.state.a / 2.0).exp() * frozen.g.get(p).abs() * tree.grid().dt(p.level);
                    (f_acc.get(p) + f_inc, g_acc.get(p) + g_inc, h_max.get(p))
                }
                None => (0.0, 0.0, 0.0),
            };
            if k < n {
                h_sup = h_sup.max((beta * node.state.a / 2.0).exp() * gen.barrier.get(id).abs());
            }
            f_sq = f_sq.max(0.0);
            g_sum = g_sum.max(0.0);
            f_acc.set(id, f_sq);
            g_acc.set(id, g_sum);
            h_max.set(id, h_sup);
        }
    }
    let leaf_values: Vec<f64> = tree
        .leaf_ids()
        .zip(&gen.terminal)
        .map(|(l, xi)| {
            let a = tree.node(l).state.a;
            let f_term = if f_acc.get(l) == 0.0 { 0.0 } else { f_acc.get(l).sqrt() / beta.sqrt() };
            (beta * a / 2.0).exp() * xi.abs() + f_term + g_acc.get(l) + h_max.get(l)
        })
        .collect();
    let bound = tree.martingale_from_leaves(&leaf_values);
    let violations = tree
        .all_ids()
        .filter_map(|id| {
            let weighted_y = (beta * tree.node(id).state.a / 2.0).exp() * sol.y.get(id).abs();
            let s = bound.get(id);
            (weighted_y > s + tol::MAJORANT).then_some(MajorantViolation { node: id, weighted_y, bound: s })
        })
        .collect();
    Majorant { bound, violations }
}

/// Conditional expectations `E[Y_{k+1} | node]` for all interior nodes.
pub fn continuation(tree: &ScenarioTree, y: &NodeProcess) -> NodeProcess {
    let mut c = NodeProcess::zeros(tree);
    for id in tree.interior_ids() {
        c.set(id, conditional_expectation(tree, y, id));
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_tree, TimeGrid, TreeOptions};
    use crate::mpp::{CompensatorCurve, CompensatorSpec, MarkKernel, MarkSet};
    use std::f64::consts::LN_2;

    fn make_tree(n: usize, rate: f64, brownian: bool) -> ScenarioTree {
        let grid = TimeGrid::uniform(n, n as f64).unwrap();
        let marks = MarkSet::numbered(1).unwrap();
        let curve = if rate == 0.0 { CompensatorCurve::Zero } else { CompensatorCurve::Linear { rate } };
        let comp = CompensatorSpec::new(curve, MarkKernel::uniform(1));
        build_tree(&grid, &marks, &comp, TreeOptions { brownian, ..TreeOptions::default() }).unwrap()
    }

    fn state_free(tree: &ScenarioTree, f: f64, g: f64) -> Arc<dyn Driver> {
        Arc::new(AffineDriver::given(NodeProcess::constant(tree, f), NodeProcess::constant(tree, g)))
    }

    fn spec(tree: &ScenarioTree, xi: impl Fn(&NodeState) -> f64, h: impl Fn(NodeId, &NodeState) -> f64, driver: Arc<dyn Driver>) -> GeneratorSpec {
        let terminal = tree.level(tree.steps()).iter().map(|n| xi(&n.state)).collect();
        let barrier = NodeProcess::from_fn(tree, |id, n| h(id, &n.state));
        GeneratorSpec::new(tree, terminal, barrier, driver, 1.0, 0.5).unwrap()
    }

    #[test]
    fn constant_terminal_inactive_barrier() {
        let t = make_tree(2, 0.4, true);
        let gen = spec(&t, |_| 5.0, |_, _| -10.0, state_free(&t, 0.0, 0.0));
        let sol = solve_given_generators(&t, &gen).unwrap();
        assert!(sol.y.values().all(|v| (v - 5.0).abs() < 1e-14));
        assert!(sol.u.values().fold(0.0, |a: f64, b| a.max(b.abs())) < 1e-14);
        assert!(sol.z.as_ref().unwrap().max_abs() < 1e-14);
        assert_eq!(sol.k.max_abs(), 0.0);
        let eq = check_equation_residual(&t, &sol, &FrozenGenerators::at_zero(&t, gen.driver.as_ref()));
        assert!(eq.max_abs < 1e-15);
    }

    #[test]
    fn barrier_step_fixture() {
        let t = make_tree(1, 0.0, true);
        let gen = spec(&t, |s| s.w, |id, _| if id.level == 0 { 0.5 } else { -10.0 }, state_free(&t, 0.0, 0.0));
        let sol = solve_given_generators(&t, &gen).unwrap();
        assert_eq!(sol.y.get(NodeId::ROOT), 0.5);
        assert_eq!(sol.dk.get(NodeId::ROOT), 0.5);
        assert!((sol.z.as_ref().unwrap().get(NodeId::ROOT) - 1.0).abs() < 1e-15);
        let sk = check_skorohod(&t, &sol, &gen.barrier);
        assert!(sk.passed && sk.max_product == 0.0);
    }

    #[test]
    fn single_jump_fixture_with_and_without_brownian() {
        for brownian in [true, false] {
            let t = make_tree(1, LN_2, brownian);
            let gen = spec(&t, |s| f64::from(s.n), |_, _| -10.0, state_free(&t, 0.0, 0.0));
            let sol = if brownian { solve_given_generators(&t, &gen) } else { solve_mpp_only(&t, &gen) }.unwrap();
            assert!((sol.y.get(NodeId::ROOT) - 0.5).abs() < 1e-15);
            assert!((sol.u.get(NodeId::ROOT)[0] - 1.0).abs() < 1e-15);
            assert_eq!(sol.k.max_abs(), 0.0);
            let eq = check_equation_residual(&t, &sol, &FrozenGenerators::at_zero(&t, gen.driver.as_ref()));
            assert!(eq.max_abs < 1e-15);
        }
    }

    #[test]
    fn cross_term_residual_matches_lattice() {
        let t = make_tree(1, LN_2, true);
        let gen = spec(&t, |s| s.w * f64::from(s.n), |_, _| -10.0, state_free(&t, 0.0, 0.0));
        let sol = solve_given_generators(&t, &gen).unwrap();
        let eq = check_equation_residual(&t, &sol, &FrozenGenerators::at_zero(&t, gen.driver.as_ref()));
        assert!(eq.max_conditional_mean < 1e-15);
        assert!(eq.max_abs > 0.1);
        assert!(eq.max_lattice_mismatch < 1e-15);
        // brute force over the four branches: r = ΔW (1_jump − 1/2), so |r| = 1/2
        for c in t.leaf_ids() {
            assert!((eq.branch.get(c).abs() - 0.5).abs() < 1e-15);
            assert!((eq.branch.get(c) + sol.branch_residual.get(c)).abs() < 1e-15);
        }
    }

    #[test]
    fn mpp_only_requires_jump_tree() {
        let t = make_tree(1, LN_2, true);
        let gen = spec(&t, |_| 0.0, |_, _| -10.0, state_free(&t, 0.0, 0.0));
        assert_eq!(solve_mpp_only(&t, &gen), Err(RbsdeError::BrownianBranchesPresent));
    }

    #[test]
    fn mpp_only_constant_f_integrates_compensator() {
        let t = make_tree(3, 0.3, false);
        let gen = spec(&t, |_| 0.0, |_, _| -10.0, state_free(&t, 2.0, 0.0));
        let sol = solve_mpp_only(&t, &gen).unwrap();
        assert!((sol.y.get(NodeId::ROOT) - 2.0 * 0.9).abs() < 1e-14);
        let gen_g = spec(&t, |_| 0.0, |_, _| -10.0, state_free(&t, 0.0, 1.0));
        assert!(matches!(solve_mpp_only(&t, &gen_g), Err(RbsdeError::BrownianDriverPresent(_))));
    }

    #[test]
    fn mpp_only_dominant_barrier() {
        let t = make_tree(1, 0.5, false);
        let gen = spec(&t, |_| 10.0, |_, _| 10.0, state_free(&t, 1.0, 0.0));
        let sol = solve_mpp_only(&t, &gen).unwrap();
        // ΔA = 0.5 lifts Y_0 to 10.5, strictly above the barrier: no push
        assert!((sol.y.get(NodeId::ROOT) - 10.5).abs() < 1e-15);
        assert_eq!(sol.dk.get(NodeId::ROOT), 0.0);
        let neg = spec(&t, |_| 10.0, |_, _| 10.0, state_free(&t, -1.0, 0.0));
        let sol = solve_mpp_only(&t, &neg).unwrap();
        assert_eq!(sol.y.get(NodeId::ROOT), 10.0);
        assert!((sol.dk.get(NodeId::ROOT) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn barrier_above_terminal_is_rejected() {
        let t = make_tree(1, 0.0, true);
        let err = GeneratorSpec::new(
            &t,
            vec![0.0, 0.0],
            NodeProcess::constant(&t, 1.0),
            state_free(&t, 0.0, 0.0),
            1.0,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, RbsdeError::BarrierAboveTerminal { .. }));
    }

    #[test]
    fn state_dependent_driver_is_rejected_by_given_solver() {
        let t = make_tree(1, 0.0, true);
        let driver = Arc::new(AffineDriver { f: AffineF { y: 0.1, ..AffineF::default() }, ..AffineDriver::default() });
        let gen = spec(&t, |_| 1.0, |_, _| -1.0, driver);
        assert_eq!(solve_given_generators(&t, &gen).unwrap_err(), RbsdeError::StateDependentGenerator);
    }

    #[test]
    fn lipschitz_must_not_be_understated() {
        let t = make_tree(1, 0.0, true);
        let driver = Arc::new(AffineDriver { f: AffineF { y: 0.3, ..AffineF::default() }, ..AffineDriver::default() });
        let gen = spec(&t, |_| 1.0, |_, _| -1.0, driver);
        assert!(gen.clone().with_lipschitz(Lipschitz { f: 0.1, ..Lipschitz::ZERO }).is_err());
        assert_eq!(gen.with_lipschitz(Lipschitz { f: 0.5, ..Lipschitz::ZERO }).unwrap().lipschitz.f, 0.5);
    }

    #[test]
    fn barrier_step_majorant_beta_zero() {
        let t = make_tree(1, 0.0, true);
        let mut gen = spec(&t, |s| s.w, |id, _| if id.level == 0 { 0.5 } else { -10.0 }, state_free(&t, 0.0, 0.0));
        gen.beta = 0.0;
        let sol = solve_given_generators(&t, &gen).unwrap();
        let maj = a_priori_majorant(&t, &gen, &FrozenGenerators::at_zero(&t, gen.driver.as_ref()), &sol);
        assert!((maj.bound.get(NodeId::ROOT) - 1.5).abs() < 1e-15);
        assert!(maj.violations.is_empty());
    }

    #[test]
    fn snell_route_agrees_with_direct() {
        let t = make_tree(2, 0.6, true);
        let gen = spec(
            &t,
            |s| s.w + f64::from(s.n) * 0.3,
            |id, s| if id.level == 2 { -5.0 } else { 0.2 - 0.1 * s.w },
            state_free(&t, -0.2, 0.1),
        );
        let frozen = FrozenGenerators::at_zero(&t, gen.driver.as_ref());
        let sol = solve_frozen(&t, &gen, &frozen);
        let route = solve_via_snell(&t, &gen, &frozen).unwrap();
        assert!(route.y.max_abs_diff(&sol.y) < 1e-12);
        assert!(route.decomposition.compensator.max_abs_diff(&sol.k) < 1e-12);
    }
}
