//! Property-based verification suite.
//!
//! Each criterion runs over seeded random instances (or hand fixtures) and
//! reports pass/fail plus node-level diagnostics for the first failures. The
//! given-generator solver is injectable so that a deliberately broken solver
//! can be shown to trip the checks.

use std::f64::consts::LN_2;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::instances::{self, Instance, Shape};
use crate::lattice::{build_tree, NodeId, NodeProcess, ScenarioTree, TimeGrid, TreeOptions};
use crate::mpp::{CompensatorCurve, CompensatorSpec, MarkKernel, MarkSet};
use crate::picard::{picard_solve, select_contraction_parameters};
use crate::rbsde::{
    a_priori_majorant, check_equation_residual, check_skorohod, check_terminal, solve_frozen, solve_frozen_mpp,
    solve_via_snell, AffineDriver, AffineF, AffineG, Driver, Drift, FrozenGenerators, GeneratorSpec, RbsdeSolution,
};
use crate::stopping::{
    brute_force_value_at, epsilon_optimal_time, k_flatness_before_stop, reward_of_rule, smallest_optimal_time,
};
use crate::tol;
use crate::wnorm::{norm_sq, NormKind, WeightedNorm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Small,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "small" => Ok(Scale::Small),
            "full" => Ok(Scale::Full),
            other => Err(format!("unknown scale `{other}` (expected small or full)")),
        }
    }
}

/// Given-generator solver under test.
pub type SolverFn = fn(&ScenarioTree, &GeneratorSpec, &FrozenGenerators) -> RbsdeSolution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// First few failures, with seed and node.
    pub diagnostics: Vec<String>,
    pub elapsed_secs: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {:<34} {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed_secs
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scale: Scale,
    pub criteria: Vec<CriterionReport>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn get(&self, id: u8) -> Option<&CriterionReport> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

const MAX_DIAGNOSTICS: usize = 8;

/// Collects failures for one criterion.
struct Tally {
    failures: usize,
    diagnostics: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self { failures: 0, diagnostics: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures += 1;
            if self.diagnostics.len() < MAX_DIAGNOSTICS {
                self.diagnostics.push(msg());
            }
        }
    }
}

fn report(id: u8, name: &str, start: Instant, budget_secs: Option<f64>, tally: Tally, detail: String) -> CriterionReport {
    let elapsed_secs = start.elapsed().as_secs_f64();
    let mut tally = tally;
    if let Some(b) = budget_secs {
        tally.check(elapsed_secs <= b, || format!("runtime {elapsed_secs:.2}s exceeds {b}s"));
    }
    CriterionReport {
        id,
        name: name.to_string(),
        passed: tally.failures == 0,
        detail: format!("{detail}; failures {}", tally.failures),
        diagnostics: tally.diagnostics,
        elapsed_secs,
    }
}

fn worst_node(tree: &ScenarioTree, a: &NodeProcess, b: &NodeProcess) -> (NodeId, f64) {
    tree.all_ids()
        .map(|id| (id, (a.get(id) - b.get(id)).abs()))
        .fold((NodeId::ROOT, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
}

pub struct Harness {
    pub scale: Scale,
    pub solver: SolverFn,
    /// Shifts every instance seed; 0 reproduces the reference sweep.
    pub seed_offset: u64,
}

impl Harness {
    pub fn new(scale: Scale) -> Self {
        Self { scale, solver: solve_frozen, seed_offset: 0 }
    }

    pub fn with_solver(mut self, solver: SolverFn) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_seed_offset(mut self, offset: u64) -> Self {
        self.seed_offset = offset;
        self
    }

    fn seed(&self, base: u64) -> u64 {
        self.seed_offset.wrapping_mul(100_000).wrapping_add(base)
    }

    fn extra(&self, base: u64) -> u64 {
        match self.scale {
            Scale::Small => base,
            Scale::Full => base + 20,
        }
    }

    fn solve(&self, inst: &Instance) -> RbsdeSolution {
        (self.solver)(&inst.tree, &inst.gen, &inst.frozen)
    }

    pub fn run(&self) -> VerifyReport {
        let criteria = vec![
            self.oracle_equivalence(),
            self.skorohod_suite(),
            self.route_equivalence(),
            self.picard_contraction(),
            self.epsilon_optimality(),
            self.smallest_optimal_time(),
            self.a_priori_majorant(),
            self.representation_exactness(),
            self.hand_fixtures(),
            self.mpp_only_mode(),
        ];
        VerifyReport { scale: self.scale, criteria }
    }

    pub fn run_one(&self, id: u8) -> Option<CriterionReport> {
        Some(match id {
            1 => self.oracle_equivalence(),
            2 => self.skorohod_suite(),
            3 => self.route_equivalence(),
            4 => self.picard_contraction(),
            5 => self.epsilon_optimality(),
            6 => self.smallest_optimal_time(),
            7 => self.a_priori_majorant(),
            8 => self.representation_exactness(),
            9 => self.hand_fixtures(),
            10 => self.mpp_only_mode(),
            _ => return None,
        })
    }

    fn oracle_instances(&self) -> Vec<Instance> {
        (0..self.extra(20)).map(|s| instances::random_given_instance(self.seed(1_000) + s, &Shape::oracle())).collect()
    }

    fn sweep_instances(&self) -> Vec<Instance> {
        (0..self.extra(50)).map(|s| instances::random_given_instance(self.seed(2_000) + s, &Shape::sweep())).collect()
    }

    /// Y at every node against the enumeration value of its subtree.
    pub fn oracle_equivalence(&self) -> CriterionReport {
        let start = Instant::now();
        let mut tally = Tally::new();
        let mut worst: f64 = 0.0;
        let mut reflected = 0;
        let insts = self.oracle_instances();
        for inst in &insts {
            let sol = self.solve(inst);
            if sol.k.max_abs() > tol::ACTIVE_PUSH {
                reflected += 1;
            }
            for id in inst.tree.interior_ids() {
                match brute_force_value_at(&inst.tree, &inst.gen, &inst.frozen, id) {
                    Ok(cert) => {
                        let err = (sol.y.get(id) - cert.value).abs();
                        worst = worst.max(err);
                        tally.check(err <= tol::ORACLE_AGREEMENT, || {
                            format!("seed {} node {id}: Y = {} vs oracle {}", inst.seed, sol.y.get(id), cert.value)
                        });
                    }
                    Err(e) => tally.check(false, || format!("seed {}: {e}", inst.seed)),
                }
            }
        }
        let detail = format!("{} instances ({reflected} reflected), max |Y − oracle| = {worst:.2e}", insts.len());
        report(1, "oracle equivalence", start, Some(10.0), tally, detail)
    }

    pub fn skorohod_suite(&self) -> CriterionReport {
        let start = Instant::now();
        let mut tally = Tally::new();
        let mut worst: f64 = 0.0;
        let mut pushes = 0;
        let insts = self.sweep_instances();
        for inst in &insts {
            let sol = self.solve(inst);
            pushes += sol.dk.values().filter(|&d| d > tol::ACTIVE_PUSH).count();
            let sk = check_skorohod(&inst.tree, &sol, &inst.gen.barrier);
            worst = worst.max(sk.max_product);
            tally.check(sk.passed, || {
                format!(
                    "seed {}: (Y−h)ΔK = {:.2e} at {:?}, min ΔK = {:.2e}, max (h−Y)⁺ = {:.2e}",
                    inst.seed, sk.max_product, sk.worst_node, -sk.max_negative_push, sk.max_barrier_violation
                )
            });
            let term = check_terminal(&inst.tree, &sol, &inst.gen.terminal);
            tally.check(term == 0.0, || format!("seed {}: leaf mismatch {term:.2e}", inst.seed));
        }
        let detail = format!("{} instances, {pushes} active pushes, max (Y−h)·ΔK = {worst:.2e}", insts.len());
        report(2, "Skorohod conditions", start, Some(10.0), tally, detail)
    }

    pub fn route_equivalence(&self) -> CriterionReport {
        let start = Instant::now();
        let mut tally = Tally::new();
        let mut worst: f64 = 0.0;
        let insts = self.sweep_instances();
        for inst in &insts {
            let sol = self.solve(inst);
            match solve_via_snell(&inst.tree, &inst.gen, &inst.frozen) {
                Ok(route) => {
                    let (node, err) = worst_node(&inst.tree, &sol.y, &route.y);
                    let (knode, kerr) = worst_node(&inst.tree, &sol.k, &route.decomposition.compensator);
                    worst = worst.max(err).max(kerr);
                    tally.check(err <= tol::ROUTE_AGREEMENT, || {
                        format!("seed {} node {node}: |Y_direct − Y_snell| = {err:.2e}", inst.seed)
                    });
                    tally.check(kerr <= tol::ROUTE_AGREEMENT, || {
                        format!("seed {} node {knode}: |K_direct − K_snell| = {kerr:.2e}", inst.seed)
                    });
                }
                Err(e) => tally.check(false, || format!("seed {}: {e}", inst.seed)),
            }
        }
        let detail = format!("{} instances, max route gap = {worst:.2e}", insts.len());
        report(3, "route equivalence", start, None, tally, detail)
    }

    pub fn picard_contraction(&self) -> CriterionReport {
        let start = Instant::now();
        let mut tally = Tally::new();
        let (mut max_ratio, mut max_iter, mut max_gap) = (0.0f64, 0usize, 0.0f64);
        let count = self.extra(20);
        for s in 0..count {
            let seed = self.seed(3_000) + s;
            let inst = instances::random_lipschitz_instance(seed, 3, 1);
            let cfg = match select_contraction_parameters(inst.gen.lipschitz, inst.gen.beta) {
                Ok(c) => c.with_limits(40, 1e-9),
                Err(e) => {
                    tally.check(false, || format!("seed {seed}: {e}"));
                    continue;
                }
            };
            let from_zero = picard_solve(&inst.tree, &inst.gen, &cfg, None);
            let init = instances::random_iterate(&inst.tree, seed);
            let from_random = picard_solve(&inst.tree, &inst.gen, &cfg, Some(&init));
            match (from_zero, from_random) {
                (Ok(a), Ok(b)) => {
                    for tr in [&a, &b] {
                        let r = tr.max_ratio_from(1);
                        max_ratio = max_ratio.max(r);
                        max_iter = max_iter.max(tr.iterations());
                        tally.check(r <= cfg.alpha + tol::CONTRACTION_SLACK, || {
                            format!("seed {seed}: ratio {r:.3} > α + slack ({:.3})", cfg.alpha)
                        });
                        tally.check(tr.skorohod.passed, || format!("seed {seed}: final Skorohod check failed"));
                        tally.check(tr.equation.max_conditional_mean <= tol::RESIDUAL_MEAN, || {
                            format!("seed {seed}: residual mean {:.2e}", tr.equation.max_conditional_mean)
                        });
                    }
                    let (node, gap) = worst_node(&inst.tree, &a.solution.y, &b.solution.y);
                    max_gap = max_gap.max(gap);
                    tally.check(gap <= 1e-8, || format!("seed {seed} node {node}: initialisations differ by {gap:.2e}"));
                }
                (Err(e), _) | (_, Err(e)) => tally.check(false, || format!("seed {seed}: {e}")),
            }
        }
        let detail = format!(
            "{count} instances, max ratio {max_ratio:.3}, max iterations {max_iter}, init gap {max_gap:.2e}"
        );
        report(4, "Picard contraction", start, Some(30.0), tally, detail)
    }

    pub fn epsilon_optimality(&self) -> CriterionReport {
        let start = Instant::now();
        let mut tally = Tally::new();
        let mut worst_flat: f64 = 0.0;
        let insts = self.oracle_instances();
        for inst in &insts {
            let sol = self.solve(inst);
            let y0 = sol.y.get(NodeId::ROOT);
            for eps in [0.1, 0.01, 0.001] {
                let rule = epsilon_optimal_time(&inst.tree, &sol, &inst.gen.barrier, eps);
                let reward = reward_of_rule(&inst.tree, &inst.gen, &inst.frozen, &rule);
                tally.check(y0 <= reward + eps, || {
                    format!("seed {} ε = {eps}: Y_0 = {y0} > reward {reward} + ε", inst.seed)
                });
                let flat = k_flatness_before_stop(&inst.tree, &sol, &rule);
                worst_flat = worst_flat.max(flat);
                tally.check(flat <= tol::SKOROHOD, || {
                    format!("seed {} ε = {eps}: K grows by {flat:.2e} before D^ε", inst.seed)
                });
            }
        }
        let detail = format!("{} instances × 3 ε, max K before stop = {worst_flat:.2e}", insts.len());
        report(5, "epsilon-optimal stopping", start, None, tally, detail)
    }

    pub fn smallest_optimal_time(&self) -> CriterionReport {
        let start = Instant::now();
        let mut tally = Tally::new();
        let mut insts = self.oracle_instances();
        insts.extend((0..5).map(|s| flat_instance(self.seed(4_000) + s)));
        let mut multi = 0;
        for inst in &insts {
            let sol = self.solve(inst);
            let y0 = sol.y.get(NodeId::ROOT);
            let tau = smallest_optimal_time(&inst.tree, &sol, &inst.gen.barrier);
            let reward = reward_of_rule(&inst.tree, &inst.gen, &inst.frozen, &tau);
            tally.check((reward - y0).abs() <= tol::ORACLE_AGREEMENT, || {
                format!("seed {}: reward(τ*) = {reward} vs Y_0 = {y0}", inst.seed)
            });
            match brute_force_value_at(&inst.tree, &inst.gen, &inst.frozen, NodeId::ROOT) {
                Ok(cert) => {
                    if cert.optimal_rules.len() > 1 {
                        multi += 1;
                    }
                    for rule in &cert.optimal_rules {
                        tally.check(tau.pathwise_le(&inst.tree, rule), || {
                            format!("seed {}: τ* stops later than optimal rule {:?}", inst.seed, rule.stops)
                        });
                    }
                }
                Err(e) => tally.check(false, || format!("seed {}: {e}", inst.seed)),
            }
        }
        let detail = format!("{} instances ({multi} with several optimal rules)", insts.len());
        report(6, "smallest optimal time", start, None, tally, detail)
    }

    pub fn a_priori_majorant(&self) -> CriterionReport {
        let start = Instant::now();
        let mut tally = Tally::new();
        let count = self.extra(20);
        let mut min_slack = f64::INFINITY;
        for s in 0..count {
            for beta in [0.5, 1.0, 2.0] {
                let shape = Shape { beta, ..Shape::sweep() };
                let inst = instances::random_given_instance(self.seed(5_000) + s, &shape);
                let sol = self.solve(&inst);
                let maj = a_priori_majorant(&inst.tree, &inst.gen, &inst.frozen, &sol);
                for id in inst.tree.all_ids() {
                    let lhs = (beta * inst.tree.node(id).state.a / 2.0).exp() * sol.y.get(id).abs();
                    min_slack = min_slack.min(maj.bound.get(id) - lhs);
                }
                for v in maj.violations.iter().take(2) {
                    tally.check(false, || {
                        format!("seed {} β = {beta} node {}: {} > S = {}", inst.seed, v.node, v.weighted_y, v.bound)
                    });
                }
            }
        }
        let detail = format!("{count} instances × 3 β, min slack S − e^(βA/2)|Y| = {min_slack:.3e}");
        report(7, "a priori majorant", start, None, tally, detail)
    }

    pub fn representation_exactness(&self) -> CriterionReport {
        let start = Instant::now();
        let mut tally = Tally::new();
        let count = self.extra(20);
        let mut sep_worst: f64 = 0.0;
        for s in 0..count {
            let inst = separable_instance(self.seed(6_000) + s);
            let sol = self.solve(&inst);
            let eq = check_equation_residual(&inst.tree, &sol, &inst.frozen);
            sep_worst = sep_worst.max(eq.max_abs);
            tally.check(eq.max_abs <= 1e-12, || {
                let (node, _) = worst_node(&inst.tree, &eq.branch, &NodeProcess::zeros(&inst.tree));
                format!("seed {} node {node}: separable residual {:.2e}", inst.seed, eq.max_abs)
            });
        }
        let mut cross_mean: f64 = 0.0;
        for s in 0..count {
            let inst = cross_instance(self.seed(7_000) + s);
            let sol = self.solve(&inst);
            let eq = check_equation_residual(&inst.tree, &sol, &inst.frozen);
            cross_mean = cross_mean.max(eq.max_conditional_mean);
            tally.check(eq.max_conditional_mean <= tol::RESIDUAL_MEAN, || {
                let (node, _) = worst_node(&inst.tree, &eq.conditional_mean, &NodeProcess::zeros(&inst.tree));
                format!("seed {} node {node}: residual mean {:.2e}", inst.seed, eq.max_conditional_mean)
            });
        }
        let sizes: Vec<f64> = [2, 4, 8]
            .iter()
            .map(|&n| {
                let inst = refinement_instance(n);
                let sol = self.solve(&inst);
                sol.residual.max_abs()
            })
            .collect();
        let ratios = [sizes[0] / sizes[1], sizes[1] / sizes[2]];
        for (i, r) in ratios.iter().enumerate() {
            tally.check(*r >= 1.8, || format!("refinement N = {} → {}: residual ratio {r:.3} < 1.8", 2 << i, 4 << i));
        }
        let detail = format!(
            "separable max {sep_worst:.2e}, cross mean max {cross_mean:.2e}, refinement ratios {:.3}/{:.3}",
            ratios[0], ratios[1]
        );
        report(8, "representation exactness", start, None, tally, detail)
    }

    pub fn hand_fixtures(&self) -> CriterionReport {
        let start = Instant::now();
        let mut tally = Tally::new();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;

        let step = barrier_step_instance();
        let sol = self.solve(&step);
        let (y0, z0, dk0) = (sol.y.get(NodeId::ROOT), sol.z_or_zero(&step.tree).get(NodeId::ROOT), sol.dk.get(NodeId::ROOT));
        tally.check(close(y0, 0.5) && close(z0, 1.0) && close(dk0, 0.5), || {
            format!("barrier step: Y_0 = {y0}, Z_0 = {z0}, ΔK_0 = {dk0}")
        });

        let jump = single_jump_instance();
        let sol = self.solve(&jump);
        let y0 = sol.y.get(NodeId::ROOT);
        let u0 = sol.u.get(NodeId::ROOT)[0];
        let unorm = norm_sq(&jump.tree, &sol.u, &WeightedNorm { kind: NormKind::P, beta: 0.0, gamma: 0.0 })
            .unwrap_or(f64::NAN);
        tally.check(close(y0, 0.5) && close(u0, 1.0) && close(unorm, LN_2), || {
            format!("single jump: Y_0 = {y0}, U_0(e1) = {u0}, ‖U‖² = {unorm}")
        });

        let lin = linear_instance();
        let y0 = select_contraction_parameters(lin.gen.lipschitz, lin.gen.beta)
            .map_err(|e| e.to_string())
            .and_then(|cfg| {
                picard_solve(&lin.tree, &lin.gen, &cfg.with_limits(200, 1e-14), None).map_err(|e| e.to_string())
            })
            .map(|tr| tr.solution.y.get(NodeId::ROOT));
        match y0 {
            Ok(y0) => tally.check(close(y0, 1.0 / 0.9), || format!("linear fixed point: Y_0 = {y0}")),
            Err(e) => tally.check(false, || format!("linear fixed point: {e}")),
        }
        report(9, "hand-computed fixtures", start, None, tally, "barrier step, single jump, linear fixed point".to_string())
    }

    pub fn mpp_only_mode(&self) -> CriterionReport {
        let start = Instant::now();
        let mut tally = Tally::new();
        let count = self.extra(20);
        let mut worst: f64 = 0.0;
        for s in 0..count {
            let shape = Shape { brownian: Some(false), ..Shape::sweep() };
            let inst = instances::random_given_instance(self.seed(8_000) + s, &shape);
            let full = self.solve(&inst);
            match solve_frozen_mpp(&inst.tree, &inst.gen, &inst.frozen) {
                Ok(mpp) => {
                    let (node, dy) = worst_node(&inst.tree, &full.y, &mpp.y);
                    let (_, dk) = worst_node(&inst.tree, &full.k, &mpp.k);
                    let du = full.u.max_abs_diff(&mpp.u);
                    let err = dy.max(dk).max(du);
                    worst = worst.max(err);
                    tally.check(err <= 1e-12, || {
                        format!("seed {} node {node}: |ΔY| = {dy:.2e}, |ΔU| = {du:.2e}, |ΔK| = {dk:.2e}", inst.seed)
                    });
                }
                Err(e) => tally.check(false, || format!("seed {}: {e}", inst.seed)),
            }
        }
        let detail = format!("{count} instances, max gap {worst:.2e}");
        report(10, "MPP-only mode", start, None, tally, detail)
    }
}

/// Run the whole suite with the reference solver.
pub fn verify_suite(scale: Scale) -> VerifyReport {
    Harness::new(scale).run()
}

fn tree_with(n: usize, horizon: f64, m: usize, curve: CompensatorCurve, feedback: f64, brownian: bool) -> ScenarioTree {
    let grid = TimeGrid::uniform(n, horizon).expect("valid grid");
    let marks = MarkSet::numbered(m).expect("m ≥ 1");
    let comp = CompensatorSpec::new(curve, MarkKernel::uniform(m)).with_count_feedback(feedback);
    build_tree(&grid, &marks, &comp, TreeOptions { brownian, ..TreeOptions::default() }).expect("small tree")
}

fn instance(tree: ScenarioTree, seed: u64, xi: impl Fn(&crate::lattice::TreeNode) -> f64, barrier: NodeProcess, driver: Arc<dyn Driver>) -> Instance {
    let terminal = tree.level(tree.steps()).iter().map(xi).collect();
    let gen = GeneratorSpec::new(&tree, terminal, barrier, driver, 1.0, 0.5).expect("consistent fixture");
    let frozen = FrozenGenerators::at_zero(&tree, gen.driver.as_ref());
    Instance { seed, tree, gen, frozen }
}

/// `ξ = W_1`, `h_0 = 0.5`, no jumps.
pub fn barrier_step_instance() -> Instance {
    let tree = tree_with(1, 1.0, 1, CompensatorCurve::Zero, 0.0, true);
    let h = NodeProcess::from_fn(&tree, |id, _| if id.level == 0 { 0.5 } else { -10.0 });
    instance(tree, 0, |n| n.state.w, h, Arc::new(AffineDriver::default()))
}

/// `ξ = N_1`, `A(1) = ln 2`, one mark, no Brownian branching.
pub fn single_jump_instance() -> Instance {
    let tree = tree_with(1, 1.0, 1, CompensatorCurve::Linear { rate: LN_2 }, 0.0, false);
    let h = NodeProcess::constant(&tree, -10.0);
    instance(tree, 0, |n| f64::from(n.state.n), h, Arc::new(AffineDriver::default()))
}

/// `f(y) = 0.1·y`, one step with `ΔA = 1`, `ξ ≡ 1`.
pub fn linear_instance() -> Instance {
    let tree = tree_with(1, 1.0, 1, CompensatorCurve::Linear { rate: 1.0 }, 0.0, false);
    let h = NodeProcess::constant(&tree, -10.0);
    let driver = AffineDriver { f: AffineF { y: 0.1, ..AffineF::default() }, ..AffineDriver::default() };
    instance(tree, 0, |_| 1.0, h, Arc::new(driver))
}

/// Constant reward `c` everywhere with zero generators: every rule is optimal.
pub fn flat_instance(seed: u64) -> Instance {
    let brownian = seed % 2 == 0;
    let n = if brownian { 2 } else { 3 };
    let tree = tree_with(n, 1.0, 1, CompensatorCurve::Linear { rate: 0.4 }, 0.0, brownian);
    let c = (seed % 7) as f64 * 0.1 - 0.3;
    let h = NodeProcess::constant(&tree, c);
    instance(tree, seed, |_| c, h, Arc::new(AffineDriver::default()))
}

fn rng_coef(seed: u64, i: u64) -> f64 {
    // small deterministic coefficients in [−1, 1)
    let x = seed.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(i.wrapping_mul(1_442_695_040_888_963_407));
    ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
}

/// `ξ = a·W_T + b·N_T + c·(last mark) + d`, generators affine in `(t, w, n)`
/// and an inactive barrier.
pub fn separable_instance(seed: u64) -> Instance {
    let n = 1 + (seed % 4) as usize;
    let m = 1 + (seed % 2) as usize;
    let feedback = if seed % 3 == 0 { 0.3 } else { 0.0 };
    let tree = tree_with(n, 1.0, m, CompensatorCurve::Linear { rate: 0.5 + 0.3 * rng_coef(seed, 0).abs() }, feedback, true);
    let (a, b, c, d) = (rng_coef(seed, 1), rng_coef(seed, 2), rng_coef(seed, 3), rng_coef(seed, 4));
    let drift = |i, w| Drift { constant: rng_coef(seed, i), time: rng_coef(seed, i + 1), w, n: rng_coef(seed, i + 3), table: None };
    // a w-term in f would meet the n-dependent ΔA of count feedback and
    // create a cross term; g integrates against deterministic Δ
    let driver = AffineDriver {
        f: AffineF { drift: drift(10, 0.0), ..AffineF::default() },
        g: AffineG { drift: drift(20, rng_coef(seed, 22)), ..AffineG::default() },
    };
    let h = NodeProcess::constant(&tree, -100.0);
    instance(
        tree,
        seed,
        |nd| a * nd.state.w + b * f64::from(nd.state.n) + nd.state.last_mark.map_or(0.0, |e| c * (e as f64 + 1.0)) + d,
        h,
        Arc::new(driver),
    )
}

/// `ξ = W_T·N_T` with a random active barrier and given generators.
pub fn cross_instance(seed: u64) -> Instance {
    let base = instances::random_given_instance(seed, &Shape::sweep());
    let tree = base.tree;
    let terminal: Vec<f64> = tree.level(tree.steps()).iter().map(|n| n.state.w * f64::from(n.state.n)).collect();
    let mut barrier = base.gen.barrier;
    for (leaf, xi) in tree.leaf_ids().zip(&terminal) {
        barrier.set(leaf, barrier.get(leaf).min(*xi));
    }
    let gen = GeneratorSpec::new(&tree, terminal, barrier, base.gen.driver, 1.0, 0.5).expect("consistent instance");
    let frozen = base.frozen;
    Instance { seed, tree, gen, frozen }
}

/// `ξ = W_1·N_1`, `f = g = 0`, inactive barrier, `A_t = t/2`, `N` steps.
pub fn refinement_instance(n: usize) -> Instance {
    let tree = tree_with(n, 1.0, 1, CompensatorCurve::Linear { rate: 0.5 }, 0.0, true);
    let h = NodeProcess::constant(&tree, -100.0);
    instance(tree, n as u64, |nd| nd.state.w * f64::from(nd.state.n), h, Arc::new(AffineDriver::default()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_pass() {
        let h = Harness::new(Scale::Small);
        let r = h.hand_fixtures();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn scale_parses() {
        assert_eq!("small".parse::<Scale>(), Ok(Scale::Small));
        assert!("medium".parse::<Scale>().is_err());
    }
}
