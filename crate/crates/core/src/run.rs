//! Orchestration: config → tree → solve → checks → persisted artifact.
//!
//! An artifact directory holds `summary.json`, `nodes.csv` (one row per
//! node), `norms.csv`, `picard_trace.csv` when Picard ran, `paths.csv` for
//! simulations, and `config.toml`, an echo of the effective configuration
//! that parses back to the same [`RunConfig`]. Nothing time- or
//! host-dependent is written, so equal inputs give identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, Mode, RunConfig};
use crate::instances::random_iterate;
use crate::lattice::{build_tree, BrownianMove, LatticeError, NodeId, NodeProcess, ScenarioTree, TreeSummary};
use crate::mpp::{
    counting_process, jump_compensator, jump_probability, simulate_path, simulate_statistic, MonteCarloSummary,
    MppError,
};
use crate::picard::{picard_solve, select_contraction_parameters, PicardError, PicardTrace};
use crate::rbsde::{
    a_priori_majorant, check_equation_residual, check_skorohod, check_terminal, solve_frozen, solve_frozen_mpp,
    solve_via_snell, FrozenGenerators, GeneratorSpec, RbsdeError, RbsdeSolution, SkorohodReport,
};
use crate::snell::envelope_jump_support;
use crate::stopping::{
    brute_force_value, epsilon_optimal_time, k_flatness_before_stop, reward_of_rule, smallest_optimal_time,
    StoppingError, ENUMERATION_CAP,
};
use crate::tol;
use crate::wnorm::{cauchy_weight_bound, norm_sq, CauchyBound, NormKind, WeightedNorm};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("building the scenario tree: {0}")]
    Lattice(#[from] LatticeError),
    #[error("solver: {0}")]
    Rbsde(#[from] RbsdeError),
    #[error("Picard iteration: {0}")]
    Picard(#[from] PicardError),
    #[error("stopping oracle: {0}")]
    Stopping(#[from] StoppingError),
    #[error("simulation: {0}")]
    Mpp(#[from] MppError),
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl RunError {
    /// 2 for anything the user can fix in the config, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_)
            | RunError::Lattice(_)
            | RunError::Stopping(StoppingError::EnumerationBudgetExceeded { .. }) => 2,
            RunError::Rbsde(e) => match e {
                RbsdeError::Snell(_) => 1,
                _ => 2,
            },
            RunError::Picard(PicardError::BetaTooSmall { .. } | PicardError::Infeasible { .. }) => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verb {
    Solve,
    Picard,
    Oracle,
    Simulate,
    Norms,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Verdict {
    fn at_most(check: &str, value: f64, tolerance: f64) -> Self {
        Self { check: check.to_string(), passed: value <= tolerance, value, tolerance }
    }

    fn holds(check: &str, passed: bool) -> Self {
        Self { check: check.to_string(), passed, value: f64::from(u8::from(!passed)), tolerance: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub max_abs: f64,
    pub max_conditional_mean: f64,
    pub max_lattice_mismatch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardSummary {
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub alpha_min: f64,
    pub converged: bool,
    pub iterations: usize,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `max_node |Y_zero-start − Y_random-start|`.
    pub initialisation_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingSummary {
    pub epsilon: f64,
    pub reward: f64,
    pub stop_nodes: Vec<NodeId>,
    pub k_before_stop: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub value: f64,
    pub best_rule: Vec<NodeId>,
    pub enumerated: usize,
    pub optimal_rules: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub quantity: String,
    pub kind: NormKind,
    pub beta: f64,
    pub gamma: f64,
    pub value_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub paths: usize,
    pub count: MonteCarloSummary,
    pub expected_count: f64,
    /// `N_T − Σ(1 − e^{−ΔA})`, a martingale at `T`.
    pub compensated: MonteCarloSummary,
}

/// Solution section of an artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub tree: TreeSummary,
    pub y0: f64,
    pub z0: Option<f64>,
    pub u0: Vec<f64>,
    pub k_max: f64,
    pub skorohod: SkorohodReport,
    pub residual: ResidualSummary,
    pub route_gap: f64,
    pub majorant_violations: usize,
    pub picard: Option<PicardSummary>,
    pub stopping: Vec<StoppingSummary>,
    pub smallest_optimal: StoppingSummary,
    pub oracle: Option<OracleSummary>,
    pub norms: Vec<NormRow>,
    pub cauchy: Option<CauchyBound>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub verb: Verb,
    pub mode: Mode,
    pub seed: u64,
    pub config: RunConfig,
    pub solve: Option<SolveSummary>,
    pub simulation: Option<SimulationSummary>,
    pub verdicts: Vec<Verdict>,
    #[serde(skip)]
    pub tables: Tables,
}

impl RunArtifact {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.passed).collect()
    }
}

/// CSV payloads, already rendered to rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tables {
    pub nodes: Vec<Vec<String>>,
    pub picard: Vec<Vec<String>>,
    pub norms: Vec<Vec<String>>,
    pub paths: Vec<Vec<String>>,
}

/// The tree and problem data described by a config.
pub fn build_problem(cfg: &RunConfig) -> Result<(ScenarioTree, GeneratorSpec), RunError> {
    let grid = cfg.grid()?;
    let marks = cfg.mark_set()?;
    let tree = build_tree(&grid, &marks, &cfg.compensator, cfg.tree_options())?;
    let terminal = tree.level(tree.steps()).iter().map(|n| cfg.terminal.eval(&n.state)).collect();
    let barrier = NodeProcess::from_fn(&tree, |id, n| cfg.barrier.eval(tree.grid().time(id.level), &n.state));
    let driver = cfg.generator.driver();
    let gen = GeneratorSpec::new(&tree, terminal, barrier, std::sync::Arc::new(driver), cfg.generator.beta, cfg.generator.delta)
        .map_err(|e| match e {
            RbsdeError::BarrierAboveTerminal { .. } => RunError::Config(ConfigError::ConfigInvalid {
                path: "barrier".into(),
                message: e.to_string(),
            }),
            other => RunError::Rbsde(other),
        })?;
    let gen = match cfg.generator.lipschitz {
        Some(stated) => gen.with_lipschitz(stated)?,
        None => gen,
    };
    Ok((tree, gen))
}

/// `run(config)`: the `solve` verb.
pub fn run(cfg: &RunConfig) -> Result<RunArtifact, RunError> {
    run_verb(cfg, Verb::Solve)
}

pub fn run_verb(cfg: &RunConfig, verb: Verb) -> Result<RunArtifact, RunError> {
    cfg.validate()?;
    let mut verdicts = Vec::new();
    let mut tables = Tables::default();
    let (solve, simulation) = if verb == Verb::Simulate {
        (None, Some(simulate(cfg, &mut verdicts, &mut tables)?))
    } else {
        (Some(solve(cfg, verb, &mut verdicts, &mut tables)?), None)
    };
    Ok(RunArtifact { verb, mode: cfg.mode, seed: cfg.seed, config: cfg.clone(), solve, simulation, verdicts, tables })
}

fn solve(cfg: &RunConfig, verb: Verb, verdicts: &mut Vec<Verdict>, tables: &mut Tables) -> Result<SolveSummary, RunError> {
    let (tree, gen) = build_problem(cfg)?;
    let state_free = gen.driver.is_state_free();
    let iterate = verb == Verb::Picard || cfg.mode == Mode::Picard || !state_free;

    let (frozen, mut sol, picard) = if iterate {
        let (frozen, sol, summary) = run_picard(cfg, &tree, &gen, verdicts, tables)?;
        (frozen, sol, Some(summary))
    } else {
        let frozen = FrozenGenerators::at_zero(&tree, gen.driver.as_ref());
        let sol = solve_frozen(&tree, &gen, &frozen);
        (frozen, sol, None)
    };
    if cfg.mode == Mode::MppOnly {
        let mpp = solve_frozen_mpp(&tree, &gen, &frozen)?;
        verdicts.push(Verdict::at_most("mpp_only.matches_full_solver", mpp.y.max_abs_diff(&sol.y), 1e-12));
        sol = mpp;
    }

    let skorohod = check_skorohod(&tree, &sol, &gen.barrier);
    verdicts.push(Verdict::holds("skorohod", skorohod.passed));
    verdicts.push(Verdict::at_most("terminal", check_terminal(&tree, &sol, &gen.terminal), tol::SKOROHOD));
    let eq = check_equation_residual(&tree, &sol, &frozen);
    verdicts.push(Verdict::at_most("residual.conditional_mean", eq.max_conditional_mean, tol::RESIDUAL_MEAN));
    verdicts.push(Verdict::at_most("residual.lattice_agreement", eq.max_lattice_mismatch, tol::RESIDUAL_MEAN));

    let route = solve_via_snell(&tree, &gen, &frozen)?;
    let route_gap = route.y.max_abs_diff(&sol.y).max(route.decomposition.compensator.max_abs_diff(&sol.k));
    verdicts.push(Verdict::at_most("uniqueness.route_agreement", route_gap, tol::ROUTE_AGREEMENT));
    let support = envelope_jump_support(&tree, &route.decomposition, &route.eta);
    verdicts.push(Verdict::at_most("snell.push_only_at_contact", support.len() as f64, 0.0));

    let majorant = a_priori_majorant(&tree, &gen, &frozen, &sol);
    verdicts.push(Verdict::at_most("a_priori_majorant", majorant.violations.len() as f64, 0.0));

    let y0 = sol.y.get(NodeId::ROOT);
    let mut stopping = Vec::new();
    for &eps in &cfg.stopping.epsilons {
        let rule = epsilon_optimal_time(&tree, &sol, &gen.barrier, eps);
        let reward = reward_of_rule(&tree, &gen, &frozen, &rule);
        let flat = k_flatness_before_stop(&tree, &sol, &rule);
        verdicts.push(Verdict::at_most(&format!("stopping.eps_{eps}.optimality"), y0 - reward, eps));
        verdicts.push(Verdict::at_most(&format!("stopping.eps_{eps}.k_flat"), flat, tol::SKOROHOD));
        stopping.push(StoppingSummary { epsilon: eps, reward, stop_nodes: rule.stops, k_before_stop: flat });
    }
    let tau = smallest_optimal_time(&tree, &sol, &gen.barrier);
    let tau_reward = reward_of_rule(&tree, &gen, &frozen, &tau);
    verdicts.push(Verdict::at_most("stopping.smallest_optimal.reward", (tau_reward - y0).abs(), tol::ORACLE_AGREEMENT));

    let want_oracle = verb == Verb::Oracle || cfg.stopping.oracle;
    let oracle = if want_oracle && (verb == Verb::Oracle || tree.interior_count() <= ENUMERATION_CAP) {
        let cert = brute_force_value(&tree, &gen, &frozen)?;
        verdicts.push(Verdict::at_most("oracle.value", (cert.value - y0).abs(), tol::ORACLE_AGREEMENT));
        let minimal = cert.optimal_rules.iter().all(|r| tau.pathwise_le(&tree, r));
        verdicts.push(Verdict::holds("oracle.smallest_optimal_is_pathwise_minimal", minimal));
        Some(OracleSummary {
            value: cert.value,
            best_rule: cert.best_rule.stops,
            enumerated: cert.enumerated,
            optimal_rules: cert.optimal_rules.len(),
        })
    } else {
        None
    };

    let beta = cfg.generator.beta;
    let mut norms = Vec::new();
    let z = sol.z_or_zero(&tree);
    for (quantity, kind) in [("Y", NormKind::A), ("Y", NormKind::W), ("Y", NormKind::APlusLambda), ("U", NormKind::P), ("Z", NormKind::W)] {
        let w = WeightedNorm { kind, beta, gamma: 0.0 };
        let value_sq = match quantity {
            "Y" => norm_sq(&tree, &sol.y, &w),
            "U" => norm_sq(&tree, &sol.u, &w),
            _ => norm_sq(&tree, &z, &w),
        }
        .expect("norm kinds match their inputs");
        norms.push(NormRow { quantity: quantity.to_string(), kind, beta, gamma: 0.0, value_sq });
    }
    let cauchy = if beta > 0.0 {
        let b = cauchy_weight_bound(&tree, &frozen.f, beta).expect("β > 0");
        verdicts.push(Verdict::holds("cauchy_bound", b.holds()));
        Some(b)
    } else {
        None
    };
    tables.norms = norm_rows(&norms);
    tables.nodes = node_rows(&tree, &gen, &sol, &eq.branch);

    Ok(SolveSummary {
        tree: tree.summary(),
        y0,
        z0: sol.z.as_ref().map(|z| z.get(NodeId::ROOT)),
        u0: sol.u.get(NodeId::ROOT).to_vec(),
        k_max: sol.k.max_abs(),
        skorohod,
        residual: ResidualSummary {
            max_abs: eq.max_abs,
            max_conditional_mean: eq.max_conditional_mean,
            max_lattice_mismatch: eq.max_lattice_mismatch,
        },
        route_gap,
        majorant_violations: majorant.violations.len(),
        picard,
        stopping,
        smallest_optimal: StoppingSummary {
            epsilon: 0.0,
            reward: tau_reward,
            k_before_stop: k_flatness_before_stop(&tree, &sol, &tau),
            stop_nodes: tau.stops,
        },
        oracle,
        norms,
        cauchy,
    })
}

fn run_picard(
    cfg: &RunConfig,
    tree: &ScenarioTree,
    gen: &GeneratorSpec,
    verdicts: &mut Vec<Verdict>,
    tables: &mut Tables,
) -> Result<(FrozenGenerators, RbsdeSolution, PicardSummary), RunError> {
    let contraction = select_contraction_parameters(gen.lipschitz, gen.beta)?
        .with_limits(cfg.picard.max_iter, cfg.picard.tol);
    let unwrap_trace = |r: Result<PicardTrace, PicardError>| match r {
        Ok(t) => Ok(t),
        Err(PicardError::NoConvergence(t)) => Ok(*t),
        Err(e) => Err(e),
    };
    let trace = unwrap_trace(picard_solve(tree, gen, &contraction, None))?;
    let init = random_iterate(tree, cfg.seed);
    let other = unwrap_trace(picard_solve(tree, gen, &contraction, Some(&init)))?;
    let gap = trace.solution.y.max_abs_diff(&other.solution.y);

    verdicts.push(Verdict::holds("picard.converged", trace.converged && other.converged));
    let ratio = trace.max_ratio_from(1).max(other.max_ratio_from(1));
    verdicts.push(Verdict::at_most("picard.contraction_ratio", ratio, contraction.alpha + tol::CONTRACTION_SLACK));
    verdicts.push(Verdict::at_most("picard.initialisation_independence", gap, 10.0 * cfg.picard.tol));

    let ratios = trace.ratios();
    tables.picard = std::iter::once(vec!["iteration".to_string(), "distance".to_string(), "ratio".to_string()])
        .chain(trace.distances.iter().enumerate().map(|(i, d)| {
            let r = if i == 0 { String::new() } else { ratios[i - 1].to_string() };
            vec![(i + 1).to_string(), d.to_string(), r]
        }))
        .collect();
    let summary = PicardSummary {
        beta: contraction.beta,
        gamma: contraction.gamma,
        alpha: contraction.alpha,
        alpha_min: contraction.alpha_min,
        converged: trace.converged,
        iterations: trace.iterations(),
        distances: trace.distances.clone(),
        ratios,
        initialisation_gap: Some(gap),
    };
    Ok((trace.frozen, trace.solution, summary))
}

/// Exact `E[N_T]` on the grid, tracking the count distribution so that
/// count feedback is handled.
fn expected_count(cfg: &RunConfig) -> Result<f64, RunError> {
    let grid = cfg.grid()?;
    let base = cfg.compensator.increments(&grid)?;
    let mut dist = vec![1.0];
    for &d in &base {
        let mut next = vec![0.0; dist.len() + 1];
        for (n, &p) in dist.iter().enumerate() {
            let q = jump_probability(cfg.compensator.scaled_increment(d, n as u32));
            next[n] += p * (1.0 - q);
            next[n + 1] += p * q;
        }
        dist = next;
    }
    Ok(dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum())
}

fn simulate(cfg: &RunConfig, verdicts: &mut Vec<Verdict>, tables: &mut Tables) -> Result<SimulationSummary, RunError> {
    let grid = cfg.grid()?;
    let marks = cfg.mark_set()?;
    let spec = &cfg.compensator;
    let paths = cfg.simulate.paths;
    let first = cfg.seed.wrapping_mul(1 << 20);
    let seeds = first..first + paths as u64;
    let count = simulate_statistic(spec, &marks, &grid, seeds.clone(), |p| Ok(p.len() as f64))?;
    let compensated = simulate_statistic(spec, &marks, &grid, seeds.clone(), |p| {
        let n = counting_process(p, &grid)?;
        let c = jump_compensator(p, spec, &grid)?;
        Ok(n[grid.steps()] as f64 - c[grid.steps()])
    })?;
    let expected = expected_count(cfg)?;
    verdicts.push(Verdict::at_most(
        "simulate.count_mean",
        (count.mean - expected).abs(),
        4.0 * count.std_err,
    ));
    verdicts.push(Verdict::at_most("simulate.compensated_mean", compensated.mean.abs(), 4.0 * compensated.std_err));

    tables.paths.push(vec!["path".into(), "seed".into(), "time".into(), "mark".into()]);
    for (i, s) in seeds.enumerate() {
        let p = simulate_path(spec, &marks, &grid, s)?;
        for (t, e) in &p.events {
            tables.paths.push(vec![i.to_string(), s.to_string(), t.to_string(), marks.labels()[*e].clone()]);
        }
    }
    Ok(SimulationSummary { paths, count, expected_count: expected, compensated })
}

fn path_label(tree: &ScenarioTree, id: NodeId) -> String {
    if id.level == 0 {
        return "root".to_string();
    }
    tree.path_to(id)[1..]
        .iter()
        .map(|&c| {
            let b = tree.node(c).branch.expect("non-root node has a branch");
            let w = match b.brownian {
                BrownianMove::Up => "+",
                BrownianMove::Down => "-",
                BrownianMove::Flat => "0",
            };
            match b.mark {
                Some(e) => format!("{w}{}", tree.marks().labels()[e]),
                None => w.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join("/")
}

fn node_rows(tree: &ScenarioTree, gen: &GeneratorSpec, sol: &RbsdeSolution, branch: &NodeProcess) -> Vec<Vec<String>> {
    let mut header: Vec<String> =
        ["level", "index", "parent", "path", "time", "w", "n", "a", "prob", "h", "y", "z"].map(String::from).to_vec();
    header.extend(tree.marks().labels().iter().map(|l| format!("u_{l}")));
    header.extend(["dk", "k", "residual", "branch_residual"].map(String::from));
    let mut rows = vec![header];
    let z = sol.z.as_ref();
    for id in tree.all_ids() {
        let node = tree.node(id);
        let mut row = vec![
            id.level.to_string(),
            id.index.to_string(),
            node.parent.map_or(String::new(), |p| p.to_string()),
            path_label(tree, id),
            tree.grid().time(id.level).to_string(),
            node.state.w.to_string(),
            node.state.n.to_string(),
            node.state.a.to_string(),
            node.path_prob.to_string(),
            gen.barrier.get(id).to_string(),
            sol.y.get(id).to_string(),
            z.map_or(String::new(), |z| z.get(id).to_string()),
        ];
        row.extend(sol.u.get(id).iter().map(|u| u.to_string()));
        row.extend([
            sol.dk.get(id).to_string(),
            sol.k.get(id).to_string(),
            sol.residual.get(id).to_string(),
            branch.get(id).to_string(),
        ]);
        rows.push(row);
    }
    rows
}

fn norm_rows(norms: &[NormRow]) -> Vec<Vec<String>> {
    let mut rows = vec![["quantity", "kind", "beta", "gamma", "value_sq"].map(String::from).to_vec()];
    for n in norms {
        let kind = serde_json::to_value(n.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        rows.push(vec![n.quantity.clone(), kind, n.beta.to_string(), n.gamma.to_string(), n.value_sq.to_string()]);
    }
    rows
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<(), RunError> {
    let err = |e: csv::Error| RunError::Output { path: path.to_path_buf(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| RunError::Output { path: path.to_path_buf(), message: e.to_string() })
}

fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|e| RunError::Output { path: path.to_path_buf(), message: e.to_string() })
}

/// Write the artifact files into `dir` (created if missing).
pub fn persist(artifact: &RunArtifact, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Output { path: dir.to_path_buf(), message: e.to_string() })?;
    let json = serde_json::to_string_pretty(artifact).expect("artifact serialises");
    write_text(&dir.join("summary.json"), &json)?;
    write_text(&dir.join("config.toml"), &artifact.config.to_toml())?;
    let t = &artifact.tables;
    for (name, rows) in [("nodes.csv", &t.nodes), ("norms.csv", &t.norms), ("picard_trace.csv", &t.picard), ("paths.csv", &t.paths)] {
        if !rows.is_empty() {
            write_csv(&dir.join(name), rows)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const BARRIER_STEP: &str = r#"
mode = "given"

[grid]
steps = 1
horizon = 1.0

[marks]
labels = ["e1"]

[compensator]
curve = { kind = "zero" }
kernel = { breakpoints = [0.0], weights = [[1.0]] }

[terminal]
w = 1.0

[barrier]
breakpoints = [0.0, 0.5]
values = [0.5, -10.0]
"#;

    #[test]
    fn barrier_step_run_passes() {
        let cfg = RunConfig::from_toml(BARRIER_STEP).unwrap();
        let art = run(&cfg).unwrap();
        let s = art.solve.as_ref().unwrap();
        assert_eq!(s.y0, 0.5);
        assert_eq!(s.oracle.as_ref().unwrap().value, 0.5);
        assert!(art.passed(), "{:?}", art.failures());
    }

    #[test]
    fn barrier_above_terminal_is_config_error() {
        let text = BARRIER_STEP.replace("values = [0.5, -10.0]", "values = [0.5, 5.0]");
        let cfg = RunConfig::from_toml(&text).unwrap();
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn expected_count_without_feedback() {
        let text = BARRIER_STEP.replace("curve = { kind = \"zero\" }", "curve = { kind = \"linear\", rate = 0.5 }");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert!((expected_count(&cfg).unwrap() - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
    }
}
