//! Run configuration (TOML).
//!
//! ```toml
//! mode = "given"            # given | picard | mpp-only
//! seed = 7
//!
//! [grid]
//! steps = 1
//! horizon = 1.0
//!
//! [marks]
//! labels = ["e1"]
//!
//! [compensator]
//! curve = { kind = "zero" }
//! kernel = { breakpoints = [0.0], weights = [[1.0]] }
//!
//! [terminal]                # ξ = constant + w·W_T + n·N_T + wn·W_T·N_T (+ call)
//! w = 1.0
//!
//! [barrier]                 # h = piecewise(t) + w·W_t + n·N_t
//! breakpoints = [0.0, 0.5]
//! values = [0.5, -10.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{NodeState, TimeGrid, TreeOptions};
use crate::mpp::{CompensatorSpec, MarkSet};
use crate::picard::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::rbsde::{AffineDriver, AffineF, AffineG, Driver, Lipschitz};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::ConfigInvalid { path: path.to_string(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Given,
    Picard,
    MppOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub steps: usize,
    pub horizon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarksConfig {
    pub labels: Vec<String>,
}

fn default_true() -> bool {
    true
}

fn default_budget() -> usize {
    TreeOptions::default().budget
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeConfig {
    #[serde(default = "default_true")]
    pub brownian: bool,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { brownian: true, budget: default_budget() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Call {
    pub strike: f64,
    pub weight: f64,
}

/// `constant + w·W + n·N + wn·W·N + weight·(W − strike)⁺`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFunctional {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub w: f64,
    #[serde(default)]
    pub n: f64,
    #[serde(default)]
    pub wn: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub call: Option<Call>,
}

impl PathFunctional {
    pub fn eval(&self, s: &NodeState) -> f64 {
        let n = f64::from(s.n);
        self.constant
            + self.w * s.w
            + self.n * n
            + self.wn * s.w * n
            + self.call.as_ref().map_or(0.0, |c| c.weight * (s.w - c.strike).max(0.0))
    }
}

/// Piecewise-constant level in time plus `w·W_t + n·N_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    /// `values[i]` applies on `[breakpoints[i], breakpoints[i+1])`.
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub w: f64,
    #[serde(default)]
    pub n: f64,
}

impl BarrierConfig {
    pub fn eval(&self, t: f64, s: &NodeState) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= t).max(1);
        self.values[i - 1] + self.w * s.w + self.n * f64::from(s.n)
    }
}

fn default_beta() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default)]
    pub f: AffineF,
    #[serde(default)]
    pub g: AffineG,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Stated constants; must dominate the certified ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<Lipschitz>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { f: AffineF::default(), g: AffineG::default(), beta: 1.0, delta: 0.5, lipschitz: None }
    }
}

impl GeneratorConfig {
    pub fn driver(&self) -> AffineDriver {
        AffineDriver { f: self.f.clone(), g: self.g.clone() }
    }

    pub fn effective_lipschitz(&self) -> Lipschitz {
        self.lipschitz.unwrap_or_else(|| self.driver().lipschitz())
    }
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { max_iter: DEFAULT_MAX_ITER, tol: DEFAULT_TOL }
    }
}

fn default_epsilons() -> Vec<f64> {
    vec![0.1, 0.01]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingConfig {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_true")]
    pub oracle: bool,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        Self { epsilons: default_epsilons(), oracle: true }
    }
}

fn default_paths() -> usize {
    2_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_paths")]
    pub paths: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { paths: default_paths() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub grid: GridConfig,
    pub marks: MarksConfig,
    pub compensator: CompensatorSpec,
    #[serde(default)]
    pub tree: TreeConfig,
    pub terminal: PathFunctional,
    pub barrier: BarrierConfig,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub stopping: StoppingConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable as TOML")
    }

    pub fn grid(&self) -> Result<TimeGrid, ConfigError> {
        TimeGrid::uniform(self.grid.steps, self.grid.horizon).map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn mark_set(&self) -> Result<MarkSet, ConfigError> {
        MarkSet::new(self.marks.labels.iter().cloned()).map_err(|e| invalid("marks.labels", e.to_string()))
    }

    pub fn tree_options(&self) -> TreeOptions {
        TreeOptions { brownian: self.tree.brownian, budget: self.tree.budget }
    }

    /// Everything checkable before a tree is built. The leaf condition
    /// `h_N ≤ ξ` is checked once leaves exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.grid()?;
        let marks = self.mark_set()?;
        let m = marks.len();
        self.compensator.validate(&marks).map_err(|e| invalid("compensator", e.to_string()))?;
        self.compensator.increments(&grid).map_err(|e| invalid("compensator.curve", e.to_string()))?;

        let b = &self.barrier;
        if b.breakpoints.is_empty() || b.breakpoints.len() != b.values.len() {
            return Err(invalid("barrier", "breakpoints and values must be non-empty and of equal length"));
        }
        if b.breakpoints[0] != 0.0 || b.breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("barrier.breakpoints", "must start at 0 and increase strictly"));
        }
        if b.values.iter().chain([&b.w, &b.n]).any(|x| !x.is_finite()) {
            return Err(invalid("barrier", "non-finite coefficient"));
        }

        let gen = &self.generator;
        if !gen.f.weights.is_empty() && gen.f.weights.len() != m {
            return Err(invalid(
                "generator.f.weights",
                format!("{} weights for {m} marks", gen.f.weights.len()),
            ));
        }
        for (path, clip) in [("generator.f.clip", gen.f.clip), ("generator.g.clip", gen.g.clip)] {
            if let Some(c) = clip {
                if !(c > 0.0) {
                    return Err(invalid(path, format!("clip bound must be positive, got {c}")));
                }
            }
        }
        if !(gen.beta >= 0.0 && gen.beta.is_finite()) {
            return Err(invalid("generator.beta", format!("β must be nonnegative, got {}", gen.beta)));
        }
        if !(gen.delta > 0.0 && gen.delta.is_finite()) {
            return Err(invalid("generator.delta", format!("δ must be positive, got {}", gen.delta)));
        }
        let certified = gen.driver().lipschitz();
        if let Some(stated) = gen.lipschitz {
            if !stated.dominates(&certified) {
                return Err(invalid(
                    "generator.lipschitz",
                    format!("stated {stated:?} is below the certified {certified:?}"),
                ));
            }
        }
        let lip = gen.effective_lipschitz();
        let state_free = gen.driver().is_state_free();
        if self.mode == Mode::Given && !state_free {
            return Err(invalid("mode", "generator depends on (y, u, z); use mode = \"picard\""));
        }
        let iterates = self.mode == Mode::Picard || (self.mode == Mode::MppOnly && !state_free);
        if iterates && !(gen.beta > lip.beta_threshold()) {
            return Err(invalid(
                "generator.beta",
                format!(
                    "β = {} must exceed L_U² + 2L_f = {} (minimal admissible β)",
                    gen.beta,
                    lip.beta_threshold()
                ),
            ));
        }
        if self.mode == Mode::MppOnly {
            if self.tree.brownian {
                return Err(invalid("tree.brownian", "mpp-only mode needs brownian = false"));
            }
            let g = &gen.g;
            let d = &g.drift;
            if g.y != 0.0 || g.z != 0.0 || d.constant != 0.0 || d.time != 0.0 || d.w != 0.0 || d.n != 0.0 {
                return Err(invalid("generator.g", "mpp-only mode has no dt-generator; g must vanish"));
            }
        }
        if self.picard.max_iter == 0 || !(self.picard.tol > 0.0) {
            return Err(invalid("picard", "max_iter must be positive and tol > 0"));
        }
        if self.stopping.epsilons.iter().any(|e| !(*e >= 0.0)) {
            return Err(invalid("stopping.epsilons", "ε must be nonnegative"));
        }
        if self.simulate.paths == 0 {
            return Err(invalid("simulate.paths", "need at least one path"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BARRIER_STEP: &str = r#"
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
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml(BARRIER_STEP).unwrap();
        assert_eq!(cfg.mode, Mode::Given);
        assert!(cfg.tree.brownian);
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn picard_beta_bound_is_named() {
        let text = BARRIER_STEP.replace("mode = \"given\"", "mode = \"picard\"")
            + "\n[generator]\nbeta = 0.5\nf = { y = 0.4 }\n";
        match RunConfig::from_toml(&text) {
            Err(ConfigError::ConfigInvalid { path, message }) => {
                assert_eq!(path, "generator.beta");
                assert!(message.contains("0.8"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mpp_only_rejects_brownian() {
        let text = BARRIER_STEP.replace("mode = \"given\"", "mode = \"mpp-only\"");
        match RunConfig::from_toml(&text) {
            Err(ConfigError::ConfigInvalid { path, .. }) => assert_eq!(path, "tree.brownian"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(matches!(RunConfig::from_toml(&(BARRIER_STEP.to_string() + "\nbogus = 1\n")), Err(ConfigError::Parse(_))));
    }
}
