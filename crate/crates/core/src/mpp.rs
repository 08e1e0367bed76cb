//! Marked point process model on a finite mark set.
//!
//! The compensator is given in disintegrated form `ν(dt de) = φ_t(de) dA_t`:
//! a continuous nondecreasing curve `A` with `A(0) = 0` and a mark kernel `φ`
//! that is piecewise constant in time. Optionally the increments of `A` are
//! scaled by `1 + κ·N_{t_k}` (jump-count feedback), which keeps `A`
//! predictable while making it path-dependent.
//!
//! On a grid, at most one event occurs per step, with probability
//! `1 − exp(−ΔA_k)`; the event is placed at the right end of the step and its
//! mark is drawn from `φ_{t_k}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::TimeGrid;
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MppError {
    #[error("mark set must contain at least one mark")]
    EmptyMarkSet,
    #[error("duplicate mark label `{0}`")]
    DuplicateMark(String),
    #[error("compensator decreases on step {step}: ΔA = {increment}")]
    NonMonotoneCompensator { step: usize, increment: f64 },
    #[error("invalid compensator: {0}")]
    InvalidCompensator(String),
    #[error("invalid mark kernel: {0}")]
    InvalidKernel(String),
    #[error("path horizon {path} does not match grid horizon {grid}")]
    HorizonMismatch { path: f64, grid: f64 },
}

/// Ordered finite set of mark labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct MarkSet {
    labels: Vec<String>,
}

impl MarkSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, MppError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(MppError::EmptyMarkSet);
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(MppError::DuplicateMark(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// Marks labelled `e1, …, em`.
    pub fn numbered(m: usize) -> Result<Self, MppError> {
        Self::new((1..=m).map(|i| format!("e{i}")))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl TryFrom<Vec<String>> for MarkSet {
    type Error = MppError;
    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<MarkSet> for Vec<String> {
    fn from(m: MarkSet) -> Self {
        m.labels
    }
}

/// Closed-form cumulative compensator curve `t ↦ A(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CompensatorCurve {
    /// `A ≡ 0`: no events.
    Zero,
    /// `A(t) = rate·t`.
    Linear { rate: f64 },
    /// Piecewise-linear interpolation through `(knots[i], values[i])`, flat
    /// after the last knot. `knots[0]` must be 0 and `values[0]` must be 0.
    Piecewise { knots: Vec<f64>, values: Vec<f64> },
}

impl CompensatorCurve {
    fn validate(&self) -> Result<(), MppError> {
        match self {
            Self::Zero => Ok(()),
            Self::Linear { rate } => {
                if rate.is_finite() {
                    Ok(())
                } else {
                    Err(MppError::InvalidCompensator(format!("non-finite rate {rate}")))
                }
            }
            Self::Piecewise { knots, values } => {
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(MppError::InvalidCompensator(
                        "knots and values must be non-empty and of equal length".into(),
                    ));
                }
                if knots[0] != 0.0 || values[0] != 0.0 {
                    return Err(MppError::InvalidCompensator(
                        "piecewise compensator must start at (0, 0)".into(),
                    ));
                }
                if knots.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(MppError::InvalidCompensator(
                        "knots must be strictly increasing".into(),
                    ));
                }
                if knots.iter().chain(values).any(|x| !x.is_finite()) {
                    return Err(MppError::InvalidCompensator("non-finite knot or value".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Linear { rate } => rate * t,
            Self::Piecewise { knots, values } => {
                let i = knots.partition_point(|&k| k <= t);
                if i == 0 {
                    values[0]
                } else if i == knots.len() {
                    values[i - 1]
                } else {
                    let (t0, t1) = (knots[i - 1], knots[i]);
                    let (a0, a1) = (values[i - 1], values[i]);
                    a0 + (a1 - a0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }
}

/// Mark kernel `φ_t(·)`, piecewise constant in time: row `i` applies on
/// `[breakpoints[i], breakpoints[i+1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkKernel {
    pub breakpoints: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

impl MarkKernel {
    /// Time-constant kernel.
    pub fn constant(weights: Vec<f64>) -> Self {
        Self { breakpoints: vec![0.0], weights: vec![weights] }
    }

    /// Uniform over `m` marks.
    pub fn uniform(m: usize) -> Self {
        Self::constant(vec![1.0 / m as f64; m])
    }

    fn validate(&self, m: usize) -> Result<(), MppError> {
        if self.breakpoints.is_empty() || self.breakpoints.len() != self.weights.len() {
            return Err(MppError::InvalidKernel(
                "breakpoints and weight rows must be non-empty and of equal length".into(),
            ));
        }
        if self.breakpoints[0] != 0.0 {
            return Err(MppError::InvalidKernel("first breakpoint must be 0".into()));
        }
        if self.breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MppError::InvalidKernel("breakpoints must be strictly increasing".into()));
        }
        for (i, row) in self.weights.iter().enumerate() {
            if row.len() != m {
                return Err(MppError::InvalidKernel(format!(
                    "row {i} has {} weights, expected {m}",
                    row.len()
                )));
            }
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(MppError::InvalidKernel(format!("row {i} has a negative weight")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > tol::KERNEL_SUM {
                return Err(MppError::InvalidKernel(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> &[f64] {
        let i = self.breakpoints.partition_point(|&b| b <= t).max(1);
        &self.weights[i - 1]
    }
}

/// The pair `(A, φ)` plus optional jump-count feedback `κ ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompensatorSpec {
    pub curve: CompensatorCurve,
    pub kernel: MarkKernel,
    #[serde(default)]
    pub count_feedback: f64,
}

impl CompensatorSpec {
    pub fn new(curve: CompensatorCurve, kernel: MarkKernel) -> Self {
        Self { curve, kernel, count_feedback: 0.0 }
    }

    pub fn with_count_feedback(mut self, kappa: f64) -> Self {
        self.count_feedback = kappa;
        self
    }

    pub fn validate(&self, marks: &MarkSet) -> Result<(), MppError> {
        self.curve.validate()?;
        self.kernel.validate(marks.len())?;
        if !(self.count_feedback >= 0.0 && self.count_feedback.is_finite()) {
            return Err(MppError::InvalidCompensator(format!(
                "count feedback must be finite and nonnegative, got {}",
                self.count_feedback
            )));
        }
        Ok(())
    }

    /// Base increments `ΔA_k = A(t_{k+1}) − A(t_k)` on the grid.
    pub fn increments(&self, grid: &TimeGrid) -> Result<Vec<f64>, MppError> {
        self.curve.validate()?;
        let a0 = self.curve.eval(0.0);
        if a0 != 0.0 {
            return Err(MppError::InvalidCompensator(format!("A(0) = {a0}, expected 0")));
        }
        let times = grid.times();
        let mut out = Vec::with_capacity(grid.steps());
        for (k, w) in times.windows(2).enumerate() {
            let d = self.curve.eval(w[1]) - self.curve.eval(w[0]);
            if !d.is_finite() || d < 0.0 {
                return Err(MppError::NonMonotoneCompensator { step: k, increment: d });
            }
            out.push(d);
        }
        Ok(out)
    }

    /// Increment over step `k` given `n` jumps so far.
    pub fn scaled_increment(&self, base: f64, n: u32) -> f64 {
        base * (1.0 + self.count_feedback * f64::from(n))
    }

    pub fn kernel_at(&self, t: f64) -> &[f64] {
        self.kernel.at(t)
    }
}

/// Probability of at least one event in a step with compensator increment `d_a`.
pub fn jump_probability(d_a: f64) -> f64 {
    -(-d_a).exp_m1()
}

/// A realised path: event times with mark indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MppPath {
    pub events: Vec<(f64, usize)>,
    pub horizon: f64,
}

impl MppPath {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Simulate one path on `grid`; deterministic in `seed`.
pub fn simulate_path(
    spec: &CompensatorSpec,
    marks: &MarkSet,
    grid: &TimeGrid,
    seed: u64,
) -> Result<MppPath, MppError> {
    spec.validate(marks)?;
    let base = spec.increments(grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = grid.times();
    let mut events = Vec::new();
    for (k, &d) in base.iter().enumerate() {
        let d_a = spec.scaled_increment(d, events.len() as u32);
        let draw: f64 = rng.gen();
        if draw < jump_probability(d_a) {
            let mark = sample_mark(spec.kernel_at(times[k]), rng.gen());
            events.push((times[k + 1], mark));
        }
    }
    Ok(MppPath { events, horizon: grid.horizon() })
}

fn sample_mark(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (e, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return e;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// `N_{t_k}` for every grid point.
pub fn counting_process(path: &MppPath, grid: &TimeGrid) -> Result<Vec<u64>, MppError> {
    check_horizon(path, grid)?;
    Ok(grid
        .times()
        .iter()
        .map(|&t| path.events.iter().take_while(|(s, _)| *s <= t).count() as u64)
        .collect())
}

/// Discrete compensator of the counting process: `Σ_{j<k} (1 − e^{−ΔA_j})`
/// along the path, for every grid point.
pub fn jump_compensator(
    path: &MppPath,
    spec: &CompensatorSpec,
    grid: &TimeGrid,
) -> Result<Vec<f64>, MppError> {
    check_horizon(path, grid)?;
    let base = spec.increments(grid)?;
    let counts = counting_process(path, grid)?;
    let mut out = Vec::with_capacity(base.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for (k, &d) in base.iter().enumerate() {
        acc += jump_probability(spec.scaled_increment(d, counts[k] as u32));
        out.push(acc);
    }
    Ok(out)
}

/// `∫∫ C q(dt de) = Σ_n C_{k(T_n)}(ξ_n) − Σ_k Σ_e C_k(e) φ_k(e) ΔA_k`, where
/// `k(T_n)` is the step containing `T_n` (predictable integrand).
pub fn compensated_integral<F>(
    path: &MppPath,
    spec: &CompensatorSpec,
    grid: &TimeGrid,
    integrand: F,
) -> Result<f64, MppError>
where
    F: Fn(usize, usize) -> f64,
{
    check_horizon(path, grid)?;
    let base = spec.increments(grid)?;
    let times = grid.times();
    let mut jumps = 0.0;
    let mut steps_with_event = Vec::with_capacity(path.events.len());
    for &(t, e) in &path.events {
        let k = times.partition_point(|&s| s < t).saturating_sub(1);
        steps_with_event.push(k);
        jumps += integrand(k, e);
    }
    let mut comp = 0.0;
    let mut n = 0u32;
    for (k, &d) in base.iter().enumerate() {
        let d_a = spec.scaled_increment(d, n);
        if d_a > 0.0 {
            let phi = spec.kernel_at(times[k]);
            comp += phi.iter().enumerate().map(|(e, w)| integrand(k, e) * w).sum::<f64>() * d_a;
        }
        n += steps_with_event.iter().filter(|&&s| s == k).count() as u32;
    }
    Ok(jumps - comp)
}

fn check_horizon(path: &MppPath, grid: &TimeGrid) -> Result<(), MppError> {
    if (path.horizon - grid.horizon()).abs() > 1e-12 * grid.horizon().max(1.0) {
        return Err(MppError::HorizonMismatch { path: path.horizon, grid: grid.horizon() });
    }
    Ok(())
}

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl MonteCarloSummary {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, std_err: (var / n as f64).sqrt(), samples: n }
    }

    /// `|mean − target| ≤ k·std_err`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// Evaluate `stat` over paths simulated with seeds `seeds`, in parallel.
pub fn simulate_statistic<F>(
    spec: &CompensatorSpec,
    marks: &MarkSet,
    grid: &TimeGrid,
    seeds: std::ops::Range<u64>,
    stat: F,
) -> Result<MonteCarloSummary, MppError>
where
    F: Fn(&MppPath) -> Result<f64, MppError> + Sync,
{
    let xs = seeds
        .into_par_iter()
        .map(|s| simulate_path(spec, marks, grid, s).and_then(|p| stat(&p)))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(MonteCarloSummary::from_samples(&xs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn one_mark() -> MarkSet {
        MarkSet::numbered(1).unwrap()
    }

    #[test]
    fn mark_set_rejects_empty_and_duplicates() {
        assert_eq!(MarkSet::new(Vec::<String>::new()), Err(MppError::EmptyMarkSet));
        assert!(matches!(MarkSet::new(["a", "a"]), Err(MppError::DuplicateMark(_))));
        assert_eq!(MarkSet::new(["a", "b"]).unwrap().index_of("b"), Some(1));
    }

    #[test]
    fn zero_compensator_gives_empty_path() {
        let spec = CompensatorSpec::new(CompensatorCurve::Zero, MarkKernel::uniform(1));
        let grid = TimeGrid::uniform(50, 2.0).unwrap();
        for seed in 0..20 {
            assert!(simulate_path(&spec, &one_mark(), &grid, seed).unwrap().is_empty());
        }
    }

    #[test]
    fn decreasing_compensator_is_rejected() {
        let spec = CompensatorSpec::new(
            CompensatorCurve::Piecewise { knots: vec![0.0, 0.5, 1.0], values: vec![0.0, 1.0, 0.5] },
            MarkKernel::uniform(1),
        );
        let grid = TimeGrid::uniform(2, 1.0).unwrap();
        assert!(matches!(
            simulate_path(&spec, &one_mark(), &grid, 0),
            Err(MppError::NonMonotoneCompensator { step: 1, .. })
        ));
    }

    #[test]
    fn kernel_rows_must_sum_to_one() {
        let spec = CompensatorSpec::new(
            CompensatorCurve::Linear { rate: 1.0 },
            MarkKernel::constant(vec![0.5, 0.4]),
        );
        assert!(matches!(
            spec.validate(&MarkSet::numbered(2).unwrap()),
            Err(MppError::InvalidKernel(_))
        ));
    }

    #[test]
    fn single_step_ln2_jumps_half_the_time() {
        assert!((jump_probability(LN_2) - 0.5).abs() < 1e-15);
        let spec =
            CompensatorSpec::new(CompensatorCurve::Linear { rate: LN_2 }, MarkKernel::uniform(1));
        let grid = TimeGrid::uniform(1, 1.0).unwrap();
        let s = simulate_statistic(&spec, &one_mark(), &grid, 0..20_000, |p| Ok(p.len() as f64))
            .unwrap();
        assert!(s.within(0.5, 3.0), "{s:?}");
    }

    #[test]
    fn simulation_is_deterministic_in_seed() {
        let spec = CompensatorSpec::new(
            CompensatorCurve::Linear { rate: 3.0 },
            MarkKernel::constant(vec![0.2, 0.8]),
        );
        let marks = MarkSet::numbered(2).unwrap();
        let grid = TimeGrid::uniform(100, 1.0).unwrap();
        let a = simulate_path(&spec, &marks, &grid, 42).unwrap();
        let b = simulate_path(&spec, &marks, &grid, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.events.windows(2).all(|w| w[1].0 > w[0].0));
        assert!(a.events.iter().all(|(t, _)| *t > 0.0 && *t <= 1.0));
    }

    #[test]
    fn counting_process_examples() {
        let grid = TimeGrid::from_times(vec![0.0, 0.5, 1.0]).unwrap();
        let empty = MppPath { events: vec![], horizon: 1.0 };
        assert_eq!(counting_process(&empty, &grid).unwrap(), vec![0, 0, 0]);
        let one = MppPath { events: vec![(0.5, 0)], horizon: 1.0 };
        assert_eq!(counting_process(&one, &grid).unwrap(), vec![0, 1, 1]);
        let two = MppPath { events: vec![(0.5, 0), (1.0, 0)], horizon: 1.0 };
        assert_eq!(*counting_process(&two, &grid).unwrap().last().unwrap(), 2);
        let wrong = MppPath { events: vec![], horizon: 2.0 };
        assert!(matches!(counting_process(&wrong, &grid), Err(MppError::HorizonMismatch { .. })));
    }

    #[test]
    fn compensated_integral_examples() {
        let spec =
            CompensatorSpec::new(CompensatorCurve::Linear { rate: LN_2 }, MarkKernel::uniform(1));
        let grid = TimeGrid::uniform(1, 1.0).unwrap();
        let path = MppPath { events: vec![(1.0, 0)], horizon: 1.0 };
        assert_eq!(compensated_integral(&path, &spec, &grid, |_, _| 0.0).unwrap(), 0.0);
        let v = compensated_integral(&path, &spec, &grid, |_, _| 1.0).unwrap();
        assert!((v - (1.0 - LN_2)).abs() < 1e-15);
    }

    #[test]
    fn piecewise_curve_interpolates_and_flattens() {
        let c = CompensatorCurve::Piecewise { knots: vec![0.0, 1.0], values: vec![0.0, 2.0] };
        assert_eq!(c.eval(0.5), 1.0);
        assert_eq!(c.eval(3.0), 2.0);
    }

    #[test]
    fn kernel_lookup_is_left_closed() {
        let k = MarkKernel { breakpoints: vec![0.0, 0.5], weights: vec![vec![1.0, 0.0], vec![0.0, 1.0]] };
        assert_eq!(k.at(0.0), &[1.0, 0.0]);
        assert_eq!(k.at(0.49), &[1.0, 0.0]);
        assert_eq!(k.at(0.5), &[0.0, 1.0]);
    }
}
