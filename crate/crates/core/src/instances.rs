//! Seeded random problem instances for sweeps and property tests.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lattice::{build_tree, MarkProcess, NodeProcess, ScenarioTree, TimeGrid, TreeOptions};
use crate::mpp::{CompensatorCurve, CompensatorSpec, MarkKernel, MarkSet};
use crate::picard::Iterate;
use crate::rbsde::{AffineDriver, AffineF, AffineG, Driver, Drift, FrozenGenerators, GeneratorSpec};

#[derive(Clone, Debug)]
pub struct Instance {
    pub seed: u64,
    pub tree: ScenarioTree,
    pub gen: GeneratorSpec,
    /// Generators evaluated at the zero state (exact for state-free drivers).
    pub frozen: FrozenGenerators,
}

/// Ranges for random instances.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_steps: usize,
    pub max_marks: usize,
    /// `None` picks at random.
    pub brownian: Option<bool>,
    /// Upper bound on interior nodes (shrinks the instance if exceeded).
    pub max_interior: Option<usize>,
    pub beta: f64,
}

impl Shape {
    /// Small enough for the enumeration oracle.
    pub fn oracle() -> Self {
        Self { max_steps: 3, max_marks: 1, brownian: None, max_interior: Some(20), beta: 1.0 }
    }

    pub fn sweep() -> Self {
        Self { max_steps: 4, max_marks: 2, brownian: None, max_interior: Some(2_000), beta: 1.0 }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_compensator(rng: &mut ChaCha8Rng, m: usize, horizon: f64) -> CompensatorSpec {
    let curve = match rng.gen_range(0..3) {
        0 => CompensatorCurve::Zero,
        1 => CompensatorCurve::Linear { rate: rng.gen_range(0.1..1.2) },
        _ => {
            let mid = rng.gen_range(0.2..0.8) * horizon;
            let a1 = rng.gen_range(0.0..0.8);
            let a2 = a1 + rng.gen_range(0.0..0.8);
            CompensatorCurve::Piecewise { knots: vec![0.0, mid, horizon], values: vec![0.0, a1, a2] }
        }
    };
    let mut w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    // exact unit sum
    let head: f64 = w[..m - 1].iter().sum();
    w[m - 1] = 1.0 - head;
    let feedback = if rng.gen_bool(0.3) { rng.gen_range(0.0..0.5) } else { 0.0 };
    CompensatorSpec::new(curve, MarkKernel::constant(w)).with_count_feedback(feedback)
}

/// Random tree within `shape`.
pub fn random_tree(seed: u64, shape: &Shape) -> ScenarioTree {
    let mut rng = rng_for(seed, 1);
    let mut n = rng.gen_range(1..=shape.max_steps);
    let m = rng.gen_range(1..=shape.max_marks);
    let horizon = rng.gen_range(0.5..2.0);
    let mut brownian = shape.brownian.unwrap_or_else(|| rng.gen_bool(0.6));
    let comp = random_compensator(&mut rng, m, horizon);
    let marks = MarkSet::numbered(m).expect("m ≥ 1");
    loop {
        let grid = TimeGrid::uniform(n, horizon).expect("valid grid");
        let tree = build_tree(&grid, &marks, &comp, TreeOptions { brownian, ..TreeOptions::default() })
            .expect("small tree fits the budget");
        match shape.max_interior {
            Some(cap) if tree.interior_count() > cap => {
                if brownian && shape.brownian.is_none() {
                    brownian = false;
                } else {
                    n -= 1;
                }
            }
            _ => return tree,
        }
    }
}

/// Random payoff, barrier and state-free generators on `tree`.
pub fn random_given_on(tree: ScenarioTree, seed: u64, beta: f64) -> Instance {
    let mut rng = rng_for(seed, 2);
    let leaves = tree.level(tree.steps()).len();
    let terminal: Vec<f64> = (0..leaves).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let level = rng.gen_range(-0.5..0.5);
    let mut barrier = NodeProcess::from_fn(&tree, |_, _| level + rng.gen_range(-0.6..0.6));
    for (leaf, xi) in tree.leaf_ids().zip(&terminal) {
        barrier.set(leaf, barrier.get(leaf).min(*xi));
    }
    let f = NodeProcess::from_fn(&tree, |_, _| rng.gen_range(-1.0..1.0));
    let g = if tree.has_brownian() {
        NodeProcess::from_fn(&tree, |_, _| rng.gen_range(-1.0..1.0))
    } else {
        NodeProcess::zeros(&tree)
    };
    let driver: Arc<dyn Driver> = Arc::new(AffineDriver::given(f, g));
    let gen = GeneratorSpec::new(&tree, terminal, barrier, driver, beta, 0.5).expect("consistent instance");
    let frozen = FrozenGenerators::at_zero(&tree, gen.driver.as_ref());
    Instance { seed, tree, gen, frozen }
}

pub fn random_given_instance(seed: u64, shape: &Shape) -> Instance {
    random_given_on(random_tree(seed, shape), seed, shape.beta)
}

/// Random clipped-affine state-dependent generators with coefficients in
/// `[−0.5, 0.5]`, `N = steps`, `m` marks, Brownian branching on.
pub fn random_lipschitz_instance(seed: u64, steps: usize, m: usize) -> Instance {
    let mut rng = rng_for(seed, 3);
    let horizon = rng.gen_range(0.5..1.5);
    let comp = CompensatorSpec::new(CompensatorCurve::Linear { rate: rng.gen_range(0.2..1.0) }, MarkKernel::uniform(m));
    let grid = TimeGrid::uniform(steps, horizon).expect("valid grid");
    let marks = MarkSet::numbered(m).expect("m ≥ 1");
    let tree = build_tree(&grid, &marks, &comp, TreeOptions::default()).expect("small tree");
    let leaves = tree.level(steps).len();
    let terminal: Vec<f64> = tree.level(steps).iter().map(|n| n.state.w + 0.3 * f64::from(n.state.n)).collect();
    debug_assert_eq!(terminal.len(), leaves);
    let shift = rng.gen_range(-0.5..0.5);
    let mut barrier = NodeProcess::from_fn(&tree, |_, n| shift - 0.3 * n.state.w + rng.gen_range(-0.3..0.3));
    for (leaf, xi) in tree.leaf_ids().zip(&terminal) {
        barrier.set(leaf, barrier.get(leaf).min(*xi));
    }
    let mut coef = || rng.gen_range(-0.5..0.5);
    let (fy, fu, gy, gz) = (coef(), coef(), coef(), coef());
    let clip_f = rng.gen_bool(0.5).then_some(2.0);
    let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..1.0)).collect();
    let f_drift = NodeProcess::from_fn(&tree, |_, _| rng.gen_range(-0.5..0.5));
    let g_drift = NodeProcess::from_fn(&tree, |_, _| rng.gen_range(-0.5..0.5));
    let driver = AffineDriver {
        f: AffineF { y: fy, u: fu, weights, drift: Drift::table(f_drift), clip: clip_f },
        g: AffineG { y: gy, z: gz, drift: Drift::table(g_drift), clip: None },
    };
    let lip = driver.lipschitz();
    let beta = lip.beta_threshold() + 0.5;
    let gen = GeneratorSpec::new(&tree, terminal, barrier, Arc::new(driver), beta, 0.5).expect("consistent instance");
    let frozen = FrozenGenerators::at_zero(&tree, gen.driver.as_ref());
    Instance { seed, tree, gen, frozen }
}

/// Random starting triple with entries in `[−1, 1]`.
pub fn random_iterate(tree: &ScenarioTree, seed: u64) -> Iterate {
    let mut rng = rng_for(seed, 4);
    let y = NodeProcess::from_fn(tree, |_, _| rng.gen_range(-1.0..1.0));
    let z = NodeProcess::from_fn(tree, |_, _| rng.gen_range(-1.0..1.0));
    let mut u = MarkProcess::zeros(tree);
    for id in tree.all_ids() {
        u.get_mut(id).iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    Iterate { y, u, z }
}
