use proptest::prelude::*;

use mpp_rbsde::instances::{random_given_instance, random_lipschitz_instance, random_tree, Shape};
use mpp_rbsde::picard::select_contraction_parameters;
use mpp_rbsde::rbsde::{solve_frozen, RbsdeSolution};
use mpp_rbsde::snell::snell_envelope;
use mpp_rbsde::lattice::conditional_expectation;
use mpp_rbsde::verify::{Harness, Scale};
use mpp_rbsde::wnorm::norm_sq;
use mpp_rbsde::{FrozenGenerators, GeneratorSpec, Lipschitz, NodeProcess, NormKind, ScenarioTree, WeightedNorm};

fn noise(tree: &ScenarioTree, seed: u64) -> NodeProcess {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    NodeProcess::from_fn(tree, |_, _| {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn norm_is_homogeneous_and_subadditive(seed in 0u64..10_000, c in -3.0f64..3.0, beta in 0.0f64..3.0) {
        let tree = random_tree(seed, &Shape::sweep());
        let x = noise(&tree, seed);
        let y = noise(&tree, seed + 1);
        for kind in [NormKind::A, NormKind::W, NormKind::APlusLambda] {
            let w = WeightedNorm::new(kind, beta, 0.5).unwrap();
            let n = |p: &NodeProcess| norm_sq(&tree, p, &w).unwrap().sqrt();
            let scaled = x.map(|v| c * v);
            prop_assert!((n(&scaled) - c.abs() * n(&x)).abs() <= 1e-12 * (1.0 + n(&x)));
            let sum = x.zip_with(&y, |a, b| a + b);
            prop_assert!(n(&sum) <= n(&x) + n(&y) + 1e-12);
        }
    }

    #[test]
    fn norm_grows_with_beta(seed in 0u64..10_000, b1 in 0.0f64..2.0, db in 0.0f64..2.0) {
        let tree = random_tree(seed, &Shape::sweep());
        let x = noise(&tree, seed);
        let lo = norm_sq(&tree, &x, &WeightedNorm::new(NormKind::A, b1, 0.0).unwrap()).unwrap();
        let hi = norm_sq(&tree, &x, &WeightedNorm::new(NormKind::A, b1 + db, 0.0).unwrap()).unwrap();
        prop_assert!(hi >= lo * (1.0 - 1e-14));
        // equivalence: the weight is bounded by e^{β A_T} on the tree
        let a_max = tree.all_ids().map(|id| tree.node(id).state.a).fold(0.0, f64::max);
        prop_assert!(hi <= lo * ((db) * a_max).exp() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn snell_envelope_is_smallest_dominating_supermartingale(seed in 0u64..10_000, bump in 0.0f64..1.0) {
        let tree = random_tree(seed, &Shape::sweep());
        let eta = noise(&tree, seed);
        let r = snell_envelope(&tree, &eta);
        for id in tree.interior_ids() {
            prop_assert!(r.get(id) >= eta.get(id));
            prop_assert!(r.get(id) >= conditional_expectation(&tree, &r, id) - 1e-12);
        }
        // another dominating supermartingale: the envelope of a larger reward
        let larger = eta.zip_with(&noise(&tree, seed + 7), |a, b| a + bump * b.abs());
        let s = snell_envelope(&tree, &larger);
        for id in tree.all_ids() {
            prop_assert!(s.get(id) >= r.get(id) - 1e-12);
        }
    }

    #[test]
    fn picard_feasibility_is_monotone_in_beta(f in 0.0f64..2.0, u in 0.0f64..2.0, g in 0.0f64..2.0, z in 0.0f64..2.0, extra in 0.01f64..5.0) {
        let lip = Lipschitz { f, u, g, z };
        let threshold = lip.beta_threshold();
        prop_assert!(select_contraction_parameters(lip, threshold).is_err());
        prop_assert!(select_contraction_parameters(lip, threshold * 0.5).is_err());
        let a = select_contraction_parameters(lip, threshold + extra).unwrap();
        let b = select_contraction_parameters(lip, threshold + 2.0 * extra).unwrap();
        prop_assert!(a.is_feasible_for(&lip) && b.is_feasible_for(&lip));
        prop_assert!(b.alpha_min <= a.alpha_min);
    }
}

#[test]
fn solution_is_monotone_in_the_barrier() {
    for seed in 0..10 {
        let inst = random_given_instance(seed, &Shape::sweep());
        let base = solve_frozen(&inst.tree, &inst.gen, &inst.frozen);
        let lowered = inst.gen.barrier.map(|h| h - 0.25);
        let gen = GeneratorSpec::new(&inst.tree, inst.gen.terminal.clone(), lowered, inst.gen.driver.clone(), inst.gen.beta, inst.gen.delta).unwrap();
        let sol = solve_frozen(&inst.tree, &gen, &inst.frozen);
        for id in inst.tree.all_ids() {
            assert!(sol.y.get(id) <= base.y.get(id) + 1e-12);
        }
    }
}

#[test]
fn lipschitz_instances_are_reproducible() {
    let a = random_lipschitz_instance(5, 3, 2);
    let b = random_lipschitz_instance(5, 3, 2);
    assert_eq!(a.gen.terminal, b.gen.terminal);
    assert_eq!(a.gen.lipschitz, b.gen.lipschitz);
}

/// Drops the reflection: Y is the unconstrained solution.
fn unreflected(tree: &ScenarioTree, gen: &GeneratorSpec, frozen: &FrozenGenerators) -> RbsdeSolution {
    let low = gen.barrier.map(|_| -1e6);
    let free = GeneratorSpec::new(tree, gen.terminal.clone(), low, gen.driver.clone(), gen.beta, gen.delta).unwrap();
    solve_frozen(tree, &free, frozen)
}

/// Reflects correctly but reports Y off by a small amount at the root.
fn shifted_root(tree: &ScenarioTree, gen: &GeneratorSpec, frozen: &FrozenGenerators) -> RbsdeSolution {
    let mut sol = solve_frozen(tree, gen, frozen);
    let root = mpp_rbsde::NodeId::ROOT;
    sol.y.set(root, sol.y.get(root) + 1e-6);
    sol
}

/// Y too high everywhere: stopping rewards fall short of Y_0.
fn inflated(tree: &ScenarioTree, gen: &GeneratorSpec, frozen: &FrozenGenerators) -> RbsdeSolution {
    let mut sol = solve_frozen(tree, gen, frozen);
    sol.y = sol.y.map(|y| y + 0.5);
    sol
}

#[test]
fn broken_solvers_are_caught() {
    let h = Harness::new(Scale::Small).with_solver(unreflected);
    for id in [1, 2, 3] {
        let r = h.run_one(id).unwrap();
        assert!(!r.passed, "criterion {id} missed the unreflected solver: {}", r.detail);
        assert!(!r.diagnostics.is_empty());
    }
    let h = Harness::new(Scale::Small).with_solver(shifted_root);
    for id in [1, 3] {
        assert!(!h.run_one(id).unwrap().passed, "criterion {id} missed a 1e-6 shift");
    }
    let h = Harness::new(Scale::Small).with_solver(inflated);
    for id in [1, 5, 6] {
        assert!(!h.run_one(id).unwrap().passed, "criterion {id} missed an inflated Y");
    }
}
