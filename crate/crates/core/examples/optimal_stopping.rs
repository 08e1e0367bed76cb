// Stopping-time representation: ε-optimal and smallest optimal rules,
// checked against brute-force enumeration.

use std::sync::Arc;

use mpp_rbsde::lattice::build_tree;
use mpp_rbsde::rbsde::solve_frozen;
use mpp_rbsde::stopping::{
    brute_force_value, epsilon_optimal_time, k_flatness_before_stop, reward_of_rule, smallest_optimal_time,
};
use mpp_rbsde::{
    AffineDriver, CompensatorCurve, CompensatorSpec, FrozenGenerators, GeneratorSpec, MarkKernel, MarkSet, NodeId,
    NodeProcess, TimeGrid, TreeOptions,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let marks = MarkSet::numbered(1)?;
    let spec = CompensatorSpec::new(CompensatorCurve::Linear { rate: 0.7 }, MarkKernel::uniform(1));
    let grid = TimeGrid::uniform(3, 1.0)?;
    let tree = build_tree(&grid, &marks, &spec, TreeOptions::jumps_only())?;

    let terminal: Vec<f64> = tree.level(3).iter().map(|n| 0.5 * f64::from(n.state.n) - 0.2).collect();
    let barrier = NodeProcess::from_fn(&tree, |id, n| if id.level < 3 { 0.1 + 0.2 * f64::from(n.state.n) } else { -5.0 });
    let driver = Arc::new(AffineDriver::given(NodeProcess::constant(&tree, -0.1), NodeProcess::zeros(&tree)));
    let gen = GeneratorSpec::new(&tree, terminal, barrier, driver, 1.0, 0.5)?;
    let frozen = FrozenGenerators::at_zero(&tree, gen.driver.as_ref());
    let sol = solve_frozen(&tree, &gen, &frozen);
    let y0 = sol.y.get(NodeId::ROOT);

    let cert = brute_force_value(&tree, &gen, &frozen)?;
    println!("Y_0 = {y0:.6}, enumeration over {} rules gives {:.6}", cert.enumerated, cert.value);
    for eps in [0.1, 0.01] {
        let rule = epsilon_optimal_time(&tree, &sol, &gen.barrier, eps);
        let reward = reward_of_rule(&tree, &gen, &frozen, &rule);
        println!("ε = {eps}: reward {reward:.6}, K flat before stop: {:.1e}", k_flatness_before_stop(&tree, &sol, &rule));
    }
    let tau = smallest_optimal_time(&tree, &sol, &gen.barrier);
    println!("τ* stops at levels {:?}", tau.stop_levels(&tree));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
