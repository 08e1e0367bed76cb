// Build a scenario tree and recover the martingale representation
// `ΔM = Z ΔW + Σ_e U(e) Δq(e) + residual` at a node.

use mpp_rbsde::lattice::{build_tree, conditional_expectation, extract_representation};
use mpp_rbsde::{CompensatorCurve, CompensatorSpec, MarkKernel, MarkSet, NodeId, NodeProcess, TimeGrid, TreeOptions};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let marks = MarkSet::numbered(2)?;
    let spec = CompensatorSpec::new(CompensatorCurve::Linear { rate: 0.8 }, MarkKernel::constant(vec![0.5, 0.5]));
    let grid = TimeGrid::uniform(3, 1.0)?;
    let tree = build_tree(&grid, &marks, &spec, TreeOptions::default())?;
    println!("{:?}", tree.summary());
    println!("level sizes {:?}, leaf mass {}", tree.level_sizes(), tree.leaf_mass());

    // a martingale with both Brownian and jump exposure
    let leaves: Vec<f64> = tree.level(3).iter().map(|n| n.state.w + 0.5 * f64::from(n.state.n)).collect();
    let m = tree.martingale_from_leaves(&leaves);
    let v = NodeProcess::from_fn(&tree, |_, n| n.state.w + 0.5 * f64::from(n.state.n));
    let root = NodeId::ROOT;
    println!("E[V_1] = {:.6}", conditional_expectation(&tree, &v, root));

    let rep = extract_representation(&tree, &m, root);
    println!("Z = {:.6}, U = {:?}, residual branches = {:?}", rep.z, rep.u, rep.branch_residuals);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
