// Snell envelope of a reward process and its Doob–Meyer split.

use mpp_rbsde::lattice::build_tree;
use mpp_rbsde::snell::{doob_meyer, envelope_jump_support, snell_envelope};
use mpp_rbsde::{CompensatorCurve, CompensatorSpec, MarkKernel, MarkSet, NodeId, NodeProcess, TimeGrid, TreeOptions};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let marks = MarkSet::numbered(1)?;
    let spec = CompensatorSpec::new(CompensatorCurve::Linear { rate: 0.5 }, MarkKernel::uniform(1));
    let grid = TimeGrid::uniform(4, 1.0)?;
    let tree = build_tree(&grid, &marks, &spec, TreeOptions::default())?;

    // put on W plus a premium that decays in time, so early stopping pays
    let eta = NodeProcess::from_fn(&tree, |id, n| (0.2 - n.state.w).max(0.0) + 0.3 * (1.0 - tree.grid().time(id.level)));
    let r = snell_envelope(&tree, &eta);
    let dm = doob_meyer(&tree, &r)?;
    println!("R_0 = {:.6}, η_0 = {:.6}", r.get(NodeId::ROOT), eta.get(NodeId::ROOT));
    println!("K_T max = {:.6}", dm.compensator.max_abs());
    let off_contact = envelope_jump_support(&tree, &dm, &eta);
    println!("compensator increases off contact at {} nodes", off_contact.len());
    assert!(off_contact.is_empty());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
