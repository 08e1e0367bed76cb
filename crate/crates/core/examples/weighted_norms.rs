// Weighted L² norms on a tree and the exponential-weight Cauchy bound.

use mpp_rbsde::instances::{random_given_instance, Shape};
use mpp_rbsde::rbsde::solve_frozen;
use mpp_rbsde::wnorm::{cauchy_weight_bound, norm_sq};
use mpp_rbsde::{NormKind, WeightedNorm};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let inst = random_given_instance(3, &Shape::sweep());
    let sol = solve_frozen(&inst.tree, &inst.gen, &inst.frozen);
    for beta in [0.5, 1.0, 2.0] {
        let a = norm_sq(&inst.tree, &sol.y, &WeightedNorm::new(NormKind::A, beta, 0.0)?)?;
        let w = norm_sq(&inst.tree, &sol.y, &WeightedNorm::new(NormKind::W, beta, 0.0)?)?;
        let p = norm_sq(&inst.tree, &sol.u, &WeightedNorm::new(NormKind::P, beta, 0.0)?)?;
        println!("β = {beta}: ‖Y‖²_A = {a:.5}  ‖Y‖²_W = {w:.5}  ‖U‖²_p = {p:.5}");
        let c = cauchy_weight_bound(&inst.tree, &inst.frozen.f, beta)?;
        println!("        Cauchy bound {:.5} ≤ {:.5}: {}", c.lhs, c.rhs, c.holds());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
