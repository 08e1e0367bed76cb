// Simulate marked point process paths and check the compensator identity
// `E[N_T] = E[Σ(1 − e^{−ΔA})]` by Monte Carlo.

use mpp_rbsde::mpp::{counting_process, jump_compensator, simulate_path, simulate_statistic};
use mpp_rbsde::{CompensatorCurve, CompensatorSpec, MarkKernel, MarkSet, TimeGrid};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let marks = MarkSet::new(["small", "large"])?;
    let spec = CompensatorSpec::new(CompensatorCurve::Linear { rate: 1.5 }, MarkKernel::constant(vec![0.7, 0.3]))
        .with_count_feedback(0.25);
    let grid = TimeGrid::uniform(20, 2.0)?;

    let path = simulate_path(&spec, &marks, &grid, 42)?;
    println!("seed 42: {} events", path.len());
    for (t, e) in &path.events {
        println!("  t = {t:.2}  mark = {}", marks.labels()[*e]);
    }
    let n = counting_process(&path, &grid)?;
    println!("N_T = {}", n[grid.steps()]);

    let compensated = simulate_statistic(&spec, &marks, &grid, 0..5_000, |p| {
        let n = counting_process(p, &grid)?;
        let a = jump_compensator(p, &spec, &grid)?;
        Ok(n[grid.steps()] as f64 - a[grid.steps()])
    })?;
    println!("E[N_T − compensator_T] ≈ {:.4} ± {:.4}", compensated.mean, compensated.std_err);
    assert!(compensated.within(0.0, 4.0));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
