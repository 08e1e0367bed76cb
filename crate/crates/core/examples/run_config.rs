// Load a TOML run configuration, solve, and write the artifact directory.

use mpp_rbsde::config::RunConfig;
use mpp_rbsde::run::{persist, run};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/picard.toml");
    let cfg = RunConfig::load(path.as_ref())?;
    let artifact = run(&cfg)?;
    if let Some(s) = &artifact.solve {
        println!("Y_0 = {:.8}", s.y0);
        if let Some(p) = &s.picard {
            println!("Picard: {} iterations, distances {:?}", p.iterations, p.distances);
        }
    }
    for v in &artifact.verdicts {
        println!("{} {}", if v.passed { "PASS" } else { "FAIL" }, v.check);
    }
    let dir = std::env::temp_dir().join("mpp-rbsde-example");
    persist(&artifact, &dir)?;
    println!("artifacts in {}", dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
