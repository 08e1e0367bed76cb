use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpp_rbsde::config::RunConfig;
use mpp_rbsde::run::{persist, run_verb, RunError, Verb};
use mpp_rbsde::verify::{Harness, Scale};

#[derive(Parser)]
#[command(version, about = "Reflected BSDEs on marked-point-process scenario trees")]
struct Cli {
    #[command(subcommand)]
    verb: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory (overrides `output` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "small")]
    scale: Scale,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve with the configured generators and run every check.
    Solve,
    /// Solve by Picard iteration and report the contraction trace.
    Picard,
    /// Compare against the brute-force stopping oracle.
    Oracle,
    /// Simulate marked point process paths.
    Simulate,
    /// Weighted norms of the solution.
    Norms,
    /// Run the full verification suite.
    Verify,
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn verify(cli: &Cli) -> ExitCode {
    let mut harness = Harness::new(cli.scale);
    if let Some(seed) = cli.seed {
        harness = harness.with_seed_offset(seed);
    }
    let report = harness.run();
    for c in &report.criteria {
        println!("{}", c.line());
    }
    if let Some(dir) = &cli.out {
        let written = std::fs::create_dir_all(dir).and_then(|_| {
            std::fs::write(dir.join("verify.json"), serde_json::to_string_pretty(&report).expect("report serialises"))
        });
        if let Err(e) = written {
            eprintln!("error: writing {}: {e}", dir.display());
            return ExitCode::from(1);
        }
    }
    ExitCode::from(u8::from(!report.all_passed()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verb = match cli.verb {
        Command::Verify => return verify(&cli),
        Command::Solve => Verb::Solve,
        Command::Picard => Verb::Picard,
        Command::Oracle => Verb::Oracle,
        Command::Simulate => Verb::Simulate,
        Command::Norms => Verb::Norms,
    };
    let Some(path) = &cli.config else {
        eprintln!("error: --config <path> is required for this verb");
        return ExitCode::from(2);
    };
    let mut cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => return fail(&e.into()),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.out.is_some() {
        cfg.output = cli.out.clone();
    }
    let artifact = match run_verb(&cfg, verb) {
        Ok(a) => a,
        Err(e) => return fail(&e),
    };
    if let Some(dir) = &cfg.output {
        if let Err(e) = persist(&artifact, dir) {
            return fail(&e);
        }
    }
    if let Some(s) = &artifact.solve {
        println!("Y0 = {}", s.y0);
    }
    if let Some(s) = &artifact.simulation {
        println!("E[N_T] ≈ {} ± {} (exact {})", s.count.mean, s.count.std_err, s.expected_count);
    }
    for v in &artifact.verdicts {
        println!("{} {} (value {:.3e}, tolerance {:.3e})", if v.passed { "PASS" } else { "FAIL" }, v.check, v.value, v.tolerance);
    }
    ExitCode::from(u8::from(!artifact.passed()))
}
