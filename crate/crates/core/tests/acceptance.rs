//! Acceptance suite: one line per criterion, all must pass.

use std::io::Write;

use mpp_rbsde::verify::{Harness, Scale};

#[test]
fn acceptance_criteria() {
    let report = Harness::new(Scale::Small).run();
    // a raw handle bypasses libtest's capture so the lines always show
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    for c in &report.criteria {
        writeln!(out, "{}", c.line()).unwrap();
        for d in &c.diagnostics {
            writeln!(out, "    {d}").unwrap();
        }
    }
    drop(out);
    let failed: Vec<u8> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
