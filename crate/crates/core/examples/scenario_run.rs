//! Runs a scenario preset into a directory and compares two of its curves.
//!
//! `cargo run --release --example scenario_run -- [out_dir]`

use std::path::PathBuf;

use vlc_noma::experiment::{compare, run, ExperimentConfig, Rule, Scenario, Tolerance};

fn main() -> vlc_noma::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("vlc-noma-example"));
    let mut cfg = ExperimentConfig::preset(Scenario::Fig4);
    cfg.trials = 200_000;
    cfg.modes.oracle = true;
    let result = run(&cfg, &out)?;
    for f in &result.files {
        println!("wrote {}", f.display());
    }

    let tol = Tolerance::new(Rule::WithinStderr { k: 3.0 }).with_min_ber(1e-5);
    let report = compare(&out.join("oracle.csv"), &out.join("monte_carlo.csv"), tol)?;
    println!(
        "oracle vs simulation: {}/{} points outside {} (max ratio {:.3})",
        report.failed, report.checked, tol.rule, report.max_ratio
    );
    Ok(())
}
