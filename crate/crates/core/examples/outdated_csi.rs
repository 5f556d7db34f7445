//! Stale gains after users move: mobility bound against simulation for
//! both motion regimes, using the built-in scenario presets.
//!
//! `cargo run --release --example outdated_csi`

use vlc_noma::experiment::{compute, ExperimentConfig, Scenario};

fn main() -> vlc_noma::Result<()> {
    for scenario in [Scenario::Fig8, Scenario::Fig9] {
        let mut cfg = ExperimentConfig::preset(scenario);
        cfg.trials = 100_000;
        cfg.snr_db = vec![110.0, 120.0, 130.0];
        let (families, diag) = compute(&cfg)?;
        println!("{scenario}: {}", scenario.description());
        for fam in &families {
            println!("  {}", fam.name);
            for (i, snr) in fam.curve.snr_db.iter().enumerate() {
                let ber: Vec<String> = fam.curve.ber[i]
                    .iter()
                    .map(|b| format!("{b:.3e}"))
                    .collect();
                println!("    {snr:>6.1} dB  {}", ber.join("  "));
            }
        }
        println!(
            "  mobility epochs {}, order changes {}",
            diag.mobility_epochs, diag.order_changes
        );
    }
    Ok(())
}
