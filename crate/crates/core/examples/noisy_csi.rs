//! Imperfect gain estimates: closed form, quadrature and simulation.
//!
//! The closed form ignores the receiver's estimate floor, so it drifts far
//! from the simulated detector once the estimation error rivals the gain.
//!
//! `cargo run --release --example noisy_csi`

use vlc_noma::analytic::{LinkParams, NoisyCsi, NoisyDiagnostics, NoisyMethod, QExpFit};
use vlc_noma::experiment::TABLE_GAINS;
use vlc_noma::link::fpa_allocate;
use vlc_noma::mc::{run_trials, snr_to_sigma, CsiErrorModel, TrialConfig};

fn main() -> vlc_noma::Result<()> {
    let variance = 2e-6;
    let snrs = vec![110.0, 120.0, 130.0];
    let mut cfg = TrialConfig::new(TABLE_GAINS.to_vec(), 0.3, snrs.clone());
    cfg.csi = CsiErrorModel::NoisyFixed { variance };
    let mc = run_trials(&cfg, 11, 200_000)?;

    let closed = NoisyCsi::new(variance, *QExpFit::standard(), NoisyMethod::ClosedForm)?;
    let quad = NoisyCsi::new(variance, *QExpFit::standard(), NoisyMethod::Quadrature)?;
    let mut diag = NoisyDiagnostics::default();

    println!(
        "{:>6} {:>4} {:>12} {:>12} {:>12}",
        "SNR", "user", "closed", "quadrature", "sim"
    );
    for (i, &snr) in snrs.iter().enumerate() {
        let alloc = fpa_allocate(0.25, 0.3, TABLE_GAINS.len())?;
        let link = LinkParams::new(alloc, 1.0, snr_to_sigma(snr, 0.25, 1.0))?;
        for (k, &h) in TABLE_GAINS.iter().enumerate() {
            println!(
                "{snr:>6.1} {:>4} {:>12.4e} {:>12.4e} {:>12.4e}",
                k + 1,
                closed.ber(&link, k + 1, h, &mut diag),
                quad.ber(&link, k + 1, h, &mut diag),
                mc.curve.ber[i][k],
            );
        }
    }
    println!("{diag:?}");
    Ok(())
}
