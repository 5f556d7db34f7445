//! Perfect channel knowledge: chain recursion, exact oracle and simulation
//! side by side for the three reference users.
//!
//! `cargo run --release --example perfect_csi`

use vlc_noma::analytic::{ber_perfect, LinkParams};
use vlc_noma::experiment::TABLE_GAINS;
use vlc_noma::link::fpa_allocate;
use vlc_noma::mc::{run_trials, snr_to_sigma, TrialConfig};
use vlc_noma::oracle::exact_ber;

const POWER: f64 = 0.25;
const RHO: f64 = 0.3;

fn main() -> vlc_noma::Result<()> {
    let snrs = vec![105.0, 112.5, 120.0, 127.5];
    let mc = run_trials(
        &TrialConfig::new(TABLE_GAINS.to_vec(), RHO, snrs.clone()),
        7,
        400_000,
    )?;

    println!(
        "{:>6} {:>4} {:>12} {:>12} {:>12} {:>10}",
        "SNR", "user", "analytic", "oracle", "sim", "stderr"
    );
    for (i, &snr) in snrs.iter().enumerate() {
        let alloc = fpa_allocate(POWER, RHO, TABLE_GAINS.len())?;
        let sigma = snr_to_sigma(snr, POWER, 1.0);
        let link = LinkParams::new(alloc.clone(), 1.0, sigma)?;
        for (k, &h) in TABLE_GAINS.iter().enumerate() {
            let order = k + 1;
            println!(
                "{snr:>6.1} {order:>4} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.2e}",
                ber_perfect(&link, order, h),
                exact_ber(order, &alloc, h, h, 1.0, sigma)?,
                mc.curve.ber[i][k],
                mc.curve.stderr[i][k],
            );
        }
    }
    Ok(())
}
