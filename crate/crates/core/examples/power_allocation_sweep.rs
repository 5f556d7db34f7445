//! Average BER against the power ratio of the allocation ladder.
//!
//! `cargo run --example power_allocation_sweep`

use vlc_noma::analytic::{ber_perfect, LinkParams};
use vlc_noma::experiment::TABLE_GAINS;
use vlc_noma::link::fpa_allocate;
use vlc_noma::mc::snr_to_sigma;

fn main() -> vlc_noma::Result<()> {
    let snrs = [110.0, 115.0, 120.0];
    print!("{:>5}", "rho");
    for s in snrs {
        print!(" {:>12}", format!("{s} dB"));
    }
    println!();

    let mut best = [(f64::INFINITY, 0.0); 3];
    for i in 1..=9 {
        let rho = f64::from(i) / 10.0;
        let alloc = fpa_allocate(0.25, rho, TABLE_GAINS.len())?;
        print!("{rho:>5.1}");
        for (j, &snr) in snrs.iter().enumerate() {
            let link = LinkParams::new(alloc.clone(), 1.0, snr_to_sigma(snr, 0.25, 1.0))?;
            let avg = TABLE_GAINS
                .iter()
                .enumerate()
                .map(|(k, &h)| ber_perfect(&link, k + 1, h))
                .sum::<f64>()
                / TABLE_GAINS.len() as f64;
            if avg < best[j].0 {
                best[j] = (avg, rho);
            }
            print!(" {avg:>12.4e}");
        }
        println!();
    }
    for (s, (_, rho)) in snrs.iter().zip(best) {
        println!("best rho at {s} dB: {rho:.1}");
    }
    Ok(())
}
