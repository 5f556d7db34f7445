//! Decision regions of the SIC detector and the exact BER they imply.
//!
//! `cargo run --example exact_oracle`

use vlc_noma::analytic::{ber_perfect, LinkParams};
use vlc_noma::link::fpa_allocate;
use vlc_noma::oracle::{decision_map, exact_ber};

fn main() -> vlc_noma::Result<()> {
    let alloc = fpa_allocate(1.0, 0.3, 3)?;
    let gain = 1.0;

    for order in 1..=3 {
        println!("receiver {order}:");
        let map = decision_map(order, &alloc, gain, 1.0)?;
        for (lo, hi, trace) in map.intervals() {
            let bits: String = trace.iter().map(|&b| if b { '1' } else { '0' }).collect();
            println!("  [{lo:>8.4}, {hi:>8.4})  -> {bits}");
        }
    }

    println!();
    println!(
        "{:>6} {:>4} {:>12} {:>12}",
        "sigma", "user", "oracle", "chain"
    );
    for sigma in [0.02, 0.05, 0.1] {
        let link = LinkParams::new(alloc.clone(), 1.0, sigma)?;
        for k in 1..=3 {
            println!(
                "{sigma:>6.2} {k:>4} {:>12.5e} {:>12.5e}",
                exact_ber(k, &alloc, gain, gain, 1.0, sigma)?,
                ber_perfect(&link, k, gain)
            );
        }
    }
    Ok(())
}
