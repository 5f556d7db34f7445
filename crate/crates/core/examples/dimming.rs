//! Analog dimming scales the ladder; VOOK trades slots for repetition.
//!
//! `cargo run --example dimming`

use vlc_noma::analytic::{apply_analog_dimming, ber_perfect, ber_perfect_vook, LinkParams};
use vlc_noma::experiment::TABLE_GAINS;
use vlc_noma::link::{fpa_allocate, DimmingConfig};
use vlc_noma::mc::snr_to_sigma;

fn main() -> vlc_noma::Result<()> {
    let alloc = fpa_allocate(0.25, 0.3, TABLE_GAINS.len())?;
    let sigma = snr_to_sigma(120.0, 0.25, 1.0);
    let weakest = TABLE_GAINS.len();
    let h = TABLE_GAINS[weakest - 1];

    println!(
        "{:>6} {:>10} {:>6} {:>12} {:>12}",
        "factor", "codeword", "duty", "analog", "vook"
    );
    for i in 1..10 {
        let factor = f64::from(i) / 10.0;
        let vook = DimmingConfig::vook(factor)?;
        let analog = LinkParams::new(apply_analog_dimming(&alloc, factor)?, 1.0, sigma)?;
        let full = LinkParams::new(alloc.clone(), 1.0, sigma)?;
        let n = vook.data_slots();
        let v = if n == 0 {
            f64::NAN
        } else {
            ber_perfect_vook(&full, weakest, h, n)
        };
        println!(
            "{factor:>6.1} {:>10} {:>6.1} {:>12.4e} {v:>12.4e}",
            vook.codeword_string(),
            vook.duty_cycle(),
            ber_perfect(&analog, weakest, h),
        );
    }
    Ok(())
}
