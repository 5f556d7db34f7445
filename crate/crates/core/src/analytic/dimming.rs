use crate::link::{DimmingConfig, PowerAllocation};
use crate::{Error, Result};

/// Probability that a majority vote over `n` independent slots with raw
/// error `p` fails (at least half the slots wrong).
pub fn vook_ber(p: f64, n: usize) -> f64 {
    assert!(
        (0.0..=1.0).contains(&p),
        "raw error probability {p} outside [0, 1]"
    );
    assert!(n >= 1, "majority vote needs at least one slot");
    let first = n.div_ceil(2);
    let mut acc = crate::numeric::CompensatedSum::default();
    for i in first..=n {
        acc.add(binomial(n, i) * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32));
    }
    acc.total().clamp(0.0, 1.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Data slots per VOOK codeword at dimming level `factor`.
pub fn vook_redundancy(factor: f64) -> Result<usize> {
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::param(
            "dimming_factor",
            factor,
            "VOOK carries data only for 0 < factor < 1",
        ));
    }
    Ok(DimmingConfig::vook(factor)?.data_slots())
}

/// Scales every power level by `factor`.
pub fn apply_analog_dimming(alloc: &PowerAllocation, factor: f64) -> Result<PowerAllocation> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::param(
            "dimming_factor",
            factor,
            "analog dimming needs 0 < factor <= 1",
        ));
    }
    Ok(alloc.scaled(factor))
}
