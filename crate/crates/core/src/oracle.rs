//! Exact BER of the SIC receiver for small user counts.
//!
//! The detector's stage thresholds cut the real line into intervals of
//! constant decision trace. Averaging the Gaussian measure of the wrong
//! intervals over all `2^N` transmitted words gives the BER without any
//! approximation beyond `erfc`.

use crate::analytic::q_function;
use crate::link::{superimpose, PowerAllocation};
use crate::numeric::CompensatedSum;
use crate::{Error, Result};

/// Largest user count the oracle enumerates.
pub const MAX_USERS: usize = 12;

/// Intervals narrower than this carry no representable probability.
const MIN_WIDTH: f64 = 1e-300;

/// Piecewise-constant map from received sample to stage decisions.
///
/// Interval `i` is `[breakpoints[i-1], breakpoints[i])` with the outer
/// intervals unbounded; a sample on a breakpoint belongs to the interval on
/// its right, matching the detector's tie rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMap {
    pub breakpoints: Vec<f64>,
    pub labels: Vec<Vec<bool>>,
}

impl DecisionMap {
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, &[bool])> + '_ {
        let lo = std::iter::once(f64::NEG_INFINITY).chain(self.breakpoints.iter().copied());
        let hi = self
            .breakpoints
            .iter()
            .copied()
            .chain(std::iter::once(f64::INFINITY));
        lo.zip(hi)
            .zip(&self.labels)
            .map(|((l, h), lab)| (l, h, lab.as_slice()))
    }

    pub fn label_at(&self, y: f64) -> &[bool] {
        &self.labels[self.breakpoints.partition_point(|&b| b <= y)]
    }
}

pub fn decision_map(
    order: usize,
    alloc: &PowerAllocation,
    estimated_gain: f64,
    responsivity: f64,
) -> Result<DecisionMap> {
    check(order, alloc)?;
    let scale = responsivity * estimated_gain;
    let mut leaves = Vec::new();
    split(
        alloc.powers(),
        order,
        scale,
        (f64::NEG_INFINITY, f64::INFINITY),
        &mut Vec::with_capacity(order),
        0.0,
        &mut leaves,
    );
    // Leaves come out left to right because the 0-branch lies below each
    // threshold.
    let breakpoints = leaves.iter().skip(1).map(|(lo, _)| *lo).collect();
    let labels = leaves.into_iter().map(|(_, t)| t).collect();
    Ok(DecisionMap {
        breakpoints,
        labels,
    })
}

fn split(
    powers: &[f64],
    order: usize,
    scale: f64,
    (lo, hi): (f64, f64),
    trace: &mut Vec<bool>,
    cancelled: f64,
    out: &mut Vec<(f64, Vec<bool>)>,
) {
    let stage = trace.len();
    if stage == order {
        out.push((lo, trace.clone()));
        return;
    }
    let p = powers[stage];
    let threshold = scale * (cancelled + p / 2.0);
    let zero = (lo, hi.min(threshold));
    let one = (lo.max(threshold), hi);
    for (bit, (a, b), next) in [(false, zero, cancelled), (true, one, cancelled + p)] {
        if b - a > MIN_WIDTH {
            trace.push(bit);
            split(powers, order, scale, (a, b), trace, next, out);
            trace.pop();
        }
    }
}

fn check(order: usize, alloc: &PowerAllocation) -> Result<()> {
    let n = alloc.users();
    if n > MAX_USERS {
        return Err(Error::InvalidConfig(format!(
            "oracle enumerates at most {MAX_USERS} users, got {n}"
        )));
    }
    if order == 0 || order > n {
        return Err(Error::InvalidConfig(format!(
            "decoding order {order} outside 1..={n}"
        )));
    }
    Ok(())
}

/// `P(lo <= mean + sd Z < hi)` evaluated on the tail that avoids
/// cancellation.
fn gaussian_mass(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    if a >= 0.0 {
        q_function(a) - q_function(b)
    } else if b <= 0.0 {
        q_function(-b) - q_function(-a)
    } else {
        1.0 - q_function(-a) - q_function(b)
    }
}

/// Exact BER of the user at decoding order `order` whose true gain is
/// `gain` and whose detector uses `estimated_gain`.
pub fn exact_ber(
    order: usize,
    alloc: &PowerAllocation,
    gain: f64,
    estimated_gain: f64,
    responsivity: f64,
    noise_std: f64,
) -> Result<f64> {
    if !(noise_std > 0.0) {
        return Err(Error::param("noise_std", noise_std, "must be positive"));
    }
    let map = decision_map(order, alloc, estimated_gain, responsivity)?;
    let n = alloc.users();
    let mut acc = CompensatedSum::default();
    let mut bits = vec![false; n];
    for word in 0u32..(1 << n) {
        for (i, b) in bits.iter_mut().enumerate() {
            *b = word >> i & 1 == 1;
        }
        let mean = responsivity * gain * superimpose(&bits, alloc);
        for (lo, hi, label) in map.intervals() {
            if label[order - 1] != bits[order - 1] {
                acc.add(gaussian_mass(lo, hi, mean, noise_std));
            }
        }
    }
    Ok((acc.total() / f64::from(1u32 << n)).clamp(0.0, 1.0))
}
