//! Closed-form bit error rates of the SIC receivers.
//!
//! Every CSI model shares the same recursion: the BER of the user at
//! decoding order `k` is a sum over all `3^(k-1)` vectors of earlier stage
//! errors, each weighted by the product of conditional stage probabilities
//! along its prefix. The models only differ in the stage kernel.

mod dimming;
mod interference;
mod noisy;
mod qfunc;

pub use dimming::{apply_analog_dimming, vook_ber, vook_redundancy};
pub use interference::{interference_matrix, InterferencePattern};
pub use noisy::{NoisyCsi, NoisyDiagnostics, NoisyMethod, NoisyTerm};
pub use qfunc::{fit_q_exp, fit_q_exp_least_squares, ln_q, q_function, FitGrid, QExpFit};

use serde::{Deserialize, Serialize};

use crate::link::PowerAllocation;
use crate::{Error, Result};
use interference::interference_levels;

/// Difference `ŝ_j - s_j` at one SIC stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StageError {
    /// Sent 1, decided 0.
    Missed,
    Correct,
    /// Sent 0, decided 1.
    Spurious,
}

impl StageError {
    pub const ALL: [StageError; 3] = [
        StageError::Missed,
        StageError::Correct,
        StageError::Spurious,
    ];

    pub fn value(self) -> f64 {
        match self {
            StageError::Missed => -1.0,
            StageError::Correct => 0.0,
            StageError::Spurious => 1.0,
        }
    }
}

/// Power allocation, responsivity and noise level shared by all users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub alloc: PowerAllocation,
    pub responsivity: f64,
    pub noise_std: f64,
}

impl LinkParams {
    pub fn new(alloc: PowerAllocation, responsivity: f64, noise_std: f64) -> Result<Self> {
        if !(responsivity > 0.0) {
            return Err(Error::param(
                "responsivity",
                responsivity,
                "must be positive",
            ));
        }
        if !(noise_std > 0.0) {
            return Err(Error::param("noise_std", noise_std, "must be positive"));
        }
        Ok(LinkParams {
            alloc,
            responsivity,
            noise_std,
        })
    }

    pub fn users(&self) -> usize {
        self.alloc.users()
    }

    fn check_stage(&self, order: usize, prefix: &[StageError]) {
        assert!(
            order >= 1 && order <= self.users(),
            "decoding order {order} outside 1..={}",
            self.users()
        );
        assert_eq!(prefix.len(), order - 1, "prefix length must be order - 1");
    }

    /// Signed decision margins `(P_k/2 - Σe P - I, P_k/2 + Σe P + I)` for
    /// every interference row.
    pub(crate) fn margins<'a>(
        &'a self,
        order: usize,
        prefix: &[StageError],
    ) -> impl Iterator<Item = (f64, f64)> + 'a {
        let powers = self.alloc.powers();
        let half = powers[order - 1] / 2.0;
        let prior: f64 = prefix.iter().zip(powers).map(|(e, p)| e.value() * p).sum();
        interference_levels(powers, order).map(move |i| (half - prior - i, half + prior + i))
    }
}

/// Stage kernel with both Q arguments lowered by `shift`.
fn shifted_kernel(
    link: &LinkParams,
    order: usize,
    gain: f64,
    prefix: &[StageError],
    shift: f64,
) -> f64 {
    link.check_stage(order, prefix);
    let scale = link.responsivity * gain / link.noise_std;
    let rows = 1usize << (link.users() - order);
    let sum: f64 = link
        .margins(order, prefix)
        .map(|(p, pt)| q_function(scale * p - shift) + q_function(scale * pt - shift))
        .sum();
    (sum / (2 * rows) as f64).clamp(0.0, 1.0)
}

/// Error probability of stage `order` given the earlier stage errors, with
/// exact channel knowledge.
pub fn conditional_ber_perfect(
    link: &LinkParams,
    order: usize,
    gain: f64,
    prefix: &[StageError],
) -> f64 {
    shifted_kernel(link, order, gain, prefix, 0.0)
}

/// Upper bound on the stage error probability when the receiver's gain
/// estimate is off by at most `bound`.
pub fn conditional_ber_outdated(
    link: &LinkParams,
    order: usize,
    gain: f64,
    prefix: &[StageError],
    bound: f64,
) -> f64 {
    assert!(bound >= 0.0, "error bound must be nonnegative");
    let shift = link.responsivity * link.alloc.power(order) * bound / (2.0 * link.noise_std);
    shifted_kernel(link, order, gain, prefix, shift)
}

/// Sums the final-stage kernel over every stage-error vector, weighting
/// each by its prefix probabilities. `finish` maps the final conditional
/// probability (identity except under VOOK).
pub fn chain_ber(
    order: usize,
    mut kernel: impl FnMut(usize, &[StageError]) -> f64,
    finish: impl Fn(f64) -> f64,
) -> f64 {
    let mut prefix = Vec::with_capacity(order);
    let mut acc = crate::numeric::CompensatedSum::default();
    walk(order, &mut prefix, 1.0, &mut kernel, &finish, &mut acc);
    acc.total().clamp(0.0, 1.0)
}

fn walk(
    order: usize,
    prefix: &mut Vec<StageError>,
    weight: f64,
    kernel: &mut impl FnMut(usize, &[StageError]) -> f64,
    finish: &impl Fn(f64) -> f64,
    acc: &mut crate::numeric::CompensatedSum,
) {
    let stage = prefix.len() + 1;
    let pr = kernel(stage, prefix);
    if stage == order {
        acc.add(weight * finish(pr));
        return;
    }
    for e in StageError::ALL {
        let w = match e {
            StageError::Correct => 1.0 - pr,
            _ => pr / 2.0,
        };
        if w == 0.0 {
            continue;
        }
        prefix.push(e);
        walk(order, prefix, weight * w, kernel, finish, acc);
        prefix.pop();
    }
}

pub fn ber_perfect(link: &LinkParams, order: usize, gain: f64) -> f64 {
    chain_ber(
        order,
        |j, e| conditional_ber_perfect(link, j, gain, e),
        |p| p,
    )
}

pub fn ber_outdated(link: &LinkParams, order: usize, gain: f64, bound: f64) -> f64 {
    chain_ber(
        order,
        |j, e| conditional_ber_outdated(link, j, gain, e, bound),
        |p| p,
    )
}

/// Perfect-CSI BER with `redundancy` repeated data slots per bit decoded
/// by majority vote.
pub fn ber_perfect_vook(link: &LinkParams, order: usize, gain: f64, redundancy: usize) -> f64 {
    chain_ber(
        order,
        |j, e| conditional_ber_perfect(link, j, gain, e),
        |p| vook_ber(p, redundancy),
    )
}
