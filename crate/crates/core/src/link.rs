//! Downlink NOMA transmission: user ordering, fixed power allocation, OOK
//! superposition, VOOK framing and the per-user SIC detector.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Floor applied to estimated gains after error injection.
pub const ESTIMATE_FLOOR: f64 = 1e-12;

/// Length of a VOOK codeword in slots.
pub const CODEWORD_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserChannel {
    /// 1-based user identifier, stable across reorderings.
    pub user: usize,
    pub gain: f64,
    /// 1-based SIC decoding order; 1 is the weakest estimated channel.
    pub order: usize,
    pub estimated_gain: f64,
}

impl UserChannel {
    /// Channel with perfect knowledge; order is assigned by [`order_users`].
    pub fn perfect(user: usize, gain: f64) -> Self {
        UserChannel {
            user,
            gain,
            order: user,
            estimated_gain: gain,
        }
    }
}

/// Builds perfect-CSI channels for gains listed by user and orders them.
pub fn users_from_gains(gains: &[f64]) -> Vec<UserChannel> {
    let users = gains
        .iter()
        .enumerate()
        .map(|(i, &g)| UserChannel::perfect(i + 1, g))
        .collect();
    order_users(users)
}

/// Stable ascending sort by estimated gain; rewrites the decoding orders.
pub fn order_users(mut channels: Vec<UserChannel>) -> Vec<UserChannel> {
    channels.sort_by(|a, b| a.estimated_gain.total_cmp(&b.estimated_gain));
    for (rank, c) in channels.iter_mut().enumerate() {
        c.order = rank + 1;
    }
    channels
}

/// Per-user optical power levels, indexed by decoding order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    total: f64,
    rho: Option<f64>,
    powers: Vec<f64>,
}

impl PowerAllocation {
    /// Arbitrary nonnegative levels. Used by oracles and custom setups.
    pub fn from_levels(powers: Vec<f64>) -> Result<Self> {
        if powers.is_empty() {
            return Err(Error::InvalidConfig(
                "power allocation needs at least one user".into(),
            ));
        }
        if let Some(&p) = powers.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::param("power", p, "must be finite and nonnegative"));
        }
        let total = crate::numeric::sum(powers.iter().copied());
        Ok(PowerAllocation {
            total,
            rho: None,
            powers,
        })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn users(&self) -> usize {
        self.powers.len()
    }

    /// Power of the user at 1-based decoding order `k`.
    pub fn power(&self, k: usize) -> f64 {
        self.powers[k - 1]
    }

    /// Every level multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        PowerAllocation {
            total: self.total * factor,
            rho: self.rho,
            powers: self.powers.iter().map(|p| p * factor).collect(),
        }
    }
}

/// Geometric ladder `P_i = rho * P_{i-1}` summing to `total`.
pub fn fpa_allocate(total: f64, rho: f64, users: usize) -> Result<PowerAllocation> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::param("total_power", total, "must be positive"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param("rho", rho, "must lie in (0, 1)"));
    }
    if users == 0 {
        return Err(Error::InvalidConfig("at least one user is required".into()));
    }
    // (1 - rho) / (1 - rho^N) without cancellation as rho -> 1.
    let first = total * (1.0 - rho) / -(users as f64 * rho.ln()).exp_m1();
    let powers: Vec<f64> = std::iter::successors(Some(first), |p| Some(p * rho))
        .take(users)
        .collect();
    Ok(PowerAllocation {
        total,
        rho: Some(rho),
        powers,
    })
}

/// Superimposed optical amplitude `sum P_i s_i`.
pub fn superimpose(bits: &[bool], alloc: &PowerAllocation) -> f64 {
    debug_assert_eq!(bits.len(), alloc.users());
    bits.iter()
        .zip(alloc.powers())
        .filter(|(&b, _)| b)
        .map(|(_, p)| p)
        .sum()
}

/// Result of running the SIC cascade up to the receiver's own stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SicOutcome {
    pub bit: bool,
    /// Stage decisions `ŝ_1..ŝ_k`.
    pub trace: Vec<bool>,
}

/// Successive interference cancellation at the receiver of decoding order
/// `order`. The receiver's estimated gain sets every threshold and every
/// subtraction; signals with higher order stay in the residual as noise.
pub fn sic_decode(
    sample: f64,
    order: usize,
    estimated_gain: f64,
    alloc: &PowerAllocation,
    responsivity: f64,
) -> SicOutcome {
    let mut trace = Vec::with_capacity(order);
    let scale = responsivity * estimated_gain;
    let mut cancelled = 0.0;
    for &p in &alloc.powers()[..order] {
        // Same as comparing the residual against scale * p / 2, but rounds
        // identically to the oracle's interval boundaries.
        let bit = sample >= scale * (cancelled + p / 2.0);
        if bit {
            cancelled += p;
        }
        trace.push(bit);
    }
    SicOutcome {
        bit: *trace.last().expect("order >= 1"),
        trace,
    }
}

/// Allocation-free variant of [`sic_decode`] returning only `ŝ_k`.
#[inline]
pub fn sic_decide(
    sample: f64,
    order: usize,
    estimated_gain: f64,
    powers: &[f64],
    responsivity: f64,
) -> bool {
    let scale = responsivity * estimated_gain;
    let mut cancelled = 0.0;
    let mut bit = false;
    for &p in &powers[..order] {
        bit = sample >= scale * (cancelled + p / 2.0);
        if bit {
            cancelled += p;
        }
    }
    bit
}

// ---------------------------------------------------------------------------
// Dimming

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimmingScheme {
    None,
    Analog,
    Vook,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Data,
    One,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimmingConfig {
    pub scheme: DimmingScheme,
    pub factor: f64,
}

impl Default for DimmingConfig {
    fn default() -> Self {
        DimmingConfig {
            scheme: DimmingScheme::None,
            factor: 1.0,
        }
    }
}

impl DimmingConfig {
    pub fn new(scheme: DimmingScheme, factor: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&factor) {
            return Err(Error::param("dimming_factor", factor, "must lie in [0, 1]"));
        }
        Ok(DimmingConfig { scheme, factor })
    }

    pub fn analog(factor: f64) -> Result<Self> {
        Self::new(DimmingScheme::Analog, factor)
    }

    pub fn vook(factor: f64) -> Result<Self> {
        Self::new(DimmingScheme::Vook, factor)
    }

    /// Number of data slots per codeword. Zero at full and zero brightness.
    pub fn data_slots(&self) -> usize {
        let g = self.factor;
        if g <= 0.0 || g >= 1.0 {
            return 0;
        }
        let n = if g <= 0.5 { 20.0 * g } else { 20.0 - 20.0 * g };
        n.round() as usize
    }

    /// Duty cycle δ of the codeword table. The always-on codeword at full
    /// brightness is listed with δ = 1.
    pub fn duty_cycle(&self) -> f64 {
        if self.factor >= 1.0 {
            1.0
        } else {
            self.data_slots() as f64 / CODEWORD_LEN as f64
        }
    }

    /// Slot layout of one codeword: data first, then filler.
    pub fn codeword(&self) -> [Slot; CODEWORD_LEN] {
        let n = self.data_slots();
        let filler = if self.factor > 0.5 {
            Slot::One
        } else {
            Slot::Zero
        };
        std::array::from_fn(|i| if i < n { Slot::Data } else { filler })
    }

    /// Renders the codeword with `d` for data and `0`/`1` for filler.
    pub fn codeword_string(&self) -> String {
        self.codeword()
            .iter()
            .map(|s| match s {
                Slot::Data => 'd',
                Slot::One => '1',
                Slot::Zero => '0',
            })
            .collect()
    }

    fn require_data(&self) -> Result<usize> {
        match self.data_slots() {
            0 => Err(Error::param(
                "dimming_factor",
                self.factor,
                "codeword has no data slots",
            )),
            n => Ok(n),
        }
    }
}

/// Packs a bit stream into VOOK codewords. The last codeword's unused data
/// slots are zero-padded.
pub fn frame_vook(data: &[bool], config: &DimmingConfig) -> Result<Vec<bool>> {
    let n = config.require_data()?;
    let pattern = config.codeword();
    let mut out = Vec::with_capacity(data.len().div_ceil(n) * CODEWORD_LEN);
    for chunk in data.chunks(n) {
        let mut bits = chunk.iter().copied();
        out.extend(pattern.iter().map(|s| match s {
            Slot::Data => bits.next().unwrap_or(false),
            Slot::One => true,
            Slot::Zero => false,
        }));
    }
    Ok(out)
}

/// Inverse of [`frame_vook`]: pulls the data slots out of a framed stream
/// and truncates to `len` bits.
pub fn extract_vook(stream: &[bool], config: &DimmingConfig, len: usize) -> Result<Vec<bool>> {
    let n = config.require_data()?;
    if !stream.len().is_multiple_of(CODEWORD_LEN) {
        return Err(Error::InvalidConfig(format!(
            "framed stream length {} is not a multiple of {CODEWORD_LEN}",
            stream.len()
        )));
    }
    let mut out: Vec<bool> = stream
        .chunks(CODEWORD_LEN)
        .flat_map(|cw| cw[..n].iter().copied())
        .collect();
    if out.len() < len {
        return Err(Error::InvalidConfig(format!(
            "stream carries {} data bits, {len} requested",
            out.len()
        )));
    }
    out.truncate(len);
    Ok(out)
}

/// Repetition coding: each data bit fills every data slot of its own
/// codeword.
pub fn vook_encode(data: &[bool], config: &DimmingConfig) -> Result<Vec<bool>> {
    let n = config.require_data()?;
    let repeated: Vec<bool> = data
        .iter()
        .flat_map(|&b| std::iter::repeat_n(b, n))
        .collect();
    frame_vook(&repeated, config)
}

/// Majority vote over each codeword's data slots; a tie decides 1.
pub fn vook_decode(stream: &[bool], config: &DimmingConfig) -> Result<Vec<bool>> {
    let n = config.require_data()?;
    let words = stream.len() / CODEWORD_LEN;
    let slots = extract_vook(stream, config, words * n)?;
    Ok(slots.chunks(n).map(majority).collect())
}

/// `true` when at least half the votes are set.
pub fn majority(votes: &[bool]) -> bool {
    2 * votes.iter().filter(|&&b| b).count() >= votes.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ordering_examples() {
        let one = users_from_gains(&[3.0]);
        assert_eq!(one[0].order, 1);

        let table = users_from_gains(&[0.2835e-4, 0.4787e-4, 0.5272e-4]);
        assert_eq!(table.iter().map(|u| u.user).collect::<Vec<_>>(), [1, 2, 3]);

        let mixed = users_from_gains(&[0.5e-4, 0.2e-4, 0.4e-4]);
        assert_eq!(mixed.iter().map(|u| u.user).collect::<Vec<_>>(), [2, 3, 1]);
        assert_eq!(mixed.iter().map(|u| u.order).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn ordering_is_stable_for_ties() {
        let ties = users_from_gains(&[1.0, 1.0, 0.5, 1.0]);
        assert_eq!(
            ties.iter().map(|u| u.user).collect::<Vec<_>>(),
            [3, 1, 2, 4]
        );
    }

    #[test]
    fn fpa_examples() {
        assert_relative_eq!(
            fpa_allocate(1.0, 0.42, 1).unwrap().powers()[0],
            1.0,
            max_relative = 1e-15
        );

        let a = fpa_allocate(0.25, 0.3, 3).unwrap();
        // 0.25 * 0.7 / 0.973 and successive factors of 0.3
        let expected = [
            0.179_856_115_107_913_67,
            0.053_956_834_532_374_1,
            0.016_187_050_359_712_23,
        ];
        for (p, e) in a.powers().iter().zip(expected) {
            assert_relative_eq!(*p, e, max_relative = 1e-14);
        }
        assert_relative_eq!(a.powers().iter().sum::<f64>(), 0.25, max_relative = 1e-15);

        let near_one = fpa_allocate(1.0, 1.0 - 1e-12, 4).unwrap();
        for p in near_one.powers() {
            assert_relative_eq!(*p, 0.25, max_relative = 1e-9);
        }

        assert!(fpa_allocate(1.0, 0.0, 3).is_err());
        assert!(fpa_allocate(1.0, 1.0, 3).is_err());
        assert!(fpa_allocate(0.0, 0.5, 3).is_err());
    }

    #[test]
    fn superposition_examples() {
        let a = fpa_allocate(0.25, 0.3, 3).unwrap();
        assert_eq!(superimpose(&[false; 3], &a), 0.0);
        assert_relative_eq!(superimpose(&[true; 3], &a), 0.25, max_relative = 1e-15);
        assert_relative_eq!(
            superimpose(&[true, false, true], &a),
            0.196_043_165_467_625_9,
            max_relative = 1e-14
        );
    }

    #[test]
    fn sic_examples() {
        let one = fpa_allocate(1.0, 0.5, 1).unwrap();
        let h = 3e-5;
        assert!(sic_decode(h * 1.0, 1, h, &one, 1.0).bit);

        let a = fpa_allocate(0.25, 0.3, 3).unwrap();
        let y = h * superimpose(&[true, false, true], &a);
        let out = sic_decode(y, 3, h, &a, 1.0);
        assert_eq!(out.trace, [true, false, true]);
        assert!(out.bit);

        let two = fpa_allocate(1.0, 0.25, 2).unwrap();
        let threshold = h * two.power(1) / 2.0;
        assert!(sic_decode(threshold, 2, h, &two, 1.0).trace[0]);
        assert!(sic_decide(threshold, 1, h, two.powers(), 1.0));
    }

    #[test]
    fn noiseless_sic_is_exhaustively_exact() {
        for n in 1..=6 {
            let a = fpa_allocate(1.0, 0.3, n).unwrap();
            let h = 0.5e-4;
            for word in 0u32..(1 << n) {
                let bits: Vec<bool> = (0..n).map(|i| word >> i & 1 == 1).collect();
                let y = h * superimpose(&bits, &a);
                for k in 1..=n {
                    let out = sic_decode(y, k, h, &a, 1.0);
                    assert_eq!(out.trace, bits[..k]);
                    assert_eq!(sic_decide(y, k, h, a.powers(), 1.0), bits[k - 1]);
                }
            }
        }
    }

    #[test]
    fn table_one_codewords() {
        let rows = [
            (1.0, 1.0, "1111111111"),
            (0.9, 0.2, "dd11111111"),
            (0.8, 0.4, "dddd111111"),
            (0.7, 0.6, "dddddd1111"),
            (0.6, 0.8, "dddddddd11"),
            (0.5, 1.0, "dddddddddd"),
            (0.4, 0.8, "dddddddd00"),
            (0.3, 0.6, "dddddd0000"),
            (0.2, 0.4, "dddd000000"),
            (0.1, 0.2, "dd00000000"),
            (0.0, 0.0, "0000000000"),
        ];
        for (g, duty, word) in rows {
            let c = DimmingConfig::vook(g).unwrap();
            assert_eq!(c.codeword_string(), word, "factor {g}");
            assert_relative_eq!(c.duty_cycle(), duty, epsilon = 1e-12);
        }
    }

    #[test]
    fn framing_rejects_dark_and_full_brightness() {
        for g in [0.0, 1.0] {
            let c = DimmingConfig::vook(g).unwrap();
            assert!(frame_vook(&[true], &c).is_err());
        }
        assert!(DimmingConfig::vook(1.5).is_err());
    }

    #[test]
    fn framing_fills_with_constant() {
        let c = DimmingConfig::vook(0.3).unwrap();
        let framed = frame_vook(&[true; 6], &c).unwrap();
        assert_eq!(
            framed,
            [true, true, true, true, true, true, false, false, false, false]
        );
        let c = DimmingConfig::vook(0.8).unwrap();
        let framed = frame_vook(&[false; 4], &c).unwrap();
        assert_eq!(&framed[4..], &[true; 6]);
    }

    #[test]
    fn repetition_decoding_corrects_minority_flips() {
        let c = DimmingConfig::vook(0.3).unwrap();
        let data = [true, false, true];
        let mut stream = vook_encode(&data, &c).unwrap();
        stream[0] = false;
        stream[1] = false;
        stream[10] = true;
        assert_eq!(vook_decode(&stream, &c).unwrap(), data);
        assert!(majority(&[true, false]));
        assert!(!majority(&[true, false, false]));
    }

    proptest! {
        #[test]
        fn superposition_is_linear(mask in 0u32..64, split in 0u32..64, rho in 0.05f64..0.95) {
            let a = fpa_allocate(0.25, rho, 6).unwrap();
            let s: Vec<bool> = (0..6).map(|i| mask >> i & 1 == 1).collect();
            let left: Vec<bool> = (0..6).map(|i| s[i] && split >> i & 1 == 1).collect();
            let right: Vec<bool> = (0..6).map(|i| s[i] && split >> i & 1 == 0).collect();
            let total = superimpose(&s, &a);
            prop_assert!((total - superimpose(&left, &a) - superimpose(&right, &a)).abs() <= 1e-16);
            prop_assert!((0.0..=0.25 * (1.0 + 1e-15)).contains(&total));
        }

        #[test]
        fn fpa_scale_equivariant(total in 1e-3f64..10.0, c in 1e-3f64..1e3, rho in 0.01f64..0.99, n in 1usize..10) {
            let a = fpa_allocate(total, rho, n).unwrap();
            let b = fpa_allocate(c * total, rho, n).unwrap();
            for (x, y) in a.powers().iter().zip(b.powers()) {
                prop_assert!((c * x - y).abs() <= 1e-13 * y);
            }
            let sum: f64 = a.powers().iter().sum();
            prop_assert!((sum - total).abs() <= 1e-14 * total);
            for w in a.powers().windows(2) {
                prop_assert!(w[1] < w[0]);
                prop_assert!((w[1] - rho * w[0]).abs() <= 1e-15 * w[0]);
            }
        }

        #[test]
        fn vook_roundtrip(bits in proptest::collection::vec(any::<bool>(), 0..200), step in 1usize..10) {
            let factor = step as f64 / 10.0;
            let c = DimmingConfig::vook(factor).unwrap();
            let framed = frame_vook(&bits, &c).unwrap();
            prop_assert_eq!(framed.len() % CODEWORD_LEN, 0);
            prop_assert_eq!(extract_vook(&framed, &c, bits.len()).unwrap(), bits.clone());
            let coded = vook_encode(&bits, &c).unwrap();
            prop_assert_eq!(vook_decode(&coded, &c).unwrap(), bits);
        }
    }
}
