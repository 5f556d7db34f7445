//! Stage kernel under Gaussian channel-estimation error.
//!
//! The closed form averages `exp(a x² + b x + c)` with
//! `x = γ (h + ε) 𝒫 / σ_n` over `ε ~ N(0, σ_ε²)`; it needs `𝒫 > 0` to stay
//! inside the fit's domain. Terms with a nonpositive margin (and every term
//! in [`NoisyMethod::Quadrature`]) integrate the receiver model directly:
//! the estimate `ĥ = max(h + ε, floor)` moves the decision threshold by
//! `γ (ĥ - h) P_k / 2`.

use serde::{Deserialize, Serialize};

use super::{chain_ber, q_function, LinkParams, QExpFit, StageError};
use crate::link::ESTIMATE_FLOOR;
use crate::quadrature::{integrate, Tolerance};
use crate::{Error, Result};

/// Integration half-width in units of σ_ε.
const SPAN: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisyMethod {
    /// Closed form where valid, quadrature for nonpositive margins.
    ClosedForm,
    /// Quadrature for every term.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NoisyDiagnostics {
    pub closed_form_terms: u64,
    pub fallback_terms: u64,
    /// Stage probabilities pulled back into `[0, 1]`.
    pub clamp_events: u64,
}

impl NoisyDiagnostics {
    pub fn merge(&mut self, other: &NoisyDiagnostics) {
        self.closed_form_terms += other.closed_form_terms;
        self.fallback_terms += other.fallback_terms;
        self.clamp_events += other.clamp_events;
    }
}

/// Which route evaluated a single Q term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoisyTerm {
    ClosedForm,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyCsi {
    pub error_std: f64,
    pub fit: QExpFit,
    pub method: NoisyMethod,
}

impl NoisyCsi {
    pub fn new(error_variance: f64, fit: QExpFit, method: NoisyMethod) -> Result<Self> {
        if !(error_variance > 0.0 && error_variance.is_finite()) {
            return Err(Error::param(
                "error_variance",
                error_variance,
                "must be positive",
            ));
        }
        if !(fit.a < 0.0) {
            return Err(Error::param("fit.a", fit.a, "must be negative"));
        }
        Ok(NoisyCsi {
            error_std: error_variance.sqrt(),
            fit,
            method,
        })
    }

    /// Averaged exp-quadratic term for margin `margin > 0`.
    fn closed_form(&self, gain: f64, margin: f64, sigma: f64) -> f64 {
        let QExpFit { a, b, c, .. } = self.fit;
        let mean = gain * margin / sigma;
        let var = (self.error_std * margin / sigma).powi(2);
        let denom = 1.0 - 2.0 * a * var;
        ((a * mean * mean + b * mean + 0.5 * b * b * var) / denom + c).exp() / denom.sqrt()
    }

    /// `E_ε[Q((γ/σ_n)(h·margin + sign·(ĥ - h)·P_k/2))]`.
    fn quadrature(&self, gain: f64, margin: f64, half_power: f64, sign: f64, sigma: f64) -> f64 {
        let sd = self.error_std;
        let integrand = |u: f64| {
            let est = (gain + sd * u).max(ESTIMATE_FLOOR);
            let phi = (-0.5 * u * u).exp() * std::f64::consts::FRAC_1_SQRT_2
                / std::f64::consts::PI.sqrt();
            q_function((gain * margin + sign * (est - gain) * half_power) / sigma) * phi
        };
        let kink = (ESTIMATE_FLOOR - gain) / sd;
        let centre = -sign * gain * margin / half_power / sd;
        let tol = Tolerance {
            abs: 1e-17,
            rel: 1e-10,
            max_depth: 50,
        };
        integrate(integrand, -SPAN, SPAN, &[kink, centre], tol)
    }

    /// One Q term. `sign` is +1 for the `𝒫` term and -1 for the `𝒫̃` term.
    pub fn term(
        &self,
        link: &LinkParams,
        order: usize,
        gain: f64,
        margin: f64,
        sign: f64,
    ) -> (f64, NoisyTerm) {
        let sigma = link.noise_std / link.responsivity;
        match self.method {
            NoisyMethod::ClosedForm if margin > 0.0 => {
                (self.closed_form(gain, margin, sigma), NoisyTerm::ClosedForm)
            }
            _ => {
                let half = link.alloc.power(order) / 2.0;
                (
                    self.quadrature(gain, margin, half, sign, sigma),
                    NoisyTerm::Fallback,
                )
            }
        }
    }

    pub fn conditional(
        &self,
        link: &LinkParams,
        order: usize,
        gain: f64,
        prefix: &[StageError],
        diag: &mut NoisyDiagnostics,
    ) -> f64 {
        link.check_stage(order, prefix);
        let rows = 1usize << (link.users() - order);
        let mut sum = 0.0;
        for (p, pt) in link.margins(order, prefix) {
            for (margin, sign) in [(p, 1.0), (pt, -1.0)] {
                let (v, route) = self.term(link, order, gain, margin, sign);
                match route {
                    NoisyTerm::ClosedForm => diag.closed_form_terms += 1,
                    NoisyTerm::Fallback => diag.fallback_terms += 1,
                }
                sum += v;
            }
        }
        let value = sum / (2 * rows) as f64;
        if !(0.0..=1.0).contains(&value) {
            diag.clamp_events += 1;
        }
        value.clamp(0.0, 1.0)
    }

    pub fn ber(
        &self,
        link: &LinkParams,
        order: usize,
        gain: f64,
        diag: &mut NoisyDiagnostics,
    ) -> f64 {
        chain_ber(
            order,
            |j, e| self.conditional(link, j, gain, e, diag),
            |p| p,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ber_perfect, conditional_ber_perfect};
    use super::*;
    use crate::link::fpa_allocate;
    use approx::assert_relative_eq;

    const GAINS: [f64; 3] = [0.2835e-4, 0.4787e-4, 0.5272e-4];

    fn link(snr_db: f64) -> LinkParams {
        LinkParams::new(
            fpa_allocate(0.25, 0.3, 3).unwrap(),
            1.0,
            0.25 / 10f64.powf(snr_db / 20.0),
        )
        .unwrap()
    }

    /// Q-approximated perfect kernel: the σ_ε → 0 limit of the closed form.
    fn approx_perfect(l: &LinkParams, k: usize, h: f64, e: &[StageError], fit: &QExpFit) -> f64 {
        let s = h / l.noise_std;
        let rows = (1 << (3 - k)) as f64;
        l.margins(k, e)
            .map(|(p, pt)| fit.eval(s * p) + fit.eval(s * pt))
            .sum::<f64>()
            / (2.0 * rows)
    }

    #[test]
    fn vanishing_error_recovers_approximated_kernel() {
        let fit = *QExpFit::standard();
        let l = link(115.0);
        let e = [StageError::Correct];
        let target = approx_perfect(&l, 2, GAINS[1], &e, &fit);
        let mut last = f64::INFINITY;
        for var in [1e-16, 1e-18, 1e-20, 1e-24] {
            let n = NoisyCsi::new(var, fit, NoisyMethod::ClosedForm).unwrap();
            let mut d = NoisyDiagnostics::default();
            let v = n.conditional(&l, 2, GAINS[1], &e, &mut d);
            let gap = (v - target).abs();
            assert!(gap <= last);
            last = gap;
        }
        assert!(last <= 1e-9 * target);
    }

    #[test]
    fn huge_gain_drives_closed_form_to_zero() {
        let fit = *QExpFit::standard();
        let n = NoisyCsi::new(1e-12, fit, NoisyMethod::ClosedForm).unwrap();
        let l = link(115.0);
        let mut d = NoisyDiagnostics::default();
        assert!(n.conditional(&l, 1, 1.0, &[], &mut d) < 1e-300);
    }

    #[test]
    fn closed_form_matches_direct_average_of_fit() {
        // Average exp(a x² + b x + c) over ε with Simpson's rule.
        let fit = *QExpFit::standard();
        let (h, m, sigma, sd) = (3e-5, 0.08, 1e-6, 4e-6);
        let n = NoisyCsi::new(sd * sd, fit, NoisyMethod::ClosedForm).unwrap();
        let steps = 40_000;
        let (lo, hi) = (-10.0 * sd, 10.0 * sd);
        let dx = (hi - lo) / steps as f64;
        let mut acc = 0.0;
        for i in 0..=steps {
            let eps = lo + i as f64 * dx;
            let w = if i == 0 || i == steps {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let pdf =
                (-eps * eps / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
            acc += w * fit.eval((h + eps) * m / sigma) * pdf;
        }
        let direct = acc * dx / 3.0;
        assert_relative_eq!(n.closed_form(h, m, sigma), direct, max_relative = 1e-8);
    }

    #[test]
    fn quadrature_matches_probit_identity_without_clamp() {
        // E[Q(A + B u)] = Q(A / sqrt(1 + B²)) for u ~ N(0, 1).
        let fit = *QExpFit::standard();
        let (h, sigma, half) = (3e-5, 1e-6, 0.09);
        for (margin, sign) in [(0.05, 1.0), (-0.02, 1.0), (0.12, -1.0), (-0.01, -1.0)] {
            let sd = 2e-6; // floor is 15 σ_ε below h: never reached
            let n = NoisyCsi::new(sd * sd, fit, NoisyMethod::Quadrature).unwrap();
            let a = h * margin / sigma;
            let b = sign * sd * half / sigma;
            let expected = q_function(a / (1.0 + b * b).sqrt());
            let got = n.quadrature(h, margin, half, sign, sigma);
            assert_relative_eq!(got, expected, max_relative = 1e-8);
        }
    }

    #[test]
    fn fallback_used_only_for_nonpositive_margins() {
        let fit = *QExpFit::standard();
        let l = link(115.0);
        let n = NoisyCsi::new(1e-12, fit, NoisyMethod::ClosedForm).unwrap();
        let mut d = NoisyDiagnostics::default();
        n.conditional(&l, 1, GAINS[0], &[], &mut d);
        assert_eq!((d.closed_form_terms, d.fallback_terms), (8, 0));

        // A spurious stage-1 decision leaves P₂/2 - P₁ - I < 0 on both rows.
        let mut d = NoisyDiagnostics::default();
        n.conditional(&l, 2, GAINS[1], &[StageError::Spurious], &mut d);
        assert_eq!(d.fallback_terms, 2);

        let q = NoisyCsi::new(1e-12, fit, NoisyMethod::Quadrature).unwrap();
        let mut d = NoisyDiagnostics::default();
        q.conditional(&l, 2, GAINS[1], &[StageError::Correct], &mut d);
        assert_eq!((d.closed_form_terms, d.fallback_terms), (0, 4));
    }

    #[test]
    fn quadrature_tends_to_perfect_for_small_error() {
        let fit = *QExpFit::standard();
        let l = link(112.5);
        let n = NoisyCsi::new(1e-20, fit, NoisyMethod::Quadrature).unwrap();
        for k in 1..=3 {
            let mut d = NoisyDiagnostics::default();
            let e = vec![StageError::Correct; k - 1];
            assert_relative_eq!(
                n.conditional(&l, k, GAINS[k - 1], &e, &mut d),
                conditional_ber_perfect(&l, k, GAINS[k - 1], &e),
                max_relative = 1e-6
            );
            assert_relative_eq!(
                n.ber(&l, k, GAINS[k - 1], &mut d),
                ber_perfect(&l, k, GAINS[k - 1]),
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let fit = *QExpFit::standard();
        assert!(NoisyCsi::new(0.0, fit, NoisyMethod::ClosedForm).is_err());
        let bad = QExpFit { a: 0.1, ..fit };
        assert!(NoisyCsi::new(1e-6, bad, NoisyMethod::ClosedForm).is_err());
    }
}
