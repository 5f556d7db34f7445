//! Link-level simulation and closed-form bit-error-rate analysis for
//! power-domain NOMA in indoor visible light communication downlinks.
//!
//! A single ceiling LED serves `N` users with superimposed unipolar OOK
//! signals. Users are ranked by channel gain, the LED splits its optical
//! power with a fixed geometric ladder, and each receiver runs successive
//! interference cancellation (SIC) down to its own signal.
//!
//! The crate is organised by concern:
//!
//! - [`channel`]: Lambertian line-of-sight gains and receiver noise.
//! - [`link`]: user ordering, power allocation, superposition, VOOK framing
//!   and the SIC detector.
//! - [`analytic`]: closed-form BER under perfect, noisy and outdated channel
//!   knowledge, plus the dimming transforms.
//! - [`oracle`]: exact BER by integrating Gaussian measure over the SIC
//!   decision regions (small `N`).
//! - [`mc`]: seeded, parallel Monte Carlo link simulation.
//! - [`experiment`]: scenario definitions, CSV/metadata output and curve
//!   comparison used by the `vlc-noma` binary.
//!
//! Runnable walkthroughs live in `crates/core/examples/`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod channel;
mod error;
pub mod experiment;
pub mod link;
pub mod mc;
pub mod oracle;
mod quadrature;

pub use error::{Error, Result};

pub(crate) mod numeric {
    /// Neumaier-compensated running sum.
    #[derive(Debug, Default, Clone, Copy)]
    pub struct CompensatedSum {
        sum: f64,
        compensation: f64,
    }

    impl CompensatedSum {
        pub fn add(&mut self, value: f64) {
            let t = self.sum + value;
            if self.sum.abs() >= value.abs() {
                self.compensation += (self.sum - t) + value;
            } else {
                self.compensation += (value - t) + self.sum;
            }
            self.sum = t;
        }

        pub fn total(&self) -> f64 {
            self.sum + self.compensation
        }
    }

    pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
        let mut acc = CompensatedSum::default();
        values.into_iter().for_each(|v| acc.add(v));
        acc.total()
    }
}
