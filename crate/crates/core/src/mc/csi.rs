use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::link::ESTIMATE_FLOOR;
use crate::{Error, Result};

/// Default κ: puts the SNR-dependent variance at 2e-6 at 110 dB.
pub const DEFAULT_KAPPA: f64 = 2.0e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CsiErrorModel {
    Perfect,
    /// Gaussian estimation error with a fixed variance (gain²).
    NoisyFixed {
        variance: f64,
    },
    /// Variance `kappa / snr` with `snr` the linear transmit SNR.
    NoisySnrDependent {
        kappa: f64,
    },
    /// Estimate taken before the user moved for `interval` seconds at up to
    /// `max_speed` m/s.
    Outdated {
        max_speed: f64,
        interval: f64,
    },
}

impl CsiErrorModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CsiErrorModel::Perfect => Ok(()),
            CsiErrorModel::NoisyFixed { variance }
                if !(variance >= 0.0 && variance.is_finite()) =>
            {
                Err(Error::param(
                    "variance",
                    variance,
                    "must be finite and nonnegative",
                ))
            }
            CsiErrorModel::NoisySnrDependent { kappa } if !(kappa >= 0.0 && kappa.is_finite()) => {
                Err(Error::param(
                    "kappa",
                    kappa,
                    "must be finite and nonnegative",
                ))
            }
            CsiErrorModel::Outdated { max_speed, .. } if !(max_speed >= 0.0) => {
                Err(Error::param("max_speed", max_speed, "must be nonnegative"))
            }
            CsiErrorModel::Outdated { interval, .. } if !(interval >= 0.0) => {
                Err(Error::param("interval", interval, "must be nonnegative"))
            }
            _ => Ok(()),
        }
    }

    /// Estimation-error variance at transmit SNR `snr_db`; zero for models
    /// without Gaussian error.
    pub fn variance_at(&self, snr_db: f64) -> f64 {
        match *self {
            CsiErrorModel::NoisyFixed { variance } => variance,
            CsiErrorModel::NoisySnrDependent { kappa } => kappa / 10f64.powf(snr_db / 10.0),
            _ => 0.0,
        }
    }

    pub fn is_outdated(&self) -> bool {
        matches!(self, CsiErrorModel::Outdated { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            CsiErrorModel::Perfect => "perfect",
            CsiErrorModel::NoisyFixed { .. } => "noisy_fixed",
            CsiErrorModel::NoisySnrDependent { .. } => "noisy_snr",
            CsiErrorModel::Outdated { .. } => "outdated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsiDraw {
    pub estimates: Vec<f64>,
    /// Estimates raised to the positive floor.
    pub clamped: u64,
}

/// `h + ε`, floored at [`ESTIMATE_FLOOR`].
#[inline]
pub(crate) fn noisy_estimate<R: Rng + ?Sized>(gain: f64, std: f64, rng: &mut R) -> (f64, bool) {
    let eps: f64 = rng.sample(StandardNormal);
    let est = gain + std * eps;
    if est < ESTIMATE_FLOOR {
        (ESTIMATE_FLOOR, true)
    } else {
        (est, false)
    }
}

/// Draws receiver estimates for the static CSI models. Outdated estimates
/// come from a mobility epoch instead (see [`super::outdated_gains`]).
pub fn inject_csi<R: Rng + ?Sized>(
    gains: &[f64],
    model: &CsiErrorModel,
    snr_db: f64,
    rng: &mut R,
) -> Result<CsiDraw> {
    model.validate()?;
    if let Some(&g) = gains.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::param("gain", g, "must be positive"));
    }
    match model {
        CsiErrorModel::Perfect => Ok(CsiDraw {
            estimates: gains.to_vec(),
            clamped: 0,
        }),
        CsiErrorModel::NoisyFixed { .. } | CsiErrorModel::NoisySnrDependent { .. } => {
            let std = model.variance_at(snr_db).sqrt();
            let mut clamped = 0;
            let estimates = gains
                .iter()
                .map(|&g| {
                    let (e, c) = noisy_estimate(g, std, rng);
                    clamped += u64::from(c);
                    e
                })
                .collect();
            Ok(CsiDraw { estimates, clamped })
        }
        CsiErrorModel::Outdated { .. } => Err(Error::InvalidConfig(
            "outdated estimates are produced by a mobility epoch".into(),
        )),
    }
}
