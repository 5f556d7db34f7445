use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Bound,
    MonteCarlo,
    Oracle,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::Bound => "bound",
            Provenance::MonteCarlo => "monte_carlo",
            Provenance::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Provenance::Analytic),
            "bound" => Ok(Provenance::Bound),
            "monte_carlo" => Ok(Provenance::MonteCarlo),
            "oracle" => Ok(Provenance::Oracle),
            other => Err(Error::InvalidConfig(format!(
                "unknown provenance `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-user BER against transmit SNR. `ber[i][u]` is user `u + 1` at
/// `snr_db[i]`; users are numbered by decoding order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub snr_db: Vec<f64>,
    pub ber: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub provenance: Provenance,
    /// Bits per user and point; zero for closed-form curves.
    pub trials: u64,
    pub seed: Option<u64>,
}

impl BerCurve {
    /// Closed-form curve with zero standard error.
    pub fn exact(snr_db: Vec<f64>, ber: Vec<Vec<f64>>, provenance: Provenance) -> Self {
        let stderr = ber.iter().map(|row| vec![0.0; row.len()]).collect();
        BerCurve {
            snr_db,
            ber,
            stderr,
            provenance,
            trials: 0,
            seed: None,
        }
    }

    /// Monte Carlo curve from error counts.
    pub fn from_counts(snr_db: Vec<f64>, errors: &[Vec<u64>], trials: u64, seed: u64) -> Self {
        let n = trials as f64;
        let ber: Vec<Vec<f64>> = errors
            .iter()
            .map(|row| row.iter().map(|&e| e as f64 / n).collect())
            .collect();
        let stderr = ber
            .iter()
            .map(|row| row.iter().map(|&p| (p * (1.0 - p) / n).sqrt()).collect())
            .collect();
        BerCurve {
            snr_db,
            ber,
            stderr,
            provenance: Provenance::MonteCarlo,
            trials,
            seed: Some(seed),
        }
    }

    pub fn users(&self) -> usize {
        self.ber.first().map_or(0, Vec::len)
    }

    /// BER of 1-based user `user` across the grid.
    pub fn user(&self, user: usize) -> impl Iterator<Item = f64> + '_ {
        self.ber.iter().map(move |row| row[user - 1])
    }

    /// Index of the grid point closest to `snr_db`.
    pub fn point(&self, snr_db: f64) -> Option<usize> {
        self.snr_db.iter().position(|&s| (s - snr_db).abs() < 1e-9)
    }
}
