use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::csv_io::{read_curve_file, CurveRow};
use crate::{Error, Result};

/// Acceptance rule applied to every point `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// `|a - b| <= k * sqrt(se_a² + se_b²)`.
    WithinStderr { k: f64 },
    /// `max(a/b, b/a) <= factor`; two zeros agree.
    Ratio { factor: f64 },
    /// `|a - b| <= tol`.
    Absolute { tol: f64 },
    /// `a >= b - k * se_b`.
    AtLeast { k: f64 },
}

impl FromStr for Rule {
    type Err = Error;

    /// `within-stderr:3`, `ratio:2`, `abs:1e-6`, `ge` or `ge:3`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse comparison rule `{s}`"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a.parse::<f64>().map_err(|_| bad())?)),
            None => (s, None),
        };
        let rule = match (name, arg) {
            ("within-stderr", Some(k)) => Rule::WithinStderr { k },
            ("within-stderr", None) => Rule::WithinStderr { k: 3.0 },
            ("ratio", Some(factor)) if factor >= 1.0 => Rule::Ratio { factor },
            ("abs", Some(tol)) => Rule::Absolute { tol },
            ("ge", k) => Rule::AtLeast {
                k: k.unwrap_or(0.0),
            },
            _ => return Err(bad()),
        };
        match rule {
            Rule::WithinStderr { k } | Rule::AtLeast { k } if !(k >= 0.0) => Err(bad()),
            Rule::Absolute { tol } if !(tol >= 0.0) => Err(bad()),
            r => Ok(r),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::WithinStderr { k } => write!(f, "within-stderr:{k}"),
            Rule::Ratio { factor } => write!(f, "ratio:{factor}"),
            Rule::Absolute { tol } => write!(f, "abs:{tol}"),
            Rule::AtLeast { k } => write!(f, "ge:{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rule: Rule,
    /// Points where the reference (`b`) BER is at or below this are skipped.
    pub min_ber: f64,
}

impl Tolerance {
    pub fn new(rule: Rule) -> Self {
        Tolerance { rule, min_ber: 0.0 }
    }

    pub fn with_min_ber(mut self, min_ber: f64) -> Self {
        self.min_ber = min_ber;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub snr_db: f64,
    pub user: usize,
    pub a: f64,
    pub b: f64,
    pub abs_diff: f64,
    pub ratio: f64,
    /// Deviation in units of the combined standard error.
    pub z: f64,
    pub checked: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub tolerance: Tolerance,
    pub points: Vec<PointReport>,
    pub checked: usize,
    pub failed: usize,
    pub max_abs_diff: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

impl CompareReport {
    pub fn failures(&self) -> impl Iterator<Item = &PointReport> {
        self.points.iter().filter(|p| !p.pass)
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    match (a == 0.0, b == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => (a / b).max(b / a),
    }
}

/// Compares two curves point by point. Both must cover the same
/// `(snr_db, user)` keys.
pub fn compare_rows(a: &[CurveRow], b: &[CurveRow], tol: Tolerance) -> Result<CompareReport> {
    let key = |r: &CurveRow| (r.snr_db.to_bits(), r.user);
    let index = |rows: &[CurveRow], name: &str| -> Result<BTreeMap<(u64, usize), CurveRow>> {
        let mut map = BTreeMap::new();
        for r in rows {
            if map.insert(key(r), *r).is_some() {
                return Err(Error::GridMismatch(format!(
                    "{name} repeats point snr_db={} user={}",
                    r.snr_db, r.user
                )));
            }
        }
        Ok(map)
    };
    let (ma, mb) = (index(a, "curve a")?, index(b, "curve b")?);
    if let Some(k) = ma.keys().find(|k| !mb.contains_key(k)) {
        return Err(Error::GridMismatch(format!(
            "curve b lacks snr_db={} user={}",
            f64::from_bits(k.0),
            k.1
        )));
    }
    if let Some(k) = mb.keys().find(|k| !ma.contains_key(k)) {
        return Err(Error::GridMismatch(format!(
            "curve a lacks snr_db={} user={}",
            f64::from_bits(k.0),
            k.1
        )));
    }

    let mut points = Vec::with_capacity(ma.len());
    for (k, ra) in &ma {
        let rb = &mb[k];
        let diff = (ra.ber - rb.ber).abs();
        let se = ra.stderr.hypot(rb.stderr);
        let z = if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let checked = rb.ber > tol.min_ber;
        let ok = match tol.rule {
            Rule::WithinStderr { k } => diff <= k * se,
            Rule::Ratio { factor } => ratio(ra.ber, rb.ber) <= factor,
            Rule::Absolute { tol } => diff <= tol,
            Rule::AtLeast { k } => ra.ber >= rb.ber - k * rb.stderr,
        };
        points.push(PointReport {
            snr_db: ra.snr_db,
            user: ra.user,
            a: ra.ber,
            b: rb.ber,
            abs_diff: diff,
            ratio: ratio(ra.ber, rb.ber),
            z,
            checked,
            pass: !checked || ok,
        });
    }
    points.sort_by(|x, y| x.snr_db.total_cmp(&y.snr_db).then(x.user.cmp(&y.user)));
    let checked: Vec<&PointReport> = points.iter().filter(|p| p.checked).collect();
    let failed = checked.iter().filter(|p| !p.pass).count();
    let max_abs_diff = checked.iter().map(|p| p.abs_diff).fold(0.0, f64::max);
    let max_ratio = checked.iter().map(|p| p.ratio).fold(1.0, f64::max);
    Ok(CompareReport {
        tolerance: tol,
        checked: checked.len(),
        failed,
        max_abs_diff,
        max_ratio,
        pass: failed == 0,
        points,
    })
}

pub fn compare(a: &Path, b: &Path, tol: Tolerance) -> Result<CompareReport> {
    compare_rows(&read_curve_file(a)?, &read_curve_file(b)?, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::Provenance;

    fn row(snr: f64, user: usize, ber: f64, se: f64) -> CurveRow {
        CurveRow {
            snr_db: snr,
            user,
            ber,
            stderr: se,
            provenance: Provenance::MonteCarlo,
        }
    }

    #[test]
    fn identical_curves_pass_with_zero_deviation() {
        let a = [row(1.0, 1, 0.1, 0.01), row(1.0, 2, 0.2, 0.0)];
        for rule in [
            Rule::WithinStderr { k: 0.0 },
            Rule::Ratio { factor: 1.0 },
            Rule::Absolute { tol: 0.0 },
            Rule::AtLeast { k: 0.0 },
        ] {
            let r = compare_rows(&a, &a, Tolerance::new(rule)).unwrap();
            assert!(r.pass);
            assert_eq!(r.max_abs_diff, 0.0);
            assert_eq!(r.max_ratio, 1.0);
        }
    }

    #[test]
    fn rules_detect_deviation() {
        let a = [row(1.0, 1, 0.10, 0.003)];
        let b = [row(1.0, 1, 0.11, 0.004)];
        let check = |rule| compare_rows(&a, &b, Tolerance::new(rule)).unwrap().pass;
        assert!(check(Rule::WithinStderr { k: 2.0 }));
        assert!(!check(Rule::WithinStderr { k: 1.9 }));
        assert!(check(Rule::Ratio { factor: 1.11 }));
        assert!(!check(Rule::Ratio { factor: 1.09 }));
        assert!(!check(Rule::AtLeast { k: 0.0 }));
        assert!(check(Rule::AtLeast { k: 2.5 }));
    }

    #[test]
    fn min_ber_filter_skips_points() {
        let a = [row(1.0, 1, 1e-7, 0.0), row(2.0, 1, 0.5, 0.0)];
        let b = [row(1.0, 1, 1e-6, 0.0), row(2.0, 1, 0.5, 0.0)];
        let tol = Tolerance::new(Rule::Ratio { factor: 2.0 });
        assert!(!compare_rows(&a, &b, tol).unwrap().pass);
        let r = compare_rows(&a, &b, tol.with_min_ber(1e-5)).unwrap();
        assert!(r.pass);
        assert_eq!(r.checked, 1);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = [row(1.0, 1, 0.1, 0.0)];
        let b = [row(1.5, 1, 0.1, 0.0)];
        let t = Tolerance::new(Rule::Absolute { tol: 1.0 });
        assert!(matches!(
            compare_rows(&a, &b, t),
            Err(Error::GridMismatch(_))
        ));
        let b = [row(1.0, 1, 0.1, 0.0), row(1.0, 2, 0.1, 0.0)];
        assert!(matches!(
            compare_rows(&a, &b, t),
            Err(Error::GridMismatch(_))
        ));
        let dup = [row(1.0, 1, 0.1, 0.0), row(1.0, 1, 0.1, 0.0)];
        assert!(matches!(
            compare_rows(&dup, &dup, t),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn rule_parsing() {
        assert_eq!(
            "within-stderr:3".parse::<Rule>().unwrap(),
            Rule::WithinStderr { k: 3.0 }
        );
        assert_eq!("ge".parse::<Rule>().unwrap(), Rule::AtLeast { k: 0.0 });
        assert_eq!(
            "ratio:2".parse::<Rule>().unwrap(),
            Rule::Ratio { factor: 2.0 }
        );
        assert_eq!(
            "abs:1e-3".parse::<Rule>().unwrap(),
            Rule::Absolute { tol: 1e-3 }
        );
        for bad in ["ratio:0.5", "abs", "within-stderr:-1", "close"] {
            assert!(bad.parse::<Rule>().is_err(), "{bad}");
        }
        for r in [
            Rule::WithinStderr { k: 3.0 },
            Rule::Ratio { factor: 2.0 },
            Rule::AtLeast { k: 1.0 },
        ] {
            assert_eq!(r.to_string().parse::<Rule>().unwrap(), r);
        }
    }
}
