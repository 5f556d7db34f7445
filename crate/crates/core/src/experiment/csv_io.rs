//! Curve files: `snr_db,user,ber,stderr,provenance`, one row per grid
//! point and user, sorted by `(snr_db, user)`. Floats are written with 17
//! significant digits so they read back bit-for-bit.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mc::{BerCurve, Provenance};
use crate::{Error, Result};

pub const HEADER: [&str; 5] = ["snr_db", "user", "ber", "stderr", "provenance"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub snr_db: f64,
    /// Decoding order, 1-based. Zero holds the average over users.
    pub user: usize,
    pub ber: f64,
    pub stderr: f64,
    pub provenance: Provenance,
}

/// Shortest exact rendering would also round-trip, but a fixed width
/// keeps files diffable across platforms.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Flattens a curve into sorted rows, optionally with the user average.
pub fn curve_rows(curve: &BerCurve, with_average: bool) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for (i, &snr) in curve.snr_db.iter().enumerate() {
        let ber = &curve.ber[i];
        let se = &curve.stderr[i];
        if with_average && !ber.is_empty() {
            let n = ber.len() as f64;
            rows.push(CurveRow {
                snr_db: snr,
                user: 0,
                ber: crate::numeric::sum(ber.iter().copied()) / n,
                stderr: crate::numeric::sum(se.iter().map(|s| s * s)).sqrt() / n,
                provenance: curve.provenance,
            });
        }
        rows.extend(
            ber.iter()
                .zip(se)
                .enumerate()
                .map(|(u, (&b, &s))| CurveRow {
                    snr_db: snr,
                    user: u + 1,
                    ber: b,
                    stderr: s,
                    provenance: curve.provenance,
                }),
        );
    }
    sort_rows(&mut rows);
    rows
}

pub fn sort_rows(rows: &mut [CurveRow]) {
    rows.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db).then(a.user.cmp(&b.user)));
}

pub fn write_rows<W: Write>(out: W, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            format_f64(r.snr_db),
            r.user.to_string(),
            format_f64(r.ber),
            format_f64(r.stderr),
            r.provenance.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_file(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_rows(std::io::BufWriter::new(file), rows)
}

pub fn read_rows<R: Read>(input: R, path: &Path) -> Result<Vec<CurveRow>> {
    let malformed = |reason: String| Error::MalformedCurve {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        return Err(malformed(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let num = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| {
                malformed(format!(
                    "row {}: bad {} `{}`",
                    line + 1,
                    HEADER[i],
                    field(i)
                ))
            })
        };
        let user = field(1)
            .parse::<usize>()
            .map_err(|_| malformed(format!("row {}: bad user `{}`", line + 1, field(1))))?;
        rows.push(CurveRow {
            snr_db: num(0)?,
            user,
            ber: num(2)?,
            stderr: num(3)?,
            provenance: field(4)
                .parse()
                .map_err(|e: Error| malformed(format!("row {}: {e}", line + 1)))?,
        });
    }
    Ok(rows)
}

pub fn read_curve_file(path: &Path) -> Result<Vec<CurveRow>> {
    read_rows(std::fs::File::open(path)?, path)
}
