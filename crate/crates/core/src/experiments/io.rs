//! CSV input and output.
//!
//! Floats are written with 17 significant digits so that reading a file
//! back reproduces every value bit for bit.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::risk::{McEstimate, RiskCurve};

pub const RISK_HEADER: [&str; 6] = ["k", "risk", "bias", "variance", "mc_mean", "mc_stderr"];
pub const SUMMARY_HEADER: [&str; 6] = ["m", "true_k", "est_k", "raskutti_k", "min_risk", "risk_at_est"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt<T, F: Fn(&T) -> String>(v: &Option<T>, f: F) -> String {
    v.as_ref().map(f).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub k: usize,
    pub risk: f64,
    pub bias: Option<f64>,
    pub variance: Option<f64>,
    pub mc: Option<McEstimate>,
}

pub fn curve_rows(curve: &RiskCurve) -> Vec<RiskRow> {
    (0..curve.len())
        .map(|i| RiskRow {
            k: curve.ks[i],
            risk: curve.analytic[i],
            bias: curve.bias_part.get(i).copied(),
            variance: curve.variance_part.get(i).copied(),
            mc: curve.mc[i],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub m: f64,
    pub true_k: usize,
    pub est_k: f64,
    pub raskutti_k: Option<usize>,
    pub min_risk: f64,
    pub risk_at_est: f64,
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

pub fn write_risk_curve(curve: &RiskCurve, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RISK_HEADER).map_err(|e| Error::csv(path, e))?;
    for row in curve_rows(curve) {
        w.write_record([
            row.k.to_string(),
            fmt_f64(row.risk),
            fmt_opt(&row.bias, |v| fmt_f64(*v)),
            fmt_opt(&row.variance, |v| fmt_f64(*v)),
            fmt_opt(&row.mc, |m| fmt_f64(m.mean)),
            fmt_opt(&row.mc, |m| fmt_f64(m.stderr)),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T> {
    let s = rec.get(i).unwrap_or("");
    s.parse()
        .map_err(|_| Error::Validation(format!("{}: cannot parse `{s}` in column {}", path.display(), i + 1)))
}

fn opt_field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<Option<T>> {
    match rec.get(i) {
        None | Some("") => Ok(None),
        Some(_) => field(path, rec, i).map(Some),
    }
}

fn records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let got = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Validation(format!(
            "{}: unexpected header {:?}",
            path.display(),
            got.iter().collect::<Vec<_>>()
        )));
    }
    r.records().map(|rec| rec.map_err(|e| Error::csv(path, e))).collect()
}

pub fn read_risk_curve(path: &Path) -> Result<Vec<RiskRow>> {
    records(path, &RISK_HEADER)?
        .iter()
        .map(|rec| {
            let mean: Option<f64> = opt_field(path, rec, 4)?;
            let stderr: Option<f64> = opt_field(path, rec, 5)?;
            Ok(RiskRow {
                k: field(path, rec, 0)?,
                risk: field(path, rec, 1)?,
                bias: opt_field(path, rec, 2)?,
                variance: opt_field(path, rec, 3)?,
                mc: mean.zip(stderr).map(|(mean, stderr)| McEstimate { mean, stderr }),
            })
        })
        .collect()
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.true_k.to_string(),
            fmt_f64(r.est_k),
            fmt_opt(&r.raskutti_k, usize::to_string),
            fmt_f64(r.min_risk),
            fmt_f64(r.risk_at_est),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    records(path, &SUMMARY_HEADER)?
        .iter()
        .map(|rec| {
            Ok(SummaryRow {
                m: field(path, rec, 0)?,
                true_k: field(path, rec, 1)?,
                est_k: field(path, rec, 2)?,
                raskutti_k: opt_field(path, rec, 3)?,
                min_risk: field(path, rec, 4)?,
                risk_at_est: field(path, rec, 5)?,
            })
        })
        .collect()
}

/// Reads a numeric matrix, one sample per row. A first row that does not
/// parse as numbers is taken as a header.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Validation(format!(
                    "{}: non-numeric entry on line {}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::Validation(format!("{}: no data", path.display())));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Validation(format!("{}: ragged rows", path.display())));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

/// Reads a vector stored as a single column or a single row.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() == 1 || m.nrows() == 1 {
        Ok(DVector::from_iterator(m.len(), m.iter().copied()))
    } else {
        Err(Error::Validation(format!(
            "{}: expected a single row or column, got {} x {}",
            path.display(),
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn write_matrix(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| fmt_f64(*v)))
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a header and numeric rows.
pub fn write_table(header: &[String], rows: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Validation(format!(
                "{}: row of {} values under {} columns",
                path.display(),
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|v| fmt_f64(*v)))
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
