use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One sweep point. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub method: String,
    /// Node count, term count or sample count.
    pub n: u64,
    pub estimate: f64,
    /// `|estimate − reference|`, or the RMS residual for Gaussian TT-X.
    pub error: f64,
    pub runtime_seconds: f64,
    /// Instrumented target evaluations (or quadratures, or samples).
    pub evals: u64,
}

/// CSV header, byte for byte.
pub const CSV_HEADER: &str = "method,n,estimate,error,runtime_seconds,evals";

/// Error thresholds of the time-to-threshold table.
pub const THRESHOLDS: [f64; 3] = [1e-3, 1e-6, 1e-9];

/// Placeholder for a threshold that was never reached.
pub const NOT_REACHED: &str = "—";

/// Abscissa of a slope fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XField {
    N,
    Runtime,
}

/// Ordinary least-squares line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation of the points.
    pub correlation: f64,
}

impl LinearFit {
    pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return invalid("x and y lengths differ");
        }
        if xs.len() < 3 {
            return invalid(format!("a fit needs at least 3 points, got {}", xs.len()));
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (y - my);
            syy += (y - my) * (y - my);
        }
        if sxx == 0.0 {
            return invalid("all x values are equal");
        }
        let slope = sxy / sxx;
        let correlation = if syy == 0.0 { 0.0 } else { sxy / (sxx * syy).sqrt() };
        Ok(Self {
            slope,
            intercept: my - slope * mx,
            correlation,
        })
    }
}

fn x_of(r: &ConvergenceRecord, x: XField) -> f64 {
    match x {
        XField::N => r.n as f64,
        XField::Runtime => r.runtime_seconds,
    }
}

/// Points with `x` in `range` (inclusive) and a positive finite error.
fn usable(records: &[ConvergenceRecord], x: XField, range: (f64, f64)) -> Vec<(f64, f64)> {
    records
        .iter()
        .map(|r| (x_of(r, x), r.error))
        .filter(|&(xv, e)| xv >= range.0 && xv <= range.1 && xv > 0.0 && e > 0.0 && e.is_finite())
        .collect()
}

/// Least-squares slope of `log(error)` against `log(x)`.
pub fn fit_slope(records: &[ConvergenceRecord], x: XField, range: (f64, f64)) -> Result<f64> {
    let pts = usable(records, x, range);
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    Ok(LinearFit::least_squares(&xs, &ys)?.slope)
}

/// Least-squares line of `log(error)` against `x` itself, for exponential
/// convergence.
pub fn fit_log_linear(records: &[ConvergenceRecord], x: XField, range: (f64, f64)) -> Result<LinearFit> {
    let pts = usable(records, x, range);
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    LinearFit::least_squares(&xs, &ys)
}

/// Records of one method, in order.
pub fn by_method(records: &[ConvergenceRecord], method: &str) -> Vec<ConvergenceRecord> {
    records.iter().filter(|r| r.method == method).cloned().collect()
}

/// First record of `method` (in sweep order) with `error ≤ eps`.
pub fn time_to_threshold<'r>(
    records: &'r [ConvergenceRecord],
    method: &str,
    eps: f64,
) -> Option<&'r ConvergenceRecord> {
    records.iter().find(|r| r.method == method && r.error <= eps)
}

/// Methods in order of first appearance.
pub fn methods(records: &[ConvergenceRecord]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in records {
        if !out.contains(&r.method) {
            out.push(r.method.clone());
        }
    }
    out
}

/// Aligned text table of measured time-to-threshold per method.
pub fn threshold_table(records: &[ConvergenceRecord], notes: &[String]) -> String {
    let header: Vec<String> = std::iter::once("method".to_string())
        .chain(THRESHOLDS.iter().map(|e| format!("eps={e:e}")))
        .collect();
    let mut rows = vec![header];
    for m in methods(records) {
        let mut row = vec![m.clone()];
        for &eps in &THRESHOLDS {
            row.push(match time_to_threshold(records, &m, eps) {
                Some(r) => format!("{:.3} s (n={})", r.runtime_seconds, r.n),
                None => NOT_REACHED.to_string(),
            });
        }
        rows.push(row);
    }
    let cols = rows[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if i == 0 {
            let _ = writeln!(out, "{}", widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  "));
        }
    }
    let _ = writeln!(
        out,
        "\nTimes are measured wall-clock seconds on this host for the first sweep point \
         reaching each error; they are not portable. {NOT_REACHED} marks thresholds not reached."
    );
    for n in notes {
        let _ = writeln!(out, "{n}");
    }
    out
}

/// Path of the text table written next to `csv_path`.
pub fn table_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("table.txt")
}

/// CSV text of `records`.
pub fn to_csv(records: &[ConvergenceRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Parses CSV produced by [`to_csv`].
pub fn from_csv(text: &str) -> Result<Vec<ConvergenceRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return invalid(format!("unexpected CSV header {header:?}"));
    }
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

/// Writes the CSV to `out_path` and the table to [`table_path`]. Returns
/// the table path.
pub fn emit_report(records: &[ConvergenceRecord], out_path: &Path, notes: &[String]) -> Result<PathBuf> {
    if records.is_empty() {
        return invalid("no records to report");
    }
    std::fs::write(out_path, to_csv(records)?)?;
    let table = table_path(out_path);
    std::fs::write(&table, threshold_table(records, notes))?;
    Ok(table)
}
