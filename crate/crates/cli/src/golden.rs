//! Comparison of fresh traces against committed golden CSVs.

use std::fmt;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::experiment::{csv_header, execute, trace_rows};
use crate::CliError;

/// Relative tolerance for every numeric column except `iter` (exact) and
/// `time_s` (ignored).
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub solver: String,
    /// Data row, 0-based (the header is not counted).
    pub row: usize,
    pub column: String,
    pub expected: String,
    pub actual: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: row {} column {}: expected {}, got {}",
            self.solver, self.row, self.column, self.expected, self.actual
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    /// `(solver, rows compared)` for each solver that matched.
    pub matched: Vec<(String, usize)>,
    /// First mismatch in solver order, if any.
    pub divergence: Option<Divergence>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

fn close(column: &str, expected: &str, actual: &str) -> bool {
    match column {
        "time_s" => true,
        "iter" => expected == actual,
        _ => {
            if expected == actual {
                return true;
            }
            match (expected.parse::<f64>(), actual.parse::<f64>()) {
                (Ok(a), Ok(b)) => (a - b).abs() <= REL_TOL * a.abs().max(b.abs()),
                _ => false,
            }
        }
    }
}

fn read_golden(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let header = r.headers().map_err(err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(err)?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// Re-runs `cfg` and compares each solver's trace with `<golden>/<solver>.csv`.
pub fn verify_golden(cfg: &ExperimentConfig, golden: &Path) -> Result<VerifyReport, CliError> {
    for c in &cfg.solvers {
        let path = golden.join(format!("{}.csv", c.method));
        if !path.is_file() {
            return Err(CliError::MissingGolden(path));
        }
    }
    let run = execute(cfg, false)?;
    let header = csv_header(run.has_opt_gap);
    let mut matched = Vec::new();
    for r in &run.runs {
        let solver = r.config.method.tag().to_string();
        let diverge = |row, column: &str, expected: String, actual: String| VerifyReport {
            matched: matched.clone(),
            divergence: Some(Divergence { solver: solver.clone(), row, column: column.into(), expected, actual }),
        };
        let (g_header, g_rows) = read_golden(&golden.join(format!("{solver}.csv")))?;
        if g_header != header {
            return Ok(diverge(0, "header", g_header.join(","), header.join(",")));
        }
        let rows = match &r.outcome {
            Ok(trace) => trace_rows(trace, run.has_opt_gap),
            Err(e) => return Ok(diverge(0, "status", "trace".into(), format!("error: {e}"))),
        };
        for (i, (g, a)) in g_rows.iter().zip(&rows).enumerate() {
            for (col, (ge, ae)) in header.iter().zip(g.iter().zip(a)) {
                if !close(col, ge, ae) {
                    return Ok(diverge(i, col, ge.clone(), ae.clone()));
                }
            }
        }
        if g_rows.len() != rows.len() {
            let row = g_rows.len().min(rows.len());
            return Ok(diverge(row, "rows", format!("{} rows", g_rows.len()), format!("{} rows", rows.len())));
        }
        matched.push((solver, rows.len()));
    }
    Ok(VerifyReport { matched, divergence: None })
}
