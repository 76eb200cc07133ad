//! CSV emission and parsing.
//!
//! Floats are written in scientific notation with 12 significant digits,
//! so reading a file back reproduces every value at that precision.

use std::fs;
use std::path::Path;

use rcmdp_core::driver::{RunLog, RunRow};
use rcmdp_core::protocol::{SweepRow, SweepTable};
use rcmdp_core::Sign;

use crate::error::{HarnessError, Result};

pub fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn run_header(m: usize) -> Vec<String> {
    let mut h = vec!["k".to_string(), "V".to_string()];
    h.extend((1..=m).map(|j| format!("V_{j}")));
    h.push("lagrangian".into());
    h.extend((1..=m).map(|j| format!("lambda_{j}")));
    h.extend(["kernel_linf_dev", "pkl_step", "budget_T"].map(String::from));
    h
}

fn run_record(row: &RunRow) -> Vec<String> {
    let mut r = vec![row.k.to_string(), fmt_float(row.value)];
    r.extend(row.constraint_values.iter().map(|&v| fmt_float(v)));
    r.push(fmt_float(row.lagrangian));
    r.extend(row.lambda.iter().map(|&v| fmt_float(v)));
    r.push(fmt_float(row.kernel_linf_dev));
    r.push(fmt_float(row.pkl_step));
    r.push(row.budget_t.to_string());
    r
}

pub fn sweep_header(n_groups: usize, m: usize) -> Vec<String> {
    let mut h = vec!["level".to_string()];
    h.extend((1..=n_groups).map(|i| format!("sign_{i}")));
    h.push("return".into());
    h.extend((1..=m).map(|j| format!("cost_{j}")));
    h.extend(["r_pen", "r_pen_signed"].map(String::from));
    h
}

fn sign_str(s: Sign) -> &'static str {
    match s {
        Sign::Plus => "+",
        Sign::Minus => "-",
    }
}

fn sweep_record(row: &SweepRow) -> Vec<String> {
    let mut r = vec![fmt_float(row.level)];
    r.extend(row.signs.iter().map(|&s| sign_str(s).to_string()));
    r.push(fmt_float(row.ret));
    r.extend(row.constraints.iter().map(|&v| fmt_float(v)));
    r.push(fmt_float(row.r_pen));
    r.push(fmt_float(row.r_pen_signed));
    r
}

fn write_csv(path: &Path, header: &[String], records: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_run_log(log: &RunLog, path: &Path) -> Result<()> {
    write_csv(path, &run_header(log.n_constraints), log.rows.iter().map(run_record))
}

/// The sign count is passed separately so an empty table still gets a full header.
pub fn write_sweep(table: &SweepTable, n_groups: usize, path: &Path) -> Result<()> {
    write_csv(
        path,
        &sweep_header(n_groups, table.n_constraints),
        table.rows.iter().map(sweep_record),
    )
}

fn parse_err(path: &Path, msg: String) -> HarnessError {
    HarnessError::Config {
        path: path.to_path_buf(),
        message: msg,
    }
}

/// Reads a file written by [`write_run_log`].
pub fn read_run_log(path: &Path) -> Result<RunLog> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    let width = rd.headers().map_err(csv_err)?.len();
    if width < 6 || (width - 6) % 2 != 0 {
        return Err(parse_err(path, format!("unexpected column count {width}")));
    }
    let m = (width - 6) / 2;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| parse_err(path, format!("column {i}: {e}")))
        };
        let int = |i: usize| -> Result<u64> {
            rec[i]
                .parse::<u64>()
                .map_err(|e| parse_err(path, format!("column {i}: {e}")))
        };
        rows.push(RunRow {
            k: int(0)? as usize,
            value: f(1)?,
            constraint_values: (0..m).map(|j| f(2 + j)).collect::<Result<_>>()?,
            lagrangian: f(2 + m)?,
            lambda: (0..m).map(|j| f(3 + m + j)).collect::<Result<_>>()?,
            kernel_linf_dev: f(3 + 2 * m)?,
            pkl_step: f(4 + 2 * m)?,
            budget_t: int(5 + 2 * m)?,
        });
    }
    Ok(RunLog { n_constraints: m, rows })
}
