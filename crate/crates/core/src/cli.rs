//! Command implementations behind the `sharpbound` binary.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed_form::power_mean_bounds;
use crate::config::{Config, ConfigError, Reference};
use crate::dual::DualError;
use crate::extended;
use crate::problem::Direction;
use crate::report::{self, extended_gap, Report, RunOptions};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solve(#[from] DualError),
    #[error("sweep parameter `{0}` does not occur in the config")]
    UnknownSweepParam(String),
    #[error("sweep needs at least one step")]
    NoSteps,
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot write output: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot encode report: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code for a failed command.
    pub fn exit_code(&self) -> i32 {
        report::EXIT_CONFIG
    }
}

/// Loads, solves and returns the report of one config file.
pub fn run_bound(path: &Path, opts: RunOptions) -> Result<Report, CliError> {
    let resolved = Config::load(path)?.resolve()?;
    Ok(report::run(&resolved, opts)?)
}

pub fn write_report(report: &Report, out: &mut impl Write) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, report)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl SweepSpec {
    /// Evenly spaced values from `from` to `to` inclusive.
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.from];
        }
        let n = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| self.from + (self.to - self.from) * i as f64 / n)
            .collect()
    }
}

/// One CSV line. Power-mean sweeps report `(E X^s)^{1/s}` instead of `E X^s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    #[serde(with = "extended::option")]
    pub lower: Option<f64>,
    #[serde(with = "extended::option")]
    pub upper: Option<f64>,
    #[serde(with = "extended::option")]
    pub lower_ref: Option<f64>,
    #[serde(with = "extended::option")]
    pub upper_ref: Option<f64>,
    #[serde(with = "extended::option")]
    pub gap_lower: Option<f64>,
    #[serde(with = "extended::option")]
    pub gap_upper: Option<f64>,
    pub status: String,
}

pub const CSV_HEADER: [&str; 8] = [
    "param",
    "lower",
    "upper",
    "lower_ref",
    "upper_ref",
    "gap_lower",
    "gap_upper",
    "status",
];

pub fn run_sweep(path: &Path, spec: &SweepSpec, opts: RunOptions) -> Result<Vec<SweepRow>, CliError> {
    let config = Config::load(path)?;
    sweep_config(&config, spec, opts)
}

pub fn sweep_config(config: &Config, spec: &SweepSpec, opts: RunOptions) -> Result<Vec<SweepRow>, CliError> {
    if spec.steps == 0 {
        return Err(CliError::NoSteps);
    }
    let raw = serde_json::to_string(config)?;
    if !config.params.contains_key(&spec.param) && !raw.contains(&format!("${}", spec.param)) {
        return Err(CliError::UnknownSweepParam(spec.param.clone()));
    }
    // a config that cannot be resolved at all is an error, not a failed row
    config.resolve_with(&BTreeMap::from([(spec.param.clone(), spec.from)]))?;
    Ok(spec
        .values()
        .par_iter()
        .map(|&v| sweep_row(config, &spec.param, v, opts))
        .collect())
}

fn sweep_row(config: &Config, param: &str, value: f64, opts: RunOptions) -> SweepRow {
    let mut row = SweepRow {
        param: value,
        lower: None,
        upper: None,
        lower_ref: None,
        upper_ref: None,
        gap_lower: None,
        gap_upper: None,
        status: String::new(),
    };
    let resolved = match config.resolve_with(&BTreeMap::from([(param.to_string(), value)])) {
        Ok(r) => r,
        Err(e) => {
            row.status = format!("error: {e}");
            return row;
        }
    };
    let rep = match report::run(&resolved, opts) {
        Ok(r) => r,
        Err(e) => {
            row.status = format!("error: {e}");
            return row;
        }
    };
    for d in &rep.results {
        let (bound, reference) = (d.result.bound, d.reference);
        match d.result.direction {
            Direction::Lower => (row.lower, row.lower_ref) = (bound, reference),
            Direction::Upper => (row.upper, row.upper_ref) = (bound, reference),
        }
    }
    if let Some(Reference::PowerMean { lambda, var, s }) = resolved.reference {
        (row.lower, row.upper) = power_mean_space(s, row.lower, row.upper);
        let refs = power_mean_bounds(lambda, var, s).ok();
        let want = |d: Direction| resolved.directions.contains(&d);
        row.lower_ref = refs.filter(|_| want(Direction::Lower)).map(|b| b.lower);
        row.upper_ref = refs
            .filter(|_| want(Direction::Upper))
            .map(|b| b.upper.unwrap_or(f64::INFINITY));
    }
    row.gap_lower = row.lower.zip(row.lower_ref).map(|(a, b)| extended_gap(a, b));
    row.gap_upper = row.upper.zip(row.upper_ref).map(|(a, b)| extended_gap(a, b));
    row.status = rep.status.as_str().to_string();
    row
}

/// Maps bounds on `E X^s` to bounds on `(E X^s)^{1/s}`; the order flips for `s < 0`.
pub fn power_mean_space(s: f64, lower: Option<f64>, upper: Option<f64>) -> (Option<f64>, Option<f64>) {
    let root = |v: f64| v.max(0.0).powf(1.0 / s);
    if s > 0.0 {
        (lower.map(root), upper.map(root))
    } else if s < 0.0 {
        (upper.map(root), lower.map(root))
    } else {
        (lower, upper)
    }
}

pub fn write_csv(rows: &[SweepRow], out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let cell = |v: Option<f64>| match v {
        None => String::new(),
        Some(x) if x.is_finite() => x.to_string(),
        Some(x) => extended::to_value(x).as_str().unwrap_or_default().to_string(),
    };
    for r in rows {
        w.write_record([
            r.param.to_string(),
            cell(r.lower),
            cell(r.upper),
            cell(r.lower_ref),
            cell(r.upper_ref),
            cell(r.gap_lower),
            cell(r.gap_upper),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values() {
        let s = SweepSpec {
            param: "s".into(),
            from: -2.0,
            to: 2.0,
            steps: 81,
        };
        let v = s.values();
        assert_eq!(v.len(), 81);
        assert_eq!(v[0], -2.0);
        assert_eq!(v[40], 0.0);
        assert_eq!(v[80], 2.0);
        assert_eq!(SweepSpec { steps: 1, ..s }.values(), vec![-2.0]);
    }

    #[test]
    fn power_mean_mapping() {
        let (l, u) = power_mean_space(2.0, Some(4.0), Some(f64::INFINITY));
        assert_eq!((l, u), (Some(2.0), Some(f64::INFINITY)));
        let (l, u) = power_mean_space(-1.0, Some(0.5), Some(f64::INFINITY));
        assert_eq!((l, u), (Some(0.0), Some(2.0)));
    }

    #[test]
    fn csv_cells() {
        let rows = vec![SweepRow {
            param: 0.5,
            lower: Some(1.25),
            upper: Some(f64::INFINITY),
            lower_ref: None,
            upper_ref: Some(f64::INFINITY),
            gap_lower: None,
            gap_upper: Some(0.0),
            status: "error: a, b".into(),
        }];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "param,lower,upper,lower_ref,upper_ref,gap_lower,gap_upper,status\n0.5,1.25,inf,,inf,,0,\"error: a, b\"\n"
        );
    }
}
