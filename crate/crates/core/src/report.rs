//! Machine-readable output of a bound run.

use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::closed_form::{
    jarzynski_bound, jensen_gap_bounds, markov_bound, mgf_bounds, power_mean_expectation_bounds,
    three_point_extremize, ClosedFormError, ThreePointOptions,
};
use crate::config::{Reference, Resolved};
use crate::dual::{solve_dual, BoundResult, BoundStatus, DualError, FeasibilityReport};
use crate::expr::Expr;
use crate::extended;
use crate::problem::Direction;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_BOUNDARY: i32 = 3;
pub const EXIT_NON_CONVERGENCE: i32 = 4;

/// Reference bounds in the same space as the solver output (`E g`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ReferenceValues {
    #[serde(with = "extended::option")]
    pub lower: Option<f64>,
    #[serde(with = "extended::option")]
    pub upper: Option<f64>,
}

impl ReferenceValues {
    pub fn get(&self, d: Direction) -> Option<f64> {
        match d {
            Direction::Lower => self.lower,
            Direction::Upper => self.upper,
        }
    }
}

pub fn reference_values(
    r: &Reference,
    objective: &Expr,
    seed: u64,
) -> Result<ReferenceValues, ClosedFormError> {
    Ok(match *r {
        Reference::Mgf { lambda, var, s } => {
            let b = mgf_bounds(lambda, var, s)?;
            ReferenceValues {
                lower: Some(b.lower),
                upper: Some(b.upper),
            }
        }
        Reference::PowerMean { lambda, var, s } => {
            let b = power_mean_expectation_bounds(lambda, var, s)?;
            ReferenceValues {
                lower: Some(b.lower),
                upper: Some(b.upper),
            }
        }
        Reference::JensenGap { a, b, lambda, var } => {
            let j = jensen_gap_bounds(objective, a, b, lambda, var)?;
            ReferenceValues {
                lower: Some(j.lower),
                upper: Some(j.upper),
            }
        }
        Reference::Markov { lambda, a } => ReferenceValues {
            lower: Some(markov_bound(lambda, a)),
            upper: None,
        },
        Reference::Jarzynski { a, lambda } => ReferenceValues {
            lower: None,
            upper: Some(jarzynski_bound(a, lambda)),
        },
        Reference::ThreePoint { lambda, var } => {
            let opts = ThreePointOptions {
                seed,
                ..ThreePointOptions::default()
            };
            ReferenceValues {
                lower: Some(three_point_extremize(objective, lambda, var, Direction::Lower, opts)?),
                upper: Some(three_point_extremize(objective, lambda, var, Direction::Upper, opts)?),
            }
        }
    })
}

/// `|a − b|`, zero when both are the same infinity.
pub fn extended_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionReport {
    #[serde(flatten)]
    pub result: BoundResult,
    #[serde(with = "extended::option")]
    pub reference: Option<f64>,
    #[serde(with = "extended::option")]
    pub reference_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Infeasible,
    BoundaryPhi,
    NonConvergence,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => EXIT_OK,
            RunStatus::Infeasible => EXIT_INFEASIBLE,
            RunStatus::BoundaryPhi => EXIT_BOUNDARY,
            RunStatus::NonConvergence => EXIT_NON_CONVERGENCE,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Infeasible => "infeasible",
            RunStatus::BoundaryPhi => "boundary_phi",
            RunStatus::NonConvergence => "non_convergence",
        }
    }

    /// Worst status over the directions solved.
    pub fn combine<'a>(statuses: impl IntoIterator<Item = &'a BoundStatus>) -> Self {
        let mut out = RunStatus::Ok;
        for s in statuses {
            let r = match s {
                BoundStatus::Converged => RunStatus::Ok,
                BoundStatus::Infeasible => RunStatus::Infeasible,
                BoundStatus::BoundaryPhi => RunStatus::BoundaryPhi,
                BoundStatus::NonConvergence => RunStatus::NonConvergence,
            };
            if r.rank() > out.rank() {
                out = r;
            }
        }
        out
    }

    fn rank(self) -> u8 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::NonConvergence => 1,
            RunStatus::BoundaryPhi => 2,
            RunStatus::Infeasible => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub dim: usize,
    pub constraints: Vec<String>,
    pub phi: Vec<f64>,
    pub objective: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    /// Seconds since the Unix epoch; omitted for reproducible output.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed_ms: Option<f64>,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
    pub problem: ProblemSummary,
    pub feasibility: FeasibilityReport,
    pub results: Vec<DirectionReport>,
    pub reference_error: Option<String>,
    pub status: RunStatus,
    pub exit_code: i32,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub timestamp: bool,
    pub keep_history: bool,
}

/// Solves every requested direction and compares with the reference.
pub fn run(resolved: &Resolved, opts: RunOptions) -> Result<Report, DualError> {
    let start = Instant::now();
    let p = &resolved.problem;
    let (reference, reference_error) = match &resolved.reference {
        None => (None, None),
        Some(r) => match reference_values(r, &p.objective, resolved.seed) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    let mut results = Vec::new();
    for &d in &resolved.directions {
        let mut result = solve_dual(&p.with_direction(d), &resolved.solver)?;
        if !opts.keep_history {
            result.history.clear();
        }
        let reference = reference.and_then(|r| r.get(d));
        let reference_gap = match (result.bound, reference) {
            (Some(b), Some(r)) => Some(extended_gap(b, r)),
            _ => None,
        };
        results.push(DirectionReport {
            result,
            reference,
            reference_gap,
        });
    }
    let status = RunStatus::combine(results.iter().map(|r| &r.result.status));
    let timestamp = opts.timestamp.then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    });
    Ok(Report {
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp,
        elapsed_ms: opts.timestamp.then(|| start.elapsed().as_secs_f64() * 1e3),
        seed: resolved.seed,
        params: resolved.params.clone(),
        problem: ProblemSummary {
            dim: p.dim,
            constraints: p.constraints.iter().map(|c| c.f.to_string()).collect(),
            phi: p.phi(),
            objective: p.objective.to_string(),
        },
        feasibility: results[0].result.feasibility.clone(),
        results,
        reference_error,
        status,
        exit_code: status.exit_code(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    #[test]
    fn combine_prefers_worst() {
        use BoundStatus::*;
        assert_eq!(RunStatus::combine(&[Converged, Converged]), RunStatus::Ok);
        assert_eq!(RunStatus::combine(&[NonConvergence, Converged]), RunStatus::NonConvergence);
        assert_eq!(RunStatus::combine(&[NonConvergence, Infeasible]), RunStatus::Infeasible);
        assert_eq!(RunStatus::Infeasible.exit_code(), 2);
        assert_eq!(RunStatus::BoundaryPhi.exit_code(), 3);
        assert_eq!(RunStatus::NonConvergence.exit_code(), 4);
    }

    #[test]
    fn variance_range_report() {
        let c = Config::from_json(
            r#"{"dim": 1, "support": {"type": "intervals", "intervals": [{"lo": 0, "hi": 1}]},
                "constraints": [{"f": "x1", "phi": 0.3}], "objective": "x1^2"}"#,
        )
        .unwrap();
        let r = run(&c.resolve().unwrap(), RunOptions::default()).unwrap();
        assert_eq!(r.status, RunStatus::Ok);
        assert!((r.results[0].result.bound.unwrap() - 0.09).abs() < 1e-6);
        assert!((r.results[1].result.bound.unwrap() - 0.3).abs() < 1e-6);
        assert_eq!(r.results[1].reference_gap, None);
        let json = serde_json::to_string(&r).unwrap();
        assert!(!json.contains("timestamp") && !json.contains("elapsed_ms"));
    }

    #[test]
    fn infinite_gap() {
        assert_eq!(extended_gap(f64::INFINITY, f64::INFINITY), 0.0);
        assert_eq!(extended_gap(f64::INFINITY, 2.0), f64::INFINITY);
    }
}
