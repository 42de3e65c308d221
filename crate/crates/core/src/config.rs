//! JSON problem configuration.
//!
//! Expression strings and scalar fields may reference named parameters as
//! `$name`; the value is substituted textually (parenthesised) before parsing,
//! which is how sweeps vary a scalar such as the `s` in `exp($s*x1)`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::SolverParams;
use crate::expr::{parse_expr, ParseError};
use crate::extended;
use crate::problem::{
    validate_problem, Constraint, Diagnostic, Direction, Exclusion, Interval, ProblemSpec, Region,
    Side, SupportSet, TruncationSchedule,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{field}: {source}")]
    Expr { field: String, source: ParseError },
    #[error("{field}: `{text}` is not a constant expression")]
    NotConstant { field: String, text: String },
    #[error("unknown parameter `${0}`")]
    UnknownParam(String),
    #[error("{0}")]
    Shape(String),
    #[error("invalid problem: {}", .0.iter().map(|d| d.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

/// A number, an extended-real label (`"inf"`), or a constant expression string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Number(v)
    }
}

impl Scalar {
    pub fn resolve(&self, field: &str, params: &BTreeMap<String, f64>) -> Result<f64, ConfigError> {
        match self {
            Scalar::Number(v) => Ok(*v),
            Scalar::Text(t) => {
                if let Some(v) = extended::parse(t) {
                    return Ok(v);
                }
                let text = substitute(t, params)?;
                let e = parse_expr(&text, 0).map_err(|source| ConfigError::Expr {
                    field: field.to_string(),
                    source,
                })?;
                e.eval(&[]).map_err(|_| ConfigError::NotConstant {
                    field: field.to_string(),
                    text: t.clone(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SupportConfig {
    Box {
        lower: Vec<Scalar>,
        upper: Vec<Scalar>,
        #[serde(default)]
        lower_open: Vec<bool>,
        #[serde(default)]
        upper_open: Vec<bool>,
    },
    Intervals { intervals: Vec<IntervalConfig> },
    Points { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalConfig {
    pub lo: Scalar,
    pub hi: Scalar,
    #[serde(default)]
    pub lo_open: bool,
    #[serde(default)]
    pub hi_open: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub r0: Scalar,
    pub growth: Scalar,
    pub stages: usize,
    #[serde(default)]
    pub exclusions: Vec<ExclusionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionConfig {
    pub point: Scalar,
    pub side: Side,
}

impl ScheduleConfig {
    fn resolve(&self, params: &BTreeMap<String, f64>) -> Result<TruncationSchedule, ConfigError> {
        Ok(TruncationSchedule {
            r0: self.r0.resolve("schedule.r0", params)?,
            growth: self.growth.resolve("schedule.growth", params)?,
            stages: self.stages,
            exclusions: self
                .exclusions
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    Ok(Exclusion {
                        point: e.point.resolve(&format!("schedule.exclusions[{i}].point"), params)?,
                        side: e.side,
                    })
                })
                .collect::<Result<_, ConfigError>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintConfig {
    pub f: String,
    pub phi: Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DirectionChoice {
    Lower,
    Upper,
    #[default]
    Both,
}

impl DirectionChoice {
    pub fn directions(self) -> Vec<Direction> {
        match self {
            DirectionChoice::Lower => vec![Direction::Lower],
            DirectionChoice::Upper => vec![Direction::Upper],
            DirectionChoice::Both => vec![Direction::Lower, Direction::Upper],
        }
    }
}

/// Closed-form value the solver output is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceConfig {
    /// `E exp(sX)` for `X ≥ 0` with mean λ and variance σ².
    Mgf { lambda: Scalar, var: Scalar, s: Scalar },
    /// `E X^s` for `X > 0`; sweeps report it as the power mean `(E X^s)^{1/s}`.
    PowerMean { lambda: Scalar, var: Scalar, s: Scalar },
    /// Two-atom bounds on `[a, b]` for the configured objective.
    JensenGap { a: Scalar, b: Scalar, lambda: Scalar, var: Scalar },
    /// Lower bound of `P(X ≤ a)` for `X ≥ 0` with mean λ.
    Markov { lambda: Scalar, a: Scalar },
    /// Upper bound of `P(X ≥ λ)` for `X ≥ a` with `E e^X = 1`.
    Jarzynski { a: Scalar, lambda: Scalar },
    /// Lower/upper bounds found by three-point search on the real line.
    ThreePoint { lambda: Scalar, var: Scalar },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub dim: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub support: SupportConfig,
    #[serde(default)]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default)]
    pub marks: Vec<Vec<f64>>,
    pub constraints: Vec<ConstraintConfig>,
    pub objective: String,
    #[serde(default)]
    pub direction: DirectionChoice,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
}

/// A config with parameters substituted and expressions parsed.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub problem: ProblemSpec,
    pub directions: Vec<Direction>,
    pub solver: SolverParams,
    pub seed: u64,
    pub reference: Option<Reference>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    Mgf { lambda: f64, var: f64, s: f64 },
    PowerMean { lambda: f64, var: f64, s: f64 },
    JensenGap { a: f64, b: f64, lambda: f64, var: f64 },
    Markov { lambda: f64, a: f64 },
    Jarzynski { a: f64, lambda: f64 },
    ThreePoint { lambda: f64, var: f64 },
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Resolves with the config's own parameters.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        self.resolve_with(&BTreeMap::new())
    }

    /// Resolves with `overrides` taking precedence over `params`.
    pub fn resolve_with(&self, overrides: &BTreeMap<String, f64>) -> Result<Resolved, ConfigError> {
        let mut params = self.params.clone();
        params.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
        let dim = self.dim;
        let expr = |field: &str, text: &str| {
            let t = substitute(text, &params)?;
            parse_expr(&t, dim).map_err(|source| ConfigError::Expr {
                field: field.to_string(),
                source,
            })
        };
        let region = self.region(&params)?;
        let support = SupportSet {
            region,
            schedule: self.schedule.as_ref().map(|s| s.resolve(&params)).transpose()?,
            marks: self.marks.clone(),
        };
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let field = format!("constraints[{i}]");
                Ok(Constraint {
                    f: expr(&format!("{field}.f"), &c.f)?,
                    phi: c.phi.resolve(&format!("{field}.phi"), &params)?,
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let directions = self.direction.directions();
        let problem = ProblemSpec {
            dim,
            support,
            constraints,
            objective: expr("objective", &self.objective)?,
            direction: directions[0],
        };
        let diags = validate_problem(&problem);
        if !diags.is_empty() {
            return Err(ConfigError::Invalid(diags));
        }
        let reference = self
            .reference
            .as_ref()
            .map(|r| resolve_reference(r, &params))
            .transpose()?;
        Ok(Resolved {
            problem,
            directions,
            solver: self.solver.clone(),
            seed: self.seed,
            reference,
            params,
        })
    }

    fn region(&self, params: &BTreeMap<String, f64>) -> Result<Region, ConfigError> {
        Ok(match &self.support {
            SupportConfig::Box {
                lower,
                upper,
                lower_open,
                upper_open,
            } => {
                let n = lower.len();
                if upper.len() != n {
                    return Err(ConfigError::Shape("box lower and upper differ in length".into()));
                }
                let flags = |v: &Vec<bool>, name: &str| {
                    if v.is_empty() {
                        Ok(vec![false; n])
                    } else if v.len() == n {
                        Ok(v.clone())
                    } else {
                        Err(ConfigError::Shape(format!("box {name} has the wrong length")))
                    }
                };
                Region::Box {
                    lower: resolve_all(lower, "support.lower", params)?,
                    upper: resolve_all(upper, "support.upper", params)?,
                    lower_open: flags(lower_open, "lower_open")?,
                    upper_open: flags(upper_open, "upper_open")?,
                }
            }
            SupportConfig::Intervals { intervals } => Region::Intervals(
                intervals
                    .iter()
                    .enumerate()
                    .map(|(i, iv)| {
                        Ok(Interval {
                            lo: iv.lo.resolve(&format!("support.intervals[{i}].lo"), params)?,
                            hi: iv.hi.resolve(&format!("support.intervals[{i}].hi"), params)?,
                            lo_open: iv.lo_open,
                            hi_open: iv.hi_open,
                        })
                    })
                    .collect::<Result<_, ConfigError>>()?,
            ),
            SupportConfig::Points { points } => Region::Points(points.clone()),
        })
    }
}

fn resolve_all(v: &[Scalar], field: &str, params: &BTreeMap<String, f64>) -> Result<Vec<f64>, ConfigError> {
    v.iter()
        .enumerate()
        .map(|(i, s)| s.resolve(&format!("{field}[{i}]"), params))
        .collect()
}

fn resolve_reference(r: &ReferenceConfig, params: &BTreeMap<String, f64>) -> Result<Reference, ConfigError> {
    let v = |s: &Scalar, name: &str| s.resolve(&format!("reference.{name}"), params);
    Ok(match r {
        ReferenceConfig::Mgf { lambda, var, s } => Reference::Mgf {
            lambda: v(lambda, "lambda")?,
            var: v(var, "var")?,
            s: v(s, "s")?,
        },
        ReferenceConfig::PowerMean { lambda, var, s } => Reference::PowerMean {
            lambda: v(lambda, "lambda")?,
            var: v(var, "var")?,
            s: v(s, "s")?,
        },
        ReferenceConfig::JensenGap { a, b, lambda, var } => Reference::JensenGap {
            a: v(a, "a")?,
            b: v(b, "b")?,
            lambda: v(lambda, "lambda")?,
            var: v(var, "var")?,
        },
        ReferenceConfig::Markov { lambda, a } => Reference::Markov {
            lambda: v(lambda, "lambda")?,
            a: v(a, "a")?,
        },
        ReferenceConfig::Jarzynski { a, lambda } => Reference::Jarzynski {
            a: v(a, "a")?,
            lambda: v(lambda, "lambda")?,
        },
        ReferenceConfig::ThreePoint { lambda, var } => Reference::ThreePoint {
            lambda: v(lambda, "lambda")?,
            var: v(var, "var")?,
        },
    })
}

/// Replaces every `$name` with `(value)`.
pub fn substitute(text: &str, params: &BTreeMap<String, f64>) -> Result<String, ConfigError> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if c != '$' {
            out.push(c);
            continue;
        }
        let mut name = String::new();
        while let Some((_, n)) = chars.peek() {
            if n.is_ascii_alphanumeric() || *n == '_' {
                name.push(*n);
                chars.next();
            } else {
                break;
            }
        }
        let v = params.get(&name).ok_or_else(|| ConfigError::UnknownParam(name.clone()))?;
        // `{:?}` round-trips and always uses a form the lexer accepts
        out.push_str(&format!("({v:?})"));
    }
    Ok(out)
}
