//! Problem definition: support sets, truncation schedules, constraints and
//! discrete measures.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr};

/// Absolute tolerance for "atom lies in S".
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Tolerance on the total mass of a discrete measure.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Upper,
}

impl Direction {
    /// +1 for upper bounds (maximise g), -1 for lower bounds.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Lower => -1.0,
            Direction::Upper => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Lower => "lower",
            Direction::Upper => "upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub lo_open: bool,
    #[serde(default)]
    pub hi_open: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }

    fn contains(&self, x: f64) -> bool {
        x >= self.lo - MEMBERSHIP_TOL && x <= self.hi + MEMBERSHIP_TOL
    }

    fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// Which side of an exclusion point is cut away at each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Both,
    /// Nothing is removed; the point and its stage neighbours only seed the grid.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub point: f64,
    pub side: Side,
}

/// Stage k covers `S ∩ [-r0·ρ^k, r0·ρ^k]^n` minus neighbourhoods of radius
/// `r0/ρ^k` around the exclusion points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSchedule {
    pub r0: f64,
    pub growth: f64,
    pub stages: usize,
    #[serde(default)]
    pub exclusions: Vec<Exclusion>,
}

impl TruncationSchedule {
    pub fn radius(&self, k: usize) -> f64 {
        self.r0 * self.growth.powi(k as i32)
    }

    pub fn exclusion_radius(&self, k: usize) -> f64 {
        self.r0 / self.growth.powi(k as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        lower_open: Vec<bool>,
        upper_open: Vec<bool>,
    },
    Intervals(Vec<Interval>),
    Points(Vec<Vec<f64>>),
}

/// Geometric support of X together with an optional truncation schedule.
///
/// `marks` are points that must appear in every inner-optimisation grid
/// (typically discontinuities of g).
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    pub region: Region,
    pub schedule: Option<TruncationSchedule>,
    pub marks: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StageError {
    #[error("stage {k} requested but the schedule has {stages} stages")]
    OutOfRange { k: usize, stages: usize },
    #[error("support is unbounded and has no truncation schedule")]
    Unbounded,
    #[error("stage {0} is empty")]
    Empty(usize),
}

impl SupportSet {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let n = lower.len();
        SupportSet {
            region: Region::Box {
                lower,
                upper,
                lower_open: vec![false; n],
                upper_open: vec![false; n],
            },
            schedule: None,
            marks: Vec::new(),
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::intervals(vec![Interval::closed(lo, hi)])
    }

    pub fn intervals(intervals: Vec<Interval>) -> Self {
        SupportSet {
            region: Region::Intervals(intervals),
            schedule: None,
            marks: Vec::new(),
        }
    }

    pub fn points(points: Vec<Vec<f64>>) -> Self {
        SupportSet {
            region: Region::Points(points),
            schedule: None,
            marks: Vec::new(),
        }
    }

    pub fn with_schedule(mut self, schedule: TruncationSchedule) -> Self {
        self.schedule = Some(schedule);
        self
    }

    pub fn with_marks(mut self, marks: Vec<Vec<f64>>) -> Self {
        self.marks = marks;
        self
    }

    pub fn dim(&self) -> Option<usize> {
        match &self.region {
            Region::Box { lower, .. } => Some(lower.len()),
            Region::Intervals(_) => Some(1),
            Region::Points(p) => p.first().map(Vec::len),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match &self.region {
            Region::Box { lower, upper, .. } => lower
                .iter()
                .chain(upper.iter())
                .all(|v| v.is_finite()),
            Region::Intervals(iv) => iv.iter().all(Interval::is_bounded),
            Region::Points(_) => true,
        }
    }

    /// Number of stages this support is solved over (1 without a schedule).
    pub fn stage_count(&self) -> usize {
        self.schedule.as_ref().map_or(1, |s| s.stages)
    }

    /// Membership in the closure of S, with [`MEMBERSHIP_TOL`] slack.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.region {
            Region::Box { lower, upper, .. } => {
                x.len() == lower.len()
                    && x.iter().zip(lower.iter().zip(upper)).all(|(v, (lo, hi))| {
                        *v >= lo - MEMBERSHIP_TOL && *v <= hi + MEMBERSHIP_TOL
                    })
            }
            Region::Intervals(iv) => x.len() == 1 && iv.iter().any(|i| i.contains(x[0])),
            Region::Points(pts) => pts.iter().any(|p| {
                p.len() == x.len()
                    && p.iter().zip(x).all(|(a, b)| (a - b).abs() <= MEMBERSHIP_TOL)
            }),
        }
    }

    /// Largest coordinate extent, used to scale merge radii.
    pub fn diameter(&self) -> f64 {
        match &self.region {
            Region::Box { lower, upper, .. } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| u - l)
                .fold(0.0, f64::max),
            Region::Intervals(iv) => {
                let lo = iv.iter().map(|i| i.lo).fold(f64::INFINITY, f64::min);
                let hi = iv.iter().map(|i| i.hi).fold(f64::NEG_INFINITY, f64::max);
                (hi - lo).max(0.0)
            }
            Region::Points(pts) => {
                let n = pts.first().map_or(0, Vec::len);
                (0..n)
                    .map(|d| {
                        let lo = pts.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min);
                        let hi = pts.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
                        hi - lo
                    })
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// Bounded stage `k` of the progressive cover. The result carries no schedule;
/// its marks include every exclusion point and its stage neighbours.
pub fn truncation_stage(s: &SupportSet, k: usize) -> Result<SupportSet, StageError> {
    let Some(sched) = &s.schedule else {
        if k > 0 {
            return Err(StageError::OutOfRange { k, stages: 1 });
        }
        if !s.is_bounded() {
            return Err(StageError::Unbounded);
        }
        return Ok(s.clone());
    };
    if k >= sched.stages {
        return Err(StageError::OutOfRange {
            k,
            stages: sched.stages,
        });
    }
    let radius = sched.radius(k);
    let excl = sched.exclusion_radius(k);

    let region = match &s.region {
        Region::Box {
            lower,
            upper,
            lower_open,
            upper_open,
        } => {
            let mut lo = Vec::with_capacity(lower.len());
            let mut hi = Vec::with_capacity(lower.len());
            for d in 0..lower.len() {
                let mut l = lower[d].max(-radius);
                let mut u = upper[d].min(radius);
                if lower_open[d] && lower[d].is_finite() {
                    l = l.max(lower[d] + excl);
                }
                if upper_open[d] && upper[d].is_finite() {
                    u = u.min(upper[d] - excl);
                }
                if l > u {
                    return Err(StageError::Empty(k));
                }
                lo.push(l);
                hi.push(u);
            }
            if lower.len() == 1 && sched.exclusions.iter().any(|e| e.side != Side::None) {
                let base = vec![Interval::closed(lo[0], hi[0])];
                Region::Intervals(excise(base, &sched.exclusions, excl))
            } else {
                let n = lo.len();
                Region::Box {
                    lower: lo,
                    upper: hi,
                    lower_open: vec![false; n],
                    upper_open: vec![false; n],
                }
            }
        }
        Region::Intervals(iv) => {
            let clipped = iv
                .iter()
                .filter_map(|i| {
                    let mut l = i.lo.max(-radius);
                    let mut u = i.hi.min(radius);
                    if i.lo_open && i.lo.is_finite() {
                        l = l.max(i.lo + excl);
                    }
                    if i.hi_open && i.hi.is_finite() {
                        u = u.min(i.hi - excl);
                    }
                    (l <= u).then(|| Interval::closed(l, u))
                })
                .collect();
            Region::Intervals(excise(clipped, &sched.exclusions, excl))
        }
        Region::Points(pts) => Region::Points(
            pts.iter()
                .filter(|p| p.iter().all(|v| v.abs() <= radius))
                .filter(|p| {
                    p.len() != 1
                        || !sched.exclusions.iter().any(|e| {
                            let v = p[0];
                            match e.side {
                                Side::Left => v > e.point - excl && v < e.point,
                                Side::Right => v > e.point && v < e.point + excl,
                                Side::Both => v != e.point && (v - e.point).abs() < excl,
                                Side::None => false,
                            }
                        })
                })
                .cloned()
                .collect(),
        ),
    };

    let empty = match &region {
        Region::Intervals(iv) => iv.is_empty(),
        Region::Points(p) => p.is_empty(),
        Region::Box { .. } => false,
    };
    if empty {
        return Err(StageError::Empty(k));
    }

    let mut stage = SupportSet {
        region,
        schedule: None,
        marks: Vec::new(),
    };
    let mut marks: Vec<Vec<f64>> = s.marks.clone();
    if s.dim() == Some(1) {
        for e in &sched.exclusions {
            marks.push(vec![e.point]);
            marks.push(vec![e.point - excl]);
            marks.push(vec![e.point + excl]);
        }
    }
    marks.retain(|m| stage.contains(m));
    stage.marks = marks;
    Ok(stage)
}

/// Removes the open neighbourhoods of the exclusion points from a sorted list
/// of closed intervals.
fn excise(mut intervals: Vec<Interval>, exclusions: &[Exclusion], radius: f64) -> Vec<Interval> {
    for e in exclusions {
        let (cut_lo, cut_hi, keep_point) = match e.side {
            Side::Left => (e.point - radius, e.point, false),
            Side::Right => (e.point, e.point + radius, false),
            Side::Both => (e.point - radius, e.point + radius, true),
            Side::None => continue,
        };
        let mut next = Vec::with_capacity(intervals.len() + 2);
        for iv in intervals {
            // open cut (cut_lo, cut_hi)
            if iv.hi <= cut_lo || iv.lo >= cut_hi {
                next.push(iv);
                continue;
            }
            if iv.lo <= cut_lo {
                next.push(Interval::closed(iv.lo, cut_lo));
            }
            if keep_point && iv.lo <= e.point && e.point <= iv.hi {
                next.push(Interval::closed(e.point, e.point));
            }
            if iv.hi >= cut_hi {
                next.push(Interval::closed(cut_hi, iv.hi));
            }
        }
        intervals = next;
    }
    intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    intervals
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub f: Expr,
    pub phi: f64,
}

/// One bound computation: support, constraints E[f_i] = φ_i, objective g.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub dim: usize,
    pub support: SupportSet,
    pub constraints: Vec<Constraint>,
    pub objective: Expr,
    pub direction: Direction,
}

impl ProblemSpec {
    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn phi(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.phi).collect()
    }

    pub fn with_direction(&self, direction: Direction) -> Self {
        ProblemSpec {
            direction,
            ..self.clone()
        }
    }

    pub fn with_support(&self, support: SupportSet) -> Self {
        ProblemSpec {
            support,
            ..self.clone()
        }
    }

    /// Γ(x) = (f_1(x), …, f_m(x), g(x)).
    pub fn gamma(&self, x: &[f64]) -> Result<(Vec<f64>, f64), EvalError> {
        let f = self
            .constraints
            .iter()
            .map(|c| c.f.eval(x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((f, self.objective.eval(x)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    NoConstraints,
    DimensionMismatch,
    InvalidBox,
    UnboundedWithoutSchedule,
    IntervalsNotSorted,
    EmptySupport,
    DuplicatePoints,
    InvalidSchedule,
    ExclusionNeedsOneDimension,
    NonFinitePhi,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
}

fn diag(code: DiagnosticCode, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        code,
        message: message.into(),
    }
}

/// Structural checks; empty output means the problem is well formed.
pub fn validate_problem(p: &ProblemSpec) -> Vec<Diagnostic> {
    use DiagnosticCode::*;
    let mut out = Vec::new();
    if p.constraints.is_empty() {
        out.push(diag(NoConstraints, "at least one constraint is required"));
    }
    for (i, c) in p.constraints.iter().enumerate() {
        if c.f.arity() > p.dim {
            out.push(diag(
                DimensionMismatch,
                format!("constraint {} references x{} but dim = {}", i + 1, c.f.arity(), p.dim),
            ));
        }
        if !c.phi.is_finite() {
            out.push(diag(NonFinitePhi, format!("phi of constraint {} is not finite", i + 1)));
        }
    }
    if p.objective.arity() > p.dim {
        out.push(diag(
            DimensionMismatch,
            format!("objective references x{} but dim = {}", p.objective.arity(), p.dim),
        ));
    }

    let s = &p.support;
    let has_schedule = s.schedule.is_some();
    match &s.region {
        Region::Box {
            lower,
            upper,
            lower_open,
            upper_open,
        } => {
            if lower.len() != p.dim
                || upper.len() != p.dim
                || lower_open.len() != p.dim
                || upper_open.len() != p.dim
            {
                out.push(diag(DimensionMismatch, "box dimension differs from dim"));
            }
            for (d, (l, u)) in lower.iter().zip(upper).enumerate() {
                if l.is_nan() || u.is_nan() || l > u {
                    out.push(diag(InvalidBox, format!("coordinate {}: lower > upper", d + 1)));
                }
            }
            if !s.is_bounded() && !has_schedule {
                out.push(diag(UnboundedWithoutSchedule, "infinite box side needs a schedule"));
            }
        }
        Region::Intervals(iv) => {
            if p.dim != 1 {
                out.push(diag(DimensionMismatch, "interval unions are one-dimensional"));
            }
            if iv.is_empty() {
                out.push(diag(EmptySupport, "no intervals"));
            }
            for i in iv {
                if i.lo.is_nan() || i.hi.is_nan() || i.lo > i.hi {
                    out.push(diag(InvalidBox, format!("interval [{}, {}]", i.lo, i.hi)));
                }
            }
            if iv.windows(2).any(|w| w[0].hi >= w[1].lo) {
                out.push(diag(IntervalsNotSorted, "intervals must be sorted and disjoint"));
            }
            if !s.is_bounded() && !has_schedule {
                out.push(diag(UnboundedWithoutSchedule, "infinite interval needs a schedule"));
            }
        }
        Region::Points(pts) => {
            if pts.is_empty() {
                out.push(diag(EmptySupport, "no points"));
            }
            if pts.iter().any(|q| q.len() != p.dim) {
                out.push(diag(DimensionMismatch, "point dimension differs from dim"));
            }
            let mut sorted: Vec<&Vec<f64>> = pts.iter().collect();
            sorted.sort_by(|a, b| lex_cmp(a, b));
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                out.push(diag(DuplicatePoints, "points must be distinct"));
            }
        }
    }
    if let Some(sched) = &s.schedule {
        if !(sched.r0 > 0.0) || !(sched.growth > 1.0) || sched.stages == 0 {
            out.push(diag(InvalidSchedule, "need r0 > 0, growth > 1, stages >= 1"));
        }
        if p.dim != 1 && sched.exclusions.iter().any(|e| e.side != Side::None) {
            out.push(diag(ExclusionNeedsOneDimension, "exclusions are supported for n = 1"));
        }
    }
    out
}

pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Finitely supported probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("atoms and weights have different lengths")]
    Length,
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("weights sum to {0}")]
    Mass(f64),
    #[error("duplicate atom {0:?}")]
    DuplicateAtom(Vec<f64>),
    #[error("atom {0:?} is outside the support")]
    OutsideSupport(Vec<f64>),
}

impl DiscreteMeasure {
    pub fn point_mass(x: Vec<f64>) -> Self {
        DiscreteMeasure {
            atoms: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn validate(&self, support: Option<&SupportSet>) -> Result<(), MeasureError> {
        if self.atoms.len() != self.weights.len() {
            return Err(MeasureError::Length);
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(MeasureError::NegativeWeight(*w));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(MeasureError::Mass(total));
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if self.atoms[..i].iter().any(|b| b == a) {
                return Err(MeasureError::DuplicateAtom(a.clone()));
            }
            if let Some(s) = support {
                if !s.contains(a) {
                    return Err(MeasureError::OutsideSupport(a.clone()));
                }
            }
        }
        Ok(())
    }
}

/// Σ w_i e(x_i).
pub fn measure_expectation(mu: &DiscreteMeasure, e: &Expr) -> Result<f64, EvalError> {
    mu.atoms
        .iter()
        .zip(&mu.weights)
        .map(|(x, w)| e.eval(x).map(|v| w * v))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn markov(lambda: f64, a: f64) -> ProblemSpec {
        ProblemSpec {
            dim: 1,
            support: SupportSet::intervals(vec![Interval {
                lo: 0.0,
                hi: f64::INFINITY,
                lo_open: false,
                hi_open: true,
            }])
            .with_schedule(TruncationSchedule {
                r0: 1.0,
                growth: 2.0,
                stages: 10,
                exclusions: vec![Exclusion {
                    point: a,
                    side: Side::Right,
                }],
            }),
            constraints: vec![Constraint {
                f: parse_expr("x1", 1).unwrap(),
                phi: lambda,
            }],
            objective: parse_expr(&format!("step({a} - x1)"), 1).unwrap(),
            direction: Direction::Lower,
        }
    }

    #[test]
    fn validate_markov_is_clean() {
        assert!(validate_problem(&markov(1.0, 2.0)).is_empty());
    }

    #[test]
    fn validate_reports_codes() {
        let mut p = markov(1.0, 2.0);
        p.support = SupportSet::boxed(vec![1.0], vec![0.0]);
        let codes: Vec<_> = validate_problem(&p).into_iter().map(|d| d.code).collect();
        assert_eq!(codes, vec![DiagnosticCode::InvalidBox]);

        let mut p = markov(1.0, 2.0);
        p.constraints[0].f = parse_expr("x2", 2).unwrap();
        let codes: Vec<_> = validate_problem(&p).into_iter().map(|d| d.code).collect();
        assert_eq!(codes, vec![DiagnosticCode::DimensionMismatch]);

        let mut p = markov(1.0, 2.0);
        p.support.schedule = None;
        let codes: Vec<_> = validate_problem(&p).into_iter().map(|d| d.code).collect();
        assert_eq!(codes, vec![DiagnosticCode::UnboundedWithoutSchedule]);

        let mut p = markov(1.0, 2.0);
        p.support = SupportSet::points(vec![vec![0.0], vec![0.0]]);
        let codes: Vec<_> = validate_problem(&p).into_iter().map(|d| d.code).collect();
        assert_eq!(codes, vec![DiagnosticCode::DuplicatePoints]);

        let mut p = markov(1.0, 2.0);
        p.constraints.clear();
        let codes: Vec<_> = validate_problem(&p).into_iter().map(|d| d.code).collect();
        assert_eq!(codes, vec![DiagnosticCode::NoConstraints]);
    }

    #[test]
    fn expectation_two_variable_witness() {
        let mu = DiscreteMeasure {
            atoms: vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, 1.0]],
            weights: vec![0.25, 0.25, 0.5],
        };
        let g = parse_expr("exp(x1)+exp(x2)", 2).unwrap();
        let v = measure_expectation(&mu, &g).unwrap();
        assert!((v - (5.0 * E / 4.0 + 3.0 / (4.0 * E))).abs() < 1e-14);
    }

    #[test]
    fn expectation_point_mass_and_two_atom() {
        let x = parse_expr("x1", 1).unwrap();
        assert_eq!(
            measure_expectation(&DiscreteMeasure::point_mass(vec![0.7]), &x).unwrap(),
            0.7
        );
        let (l, s2) = (0.8_f64, 0.3_f64);
        let mu = DiscreteMeasure {
            atoms: vec![vec![0.0], vec![l + s2 / l]],
            weights: vec![s2 / (s2 + l * l), l * l / (s2 + l * l)],
        };
        assert!((measure_expectation(&mu, &x).unwrap() - l).abs() < 1e-15);
    }

    #[test]
    fn stage_ball_intersection() {
        let s = SupportSet::intervals(vec![Interval {
            lo: 0.0,
            hi: f64::INFINITY,
            lo_open: false,
            hi_open: true,
        }])
        .with_schedule(TruncationSchedule {
            r0: 2.0,
            growth: 2.0,
            stages: 4,
            exclusions: vec![],
        });
        let st = truncation_stage(&s, 1).unwrap();
        assert_eq!(st.region, Region::Intervals(vec![Interval::closed(0.0, 4.0)]));
        assert_eq!(
            truncation_stage(&s, 4),
            Err(StageError::OutOfRange { k: 4, stages: 4 })
        );
    }

    #[test]
    fn stage_with_right_exclusion() {
        let p = markov(1.0, 2.0);
        for k in 2..10 {
            let n = 2f64.powi(k as i32);
            let st = truncation_stage(&p.support, k).unwrap();
            assert_eq!(
                st.region,
                Region::Intervals(vec![
                    Interval::closed(0.0, 2.0),
                    Interval::closed(2.0 + 1.0 / n, n)
                ])
            );
            assert!(st.marks.contains(&vec![2.0]));
        }
    }

    #[test]
    fn compact_support_unchanged() {
        let s = SupportSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]);
        assert_eq!(truncation_stage(&s, 0).unwrap(), s);
        assert_eq!(
            truncation_stage(&s, 1),
            Err(StageError::OutOfRange { k: 1, stages: 1 })
        );
        let s = s.with_schedule(TruncationSchedule {
            r0: 4.0,
            growth: 2.0,
            stages: 3,
            exclusions: vec![],
        });
        for k in 0..3 {
            assert_eq!(
                truncation_stage(&s, k).unwrap().region,
                SupportSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).region
            );
        }
    }

    #[test]
    fn open_finite_endpoint_shrinks() {
        let s = SupportSet {
            region: Region::Box {
                lower: vec![0.0],
                upper: vec![f64::INFINITY],
                lower_open: vec![true],
                upper_open: vec![true],
            },
            schedule: Some(TruncationSchedule {
                r0: 1.0,
                growth: 2.0,
                stages: 5,
                exclusions: vec![],
            }),
            marks: vec![],
        };
        let st = truncation_stage(&s, 3).unwrap();
        assert_eq!(
            st.region,
            Region::Box {
                lower: vec![0.125],
                upper: vec![8.0],
                lower_open: vec![false],
                upper_open: vec![false]
            }
        );
    }

    #[test]
    fn measure_validation() {
        let s = SupportSet::interval(0.0, 1.0);
        let ok = DiscreteMeasure {
            atoms: vec![vec![0.0], vec![1.0]],
            weights: vec![0.3, 0.7],
        };
        assert!(ok.validate(Some(&s)).is_ok());
        let bad = DiscreteMeasure {
            atoms: vec![vec![0.0], vec![1.5]],
            weights: vec![0.3, 0.7],
        };
        assert!(matches!(bad.validate(Some(&s)), Err(MeasureError::OutsideSupport(_))));
        let bad = DiscreteMeasure {
            atoms: vec![vec![0.0], vec![1.0]],
            weights: vec![0.3, 0.6],
        };
        assert!(matches!(bad.validate(None), Err(MeasureError::Mass(_))));
        let bad = DiscreteMeasure {
            atoms: vec![vec![0.0], vec![0.0]],
            weights: vec![0.5, 0.5],
        };
        assert!(matches!(bad.validate(None), Err(MeasureError::DuplicateAtom(_))));
    }

    proptest! {
        #[test]
        fn stages_are_nested(r0 in 0.1f64..3.0, growth in 1.1f64..3.0, a in 0.0f64..5.0,
                             xs in prop::collection::vec(-50.0f64..50.0, 200)) {
            let s = SupportSet::intervals(vec![Interval { lo: 0.0, hi: f64::INFINITY, lo_open: false, hi_open: true }])
                .with_schedule(TruncationSchedule { r0, growth, stages: 6,
                    exclusions: vec![Exclusion { point: a, side: Side::Right }, Exclusion { point: a + 1.0, side: Side::Both }] });
            for k in 0..5 {
                let (Ok(cur), Ok(next)) = (truncation_stage(&s, k), truncation_stage(&s, k + 1)) else { continue };
                for x in &xs {
                    if cur.contains(&[*x]) {
                        prop_assert!(next.contains(&[*x]), "x={} in stage {} but not {}", x, k, k + 1);
                        prop_assert!(s.contains(&[*x]));
                    }
                }
            }
        }

        #[test]
        fn expectation_is_linear_in_measure(t in 0.0f64..1.0,
            a in prop::collection::vec(-2.0f64..2.0, 3), b in prop::collection::vec(-2.0f64..2.0, 2)) {
            let g = parse_expr("exp(x1) - x1^3 + step(x1)", 1).unwrap();
            let mu = DiscreteMeasure { atoms: a.iter().map(|v| vec![*v]).collect(), weights: vec![0.2, 0.5, 0.3] };
            let nu = DiscreteMeasure { atoms: b.iter().map(|v| vec![*v]).collect(), weights: vec![0.6, 0.4] };
            let mix = DiscreteMeasure {
                atoms: mu.atoms.iter().chain(&nu.atoms).cloned().collect(),
                weights: mu.weights.iter().map(|w| t * w).chain(nu.weights.iter().map(|w| (1.0 - t) * w)).collect(),
            };
            let lhs = measure_expectation(&mix, &g).unwrap();
            let rhs = t * measure_expectation(&mu, &g).unwrap() + (1.0 - t) * measure_expectation(&nu, &g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
