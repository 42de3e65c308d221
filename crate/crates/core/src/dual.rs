//! Outer convex minimisation over the multipliers α.
//!
//! For `s = ±1` let `F_s(α) = sup_x s·(g(x) + ⟨α, f(x) − φ⟩)`. The upper bound
//! is `min F₊` and the lower bound is `−min F₋`. Each stage of the support is
//! solved with Kelley cutting planes: every evaluated point `x` contributes
//! the affine minorant `s·g(x) + ⟨s·(f(x) − φ), α⟩`, and the piecewise-affine
//! model is minimised over a trust box `[−R, R]ᵐ` through its small LP dual.
//! Cuts remain valid on later stages because stages are nested.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extended;
use crate::inner::{subgradient_from, InnerError, InnerOptions, InnerResult, InnerSolver};
use crate::oracle::{lp_bound_image, GridImage};
use crate::problem::{
    truncation_stage, validate_problem, Diagnostic, Direction, DiscreteMeasure, ProblemSpec, StageError,
};
use crate::recovery::{match_moments, verify_certificate, CertificateCheck, MERGE_RADIUS};
use crate::simplex::{self, LpError, SimplexOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualError {
    #[error("invalid problem: {}", .0.iter().map(|d| d.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("feasibility grid has {points} points, need at least {needed}")]
    GridTooSmall { points: usize, needed: usize },
    #[error(transparent)]
    Inner(#[from] InnerError),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error("feasibility program failed: {0}")]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Feasible { margin: f64 },
    /// `⟨alpha, f(x) − φ⟩ > epsilon` on every grid point.
    Infeasible { alpha: Vec<f64>, epsilon: f64 },
    Boundary { margin: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    #[serde(flatten)]
    pub status: FeasibilityStatus,
    /// ℓ1 distance from φ to the hull of the grid image.
    pub distance: f64,
    pub grid_points: usize,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, FeasibilityStatus::Feasible { .. })
    }
}

pub fn boundary_tol(phi: &[f64]) -> f64 {
    1e-6 * (1.0 + phi.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Classifies φ against the hull of `f` over the problem's last stage.
pub fn check_feasibility(p: &ProblemSpec, grid_res: usize) -> Result<FeasibilityReport, DualError> {
    let stage = truncation_stage(&p.support, p.support.stage_count() - 1)?;
    let opts = InnerOptions {
        grid_res,
        ..InnerOptions::default()
    };
    let solver = InnerSolver::new(p, stage, &[], opts)?;
    feasibility_on_image(solver.image(), &p.phi())
}

/// Feasibility of φ with respect to the points of `image`.
///
/// First the ℓ1 distance from φ to the hull is minimised; its LP duals give the
/// separating direction when the distance is positive. Otherwise the margin is
/// the smallest step from φ to the hull boundary along the coordinate axes.
pub fn feasibility_on_image(image: &GridImage, phi: &[f64]) -> Result<FeasibilityReport, DualError> {
    let m = phi.len();
    let n = image.len();
    if n < m + 2 {
        return Err(DualError::GridTooSmall { points: n, needed: m + 2 });
    }
    let tol = boundary_tol(phi);
    let opts = SimplexOptions::default();

    // min Σ(u + v)  s.t.  Σp = 1,  Σ p f + u − v = φ
    let mut a = vec![vec![0.0; n + 2 * m]; m + 1];
    a[0][..n].fill(1.0);
    for j in 0..m {
        for i in 0..n {
            a[j + 1][i] = image.f[i][j];
        }
        a[j + 1][n + j] = 1.0;
        a[j + 1][n + m + j] = -1.0;
    }
    let mut b = vec![1.0];
    b.extend_from_slice(phi);
    let mut c = vec![0.0; n];
    c.extend(std::iter::repeat_n(1.0, 2 * m));
    let dist = simplex::solve(&a, &b, &c, &opts)?;
    let distance = dist.objective.max(0.0);
    if distance > tol {
        let alpha: Vec<f64> = dist.duals[1..].iter().map(|y| -y).collect();
        let sep = image
            .f
            .iter()
            .map(|f| alpha.iter().zip(f.iter().zip(phi)).map(|(a, (fi, p))| a * (fi - p)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        return Ok(FeasibilityReport {
            status: FeasibilityStatus::Infeasible {
                alpha,
                epsilon: 0.5 * sep,
            },
            distance,
            grid_points: n,
        });
    }

    // max t  s.t.  Σp = 1,  Σ p f − t d = φ  for d = ±e_j
    let mut margin = f64::INFINITY;
    for j in 0..m {
        for sign in [1.0, -1.0] {
            let mut a = vec![vec![0.0; n + 1]; m + 1];
            a[0][..n].fill(1.0);
            for r in 0..m {
                for i in 0..n {
                    a[r + 1][i] = image.f[i][r];
                }
            }
            a[j + 1][n] = -sign;
            let mut c = vec![0.0; n + 1];
            c[n] = -1.0;
            let t = match simplex::solve(&a, &b, &c, &opts) {
                Ok(sol) => sol.x[n],
                Err(LpError::Infeasible { .. }) => 0.0,
                Err(LpError::Unbounded) => f64::INFINITY,
                Err(e) => return Err(e.into()),
            };
            margin = margin.min(t);
        }
    }
    let status = if margin < tol {
        FeasibilityStatus::Boundary { margin }
    } else {
        FeasibilityStatus::Feasible { margin }
    };
    Ok(FeasibilityReport {
        status,
        distance,
        grid_points: n,
    })
}

/// Supporting hyperplane `g(x) + ⟨α, f(x)⟩ + c = 0` (β normalised to 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub alpha: Vec<f64>,
    pub bound: f64,
    pub direction: Direction,
    pub active_points: Vec<Vec<f64>>,
    pub stage: usize,
    pub inner_tol: f64,
    /// `−⟨α, φ⟩ − bound`.
    pub c: f64,
}

impl DualCertificate {
    pub fn new(
        alpha: Vec<f64>,
        bound: f64,
        direction: Direction,
        phi: &[f64],
        active_points: Vec<Vec<f64>>,
        stage: usize,
        inner_tol: f64,
    ) -> Self {
        let c = -alpha.iter().zip(phi).map(|(a, p)| a * p).sum::<f64>() - bound;
        DualCertificate {
            alpha,
            bound,
            direction,
            active_points,
            stage,
            inner_tol,
            c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StagePolicy {
    /// Stop once two successive feasible stages agree within the gap tolerance.
    #[default]
    UntilStable,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Inner evaluations per stage.
    pub outer_iters: usize,
    pub inner: InnerOptions,
    pub stage_policy: StagePolicy,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    /// Initial half width of the trust box.
    pub trust_radius: f64,
    pub divergence_threshold: f64,
    /// Compare against the LP over the final stage's evaluated points.
    pub oracle_check: bool,
    pub recover_measure: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            outer_iters: 400,
            inner: InnerOptions::default(),
            stage_policy: StagePolicy::UntilStable,
            tol_gap_abs: 1e-7,
            tol_gap_rel: 1e-9,
            trust_radius: 10.0,
            divergence_threshold: 1e12,
            oracle_check: true,
            recover_measure: true,
        }
    }
}

impl SolverParams {
    pub fn tol_gap(&self, value: f64) -> f64 {
        self.tol_gap_abs + self.tol_gap_rel * value.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Converged,
    NonConvergence,
    Infeasible,
    BoundaryPhi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub stage: usize,
    pub alpha: Vec<f64>,
    /// `F±(α)` on the stage.
    #[serde(with = "extended")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    #[serde(with = "extended::option")]
    pub radius: Option<f64>,
    pub feasibility: FeasibilityReport,
    #[serde(with = "extended::option")]
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSource {
    /// Non-negative least squares on the maximisers at α*.
    ActiveSet,
    /// Optimal basic measure of the LP over the final stage's evaluated points.
    OracleLp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub direction: Direction,
    pub status: BoundStatus,
    /// `None` when the problem is refused (infeasible or φ on the boundary).
    #[serde(with = "extended::option")]
    pub bound: Option<f64>,
    /// Stage bounds grew past the divergence threshold or kept accelerating.
    pub diverged: bool,
    pub certificate: Option<DualCertificate>,
    pub measure: Option<DiscreteMeasure>,
    pub measure_source: Option<MeasureSource>,
    /// Why moment matching on the active set failed, if it did.
    pub measure_error: Option<String>,
    pub check: Option<CertificateCheck>,
    pub oracle_value: Option<f64>,
    pub oracle_gap: Option<f64>,
    /// Kelley gap of the final stage.
    pub gap: Option<f64>,
    pub feasibility: FeasibilityReport,
    pub stages: Vec<StageRecord>,
    pub history: Vec<HistoryEntry>,
    pub evaluations: usize,
}

/// Points evaluated so far, each one an affine minorant of `F_s`.
#[derive(Debug, Default)]
struct CutSet {
    x: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    g: Vec<f64>,
    seen: HashSet<Vec<u64>>,
}

impl CutSet {
    fn add(&mut self, x: &[f64], f: &[f64], g: f64) {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if self.seen.insert(key) {
            self.x.push(x.to_vec());
            self.f.push(f.to_vec());
            self.g.push(g);
        }
    }

    fn add_result(&mut self, p: &ProblemSpec, res: &InnerResult) {
        let mut pts: Vec<&Vec<f64>> = Vec::new();
        if let Some(first) = res.maximizers.first() {
            pts.push(first);
        }
        if let Some(last) = res.maximizers.last() {
            pts.push(last);
        }
        for x in pts {
            if let Ok((f, g)) = p.gamma(x) {
                self.add(x, &f, g);
            }
        }
        for c in &res.local_maxima {
            self.add(&c.x, &c.f, c.g);
        }
    }

    /// Model value `max_p s·(g_p + ⟨α, f_p − φ⟩)`.
    fn model(&self, alpha: &[f64], phi: &[f64], s: f64) -> f64 {
        (0..self.x.len())
            .map(|i| s * (self.g[i] + dot_shift(alpha, &self.f[i], phi)))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn dot_shift(alpha: &[f64], f: &[f64], phi: &[f64]) -> f64 {
    alpha.iter().zip(f.iter().zip(phi)).map(|(a, (fi, p))| a * (fi - p)).sum()
}

struct Master {
    alpha: Vec<f64>,
    lower: f64,
    binding: bool,
}

/// Minimises the cut model over `[−R, R]ᵐ` via its dual:
/// `max Σ w_p a_p − R Σ(u + v)` s.t. `Σ w = 1`, `Σ w_p b_p + u − v = 0`.
/// The row duals are `(−model_min, α)`.
fn solve_master(cuts: &CutSet, phi: &[f64], s: f64, radius: f64) -> Option<Master> {
    let n = cuts.x.len();
    let m = phi.len();
    let mut a = vec![vec![0.0; n + 2 * m]; m + 1];
    a[0][..n].fill(1.0);
    for j in 0..m {
        for i in 0..n {
            a[j + 1][i] = s * (cuts.f[i][j] - phi[j]);
        }
        a[j + 1][n + j] = 1.0;
        a[j + 1][n + m + j] = -1.0;
    }
    let mut b = vec![0.0; m + 1];
    b[0] = 1.0;
    let mut c: Vec<f64> = cuts.g.iter().map(|g| -s * g).collect();
    c.extend(std::iter::repeat_n(radius, 2 * m));
    let sol = simplex::solve(&a, &b, &c, &SimplexOptions::default()).ok()?;
    let alpha: Vec<f64> = sol.duals[1..].iter().map(|y| y.clamp(-radius, radius)).collect();
    let binding = alpha.iter().any(|v| v.abs() >= radius * (1.0 - 1e-9))
        || sol.x[n..].iter().any(|v| *v > 1e-12);
    let lower = (-sol.objective).min(cuts.model(&alpha, phi, s));
    lower.is_finite().then_some(Master { alpha, lower, binding })
}

struct StageSolve {
    alpha: Vec<f64>,
    value: f64,
    gap: f64,
    iterations: usize,
    converged: bool,
    at_best: InnerResult,
}

const MAX_RADIUS: f64 = 1e10;
const STALL_LIMIT: usize = 8;

struct Kelley<'a> {
    p: &'a ProblemSpec,
    phi: Vec<f64>,
    direction: Direction,
    params: &'a SolverParams,
    cuts: CutSet,
    radius: f64,
    history: Vec<HistoryEntry>,
    evaluations: usize,
}

impl Kelley<'_> {
    fn eval(&mut self, solver: &InnerSolver, alpha: &[f64], stage: usize) -> InnerResult {
        let res = solver.evaluate(alpha, self.direction);
        self.evaluations += res.evaluations;
        self.cuts.add_result(self.p, &res);
        self.history.push(HistoryEntry {
            stage,
            alpha: alpha.to_vec(),
            value: res.value,
        });
        res
    }

    /// Rounding noise of the cutting-plane model near its top: the terms of a
    /// cut can be far larger than their sum on wide stages.
    fn cancellation(&self, alpha: &[f64], value: f64) -> f64 {
        let s = self.direction.sign();
        let band = 1e-3 * (1.0 + value.abs());
        let mut worst: f64 = 0.0;
        for (f, g) in self.cuts.f.iter().zip(&self.cuts.g) {
            let mut lin = 0.0;
            let mut terms = g.abs();
            for ((a, fi), p) in alpha.iter().zip(f).zip(&self.phi) {
                lin += a * (fi - p);
                terms += (a * fi).abs() + (a * p).abs();
            }
            if s * (g + lin) >= value - band {
                worst = worst.max(terms);
            }
        }
        1e-14 * worst
    }

    fn solve_stage(&mut self, solver: &InnerSolver, start: &[f64], stage: usize) -> StageSolve {
        let s = self.direction.sign();
        let mut best_alpha = start.to_vec();
        let mut best = self.eval(solver, start, stage);
        let mut lower = f64::NEG_INFINITY;
        let mut stall = 0;
        let mut iterations = 1;
        let mut converged = false;
        while iterations < self.params.outer_iters {
            let tol = self.params.tol_gap(best.value) + self.cancellation(&best_alpha, best.value);
            let master = solve_master(&self.cuts, &self.phi, s, self.radius);
            let mut candidate = None;
            if let Some(mm) = master {
                if mm.binding {
                    if self.radius < MAX_RADIUS {
                        self.radius *= 2.0;
                    }
                } else {
                    lower = lower.max(mm.lower);
                    if best.value - lower <= tol {
                        converged = true;
                        break;
                    }
                }
                candidate = Some(mm.alpha);
            }
            if candidate.is_none() || stall >= STALL_LIMIT {
                let sg = subgradient_from(&best, self.direction);
                let norm2: f64 = sg.iter().map(|v| v * v).sum();
                if norm2 == 0.0 {
                    // 0 ∈ ∂F at the best point
                    converged = true;
                    break;
                }
                let target = if lower.is_finite() {
                    lower
                } else {
                    best.value - 0.1 * (1.0 + best.value.abs())
                };
                let step = (best.value - target) / norm2;
                candidate = Some(best_alpha.iter().zip(&sg).map(|(a, g)| a - step * g).collect());
                stall = 0;
            }
            let alpha = candidate.expect("candidate chosen above");
            let res = self.eval(solver, &alpha, stage);
            iterations += 1;
            if res.value < best.value - 1e-3 * tol {
                best = res;
                best_alpha = alpha;
                stall = 0;
            } else {
                stall += 1;
            }
        }
        StageSolve {
            gap: (best.value - lower).max(0.0),
            alpha: best_alpha,
            value: best.value,
            iterations,
            converged,
            at_best: best,
        }
    }
}

/// Kelley/trust-box solve of the dual over the truncation schedule.
pub fn solve_dual(p: &ProblemSpec, params: &SolverParams) -> Result<BoundResult, DualError> {
    let diags = validate_problem(p);
    if !diags.is_empty() {
        return Err(DualError::Invalid(diags));
    }
    let s = p.direction.sign();
    let m = p.m();
    let mut kelley = Kelley {
        p,
        phi: p.phi(),
        direction: p.direction,
        params,
        cuts: CutSet::default(),
        radius: params.trust_radius,
        history: Vec::new(),
        evaluations: 0,
    };
    let mut alpha = vec![0.0; m];
    let mut carried: Vec<Vec<f64>> = Vec::new();
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut bounds: Vec<f64> = Vec::new();
    let mut last: Option<(InnerSolver, StageSolve, usize)> = None;
    let mut last_feasibility = None;
    let mut diverged = false;
    let mut stable = false;

    for k in 0..p.support.stage_count() {
        let stage = match truncation_stage(&p.support, k) {
            Ok(st) => st,
            Err(StageError::Empty(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        let solver = InnerSolver::new(p, stage, &carried, params.inner)?;
        carried = solver.image().points.clone();
        let radius = p.support.schedule.as_ref().map(|sch| sch.radius(k));
        let feas = match feasibility_on_image(solver.image(), &kelley.phi) {
            Ok(f) => f,
            Err(DualError::GridTooSmall { .. }) if k + 1 < p.support.stage_count() => continue,
            Err(e) => return Err(e),
        };
        let feasible = feas.is_feasible();
        last_feasibility = Some(feas.clone());
        if !feasible {
            stages.push(StageRecord {
                stage: k,
                radius,
                feasibility: feas,
                bound: None,
                gap: None,
                iterations: 0,
                converged: false,
            });
            last = None;
            continue;
        }
        let solved = kelley.solve_stage(&solver, &alpha, k);
        alpha = solved.alpha.clone();
        carried.extend(kelley.cuts.x.iter().cloned());
        let bound = s * solved.value;
        stages.push(StageRecord {
            stage: k,
            radius,
            feasibility: feas,
            bound: Some(bound),
            gap: Some(solved.gap),
            iterations: solved.iterations,
            converged: solved.converged,
        });
        // unconverged stages are too noisy for the stability and trend tests
        if solved.converged {
            bounds.push(bound);
        }
        last = Some((solver, solved, k));

        if bound.abs() > params.divergence_threshold {
            diverged = true;
            break;
        }
        if params.stage_policy == StagePolicy::UntilStable && bounds.len() >= 2 && last_converged(&stages) {
            let prev = bounds[bounds.len() - 2];
            if (bound - prev).abs() <= params.tol_gap(bound) {
                stable = true;
                break;
            }
        }
    }
    if !diverged && !stable && accelerating(&bounds, s, params) {
        diverged = true;
    }

    let feasibility = last_feasibility.ok_or(DualError::GridTooSmall {
        points: 0,
        needed: m + 2,
    })?;
    let history = std::mem::take(&mut kelley.history);
    let mut result = BoundResult {
        direction: p.direction,
        status: BoundStatus::Converged,
        bound: None,
        diverged,
        certificate: None,
        measure: None,
        measure_source: None,
        measure_error: None,
        check: None,
        oracle_value: None,
        oracle_gap: None,
        gap: None,
        feasibility: feasibility.clone(),
        stages,
        history,
        evaluations: kelley.evaluations,
    };
    let Some((solver, solved, k)) = last else {
        result.status = match feasibility.status {
            FeasibilityStatus::Infeasible { .. } => BoundStatus::Infeasible,
            _ => BoundStatus::BoundaryPhi,
        };
        return Ok(result);
    };
    if diverged {
        result.bound = Some(s * f64::INFINITY);
        return Ok(result);
    }
    let bound = s * solved.value;
    result.bound = Some(bound);
    result.gap = Some(solved.gap);
    if !solved.converged {
        result.status = BoundStatus::NonConvergence;
    }

    let rel_tol = params.inner.tol_active.max(2.0 * solved.gap / (1.0 + solved.value.abs()));
    let active = solver.evaluate_with_tol(&solved.alpha, p.direction, rel_tol);
    let inner_tol = rel_tol * (1.0 + solved.value.abs());
    let mut active_points = active.maximizers.clone();
    for c in &solved.at_best.local_maxima {
        let v = s * (c.g + dot_shift(&solved.alpha, &c.f, &kelley.phi));
        if v >= solved.value - inner_tol {
            active_points.push(c.x.clone());
        }
    }
    let active_points = merge_close(p, &solved.alpha, active_points, MERGE_RADIUS * solver.stage().diameter());
    let cert = DualCertificate::new(
        solved.alpha.clone(),
        bound,
        p.direction,
        &kelley.phi,
        active_points,
        k,
        inner_tol,
    );

    let oracle = if params.oracle_check || params.recover_measure {
        let mut image = solver.image().clone();
        for (i, x) in kelley.cuts.x.iter().enumerate() {
            if solver.stage().contains(x) {
                image.points.push(x.clone());
                image.f.push(kelley.cuts.f[i].clone());
                image.g.push(kelley.cuts.g[i]);
            }
        }
        lp_bound_image(&image, &kelley.phi, p.direction).ok()
    } else {
        None
    };
    if params.oracle_check {
        if let Some(sol) = &oracle {
            result.oracle_value = Some(sol.value);
            result.oracle_gap = Some((sol.value - bound).abs());
        }
    }
    if params.recover_measure {
        let recovered = match match_moments(&cert.active_points, p) {
            Ok(mu) => Some((mu, MeasureSource::ActiveSet)),
            Err(e) => {
                result.measure_error = Some(e.to_string());
                oracle.map(|sol| (sol.measure, MeasureSource::OracleLp))
            }
        };
        if let Some((mu, source)) = recovered {
            result.check = verify_certificate(p, &cert, &mu).ok();
            result.measure = Some(mu);
            result.measure_source = Some(source);
        }
    }
    result.certificate = Some(cert);
    Ok(result)
}

fn last_converged(stages: &[StageRecord]) -> bool {
    stages.last().is_some_and(|r| r.converged)
}

/// The last three stage increments all move outward and none of them shrinks.
fn accelerating(bounds: &[f64], s: f64, params: &SolverParams) -> bool {
    if bounds.len() < 4 {
        return false;
    }
    let d: Vec<f64> = bounds.windows(2).rev().take(3).map(|w| s * (w[1] - w[0])).collect();
    let floor = params.tol_gap(*bounds.last().unwrap()).max(1e-6);
    d.iter().all(|v| *v > floor) && d[0] >= d[1] && d[1] >= d[2]
}

/// Drops points within `radius` of a better-valued one; output is lex sorted.
fn merge_close(p: &ProblemSpec, alpha: &[f64], pts: Vec<Vec<f64>>, radius: f64) -> Vec<Vec<f64>> {
    let phi = p.phi();
    let s = p.direction.sign();
    let mut scored: Vec<(Vec<f64>, f64)> = pts
        .into_iter()
        .filter_map(|x| {
            let (f, g) = p.gamma(&x).ok()?;
            let v = s * (g + dot_shift(alpha, &f, &phi));
            Some((x, v))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(crate::problem::lex_cmp(&a.0, &b.0)));
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for (x, _) in scored {
        let near = kept.iter().any(|k| {
            k.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= radius
        });
        if !near {
            kept.push(x);
        }
    }
    kept.sort_by(|a, b| crate::problem::lex_cmp(a, b));
    kept
}

/// `F₊(α)` (upper) or `−F₋(α)` (lower) on the problem's last stage: valid for
/// every feasible measure on that stage.
pub fn loose_bound(p: &ProblemSpec, alpha: &[f64], opts: InnerOptions) -> Result<f64, DualError> {
    let stage = truncation_stage(&p.support, p.support.stage_count() - 1)?;
    let res = InnerSolver::new(p, stage, &[], opts)?.evaluate(alpha, p.direction);
    Ok(p.direction.sign() * res.value)
}
