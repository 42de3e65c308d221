//! Inner maximisation of `±G(x; α) = ±(g(x) + ⟨α, f(x) − φ⟩)` over a bounded
//! stage of the support.
//!
//! The stage is sampled on a regular grid (nested for dyadic resolutions
//! `2^j + 1`), Γ is evaluated once per grid point, and each call to
//! [`InnerSolver::evaluate`] scans the cached image and then polishes the best
//! few local maxima with coordinate-wise golden-section search inside their
//! grid cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::GridImage;
use crate::problem::{lex_cmp, truncation_stage, Direction, ProblemSpec, Region, StageError, SupportSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerOptions {
    /// Grid points per coordinate (per interval for interval unions).
    pub grid_res: usize,
    pub refine_iters: usize,
    pub refine_candidates: usize,
    /// Relative active-set tolerance: points within `tol · (1 + |value|)` of the
    /// maximum count as maximisers.
    pub tol_active: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            grid_res: 129,
            refine_iters: 3,
            refine_candidates: 8,
            tol_active: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InnerError {
    #[error("grid resolution must be at least 2")]
    GridTooSmall,
    #[error("no grid point could be evaluated ({0} skipped)")]
    NothingEvaluable(usize),
    #[error(transparent)]
    Stage(#[from] StageError),
}

/// A point of S with its image under Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePoint {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    /// `F±(α) = sup_x ±G(x; α)` over the sampled and refined points.
    pub value: f64,
    /// Every point within the active tolerance of `value`, lexicographically sorted.
    pub maximizers: Vec<Vec<f64>>,
    /// `f(x) − φ` at each maximiser.
    pub f_image: Vec<Vec<f64>>,
    pub evaluations: usize,
    pub skipped: usize,
    /// Refined local maxima, including ones below the global maximum.
    pub local_maxima: Vec<CandidatePoint>,
}

/// `±(f(x*) − φ)` at the lexicographically smallest maximiser.
pub fn subgradient_from(result: &InnerResult, direction: Direction) -> Vec<f64> {
    let s = direction.sign();
    result.f_image[0].iter().map(|v| s * v).collect()
}

/// Regular grid of a bounded support plus its marks, sorted and deduplicated.
pub fn support_grid(stage: &SupportSet, res: usize) -> Vec<Vec<f64>> {
    let lin = |lo: f64, hi: f64| -> Vec<f64> {
        if hi <= lo {
            vec![lo]
        } else {
            (0..res)
                .map(|i| {
                    if i + 1 == res {
                        hi
                    } else {
                        lo + (hi - lo) * (i as f64) / ((res - 1) as f64)
                    }
                })
                .collect()
        }
    };
    let mut pts: Vec<Vec<f64>> = match &stage.region {
        Region::Box { lower, upper, .. } => {
            let axes: Vec<Vec<f64>> = lower.iter().zip(upper).map(|(l, u)| lin(*l, *u)).collect();
            let mut out = vec![Vec::with_capacity(axes.len())];
            for axis in &axes {
                let mut next = Vec::with_capacity(out.len() * axis.len());
                for prefix in &out {
                    for v in axis {
                        let mut p = prefix.clone();
                        p.push(*v);
                        next.push(p);
                    }
                }
                out = next;
            }
            out
        }
        Region::Intervals(iv) => iv.iter().flat_map(|i| lin(i.lo, i.hi)).map(|v| vec![v]).collect(),
        Region::Points(p) => p.clone(),
    };
    pts.extend(stage.marks.iter().filter(|m| stage.contains(m)).cloned());
    sort_dedup(&mut pts);
    pts
}

pub(crate) fn sort_dedup(pts: &mut Vec<Vec<f64>>) {
    pts.sort_by(|a, b| lex_cmp(a, b));
    pts.dedup();
}

/// Cached stage image; evaluates `F±` for many multipliers.
#[derive(Debug, Clone)]
pub struct InnerSolver {
    problem: ProblemSpec,
    stage: SupportSet,
    image: GridImage,
    phi: Vec<f64>,
    /// Per-coordinate half width of the refinement cell for box stages.
    cell: Vec<f64>,
    opts: InnerOptions,
}

impl InnerSolver {
    /// Builds the solver on `stage` sampled at `opts.grid_res`, plus `extra` points.
    pub fn new(p: &ProblemSpec, stage: SupportSet, extra: &[Vec<f64>], opts: InnerOptions) -> Result<Self, InnerError> {
        if opts.grid_res < 2 {
            return Err(InnerError::GridTooSmall);
        }
        let mut pts = support_grid(&stage, opts.grid_res);
        pts.extend(extra.iter().filter(|x| stage.contains(x)).cloned());
        sort_dedup(&mut pts);
        let evaluated: Vec<_> = pts.par_iter().map(|x| p.gamma(x)).collect();
        let mut image = GridImage::default();
        for (x, r) in pts.into_iter().zip(evaluated) {
            match r {
                Ok((f, g)) => {
                    image.points.push(x);
                    image.f.push(f);
                    image.g.push(g);
                }
                Err(_) => image.skipped += 1,
            }
        }
        if image.is_empty() {
            return Err(InnerError::NothingEvaluable(image.skipped));
        }
        let cell = match &stage.region {
            Region::Box { lower, upper, .. } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l) / (opts.grid_res - 1) as f64)
                .collect(),
            _ => Vec::new(),
        };
        Ok(InnerSolver {
            problem: p.clone(),
            phi: p.phi(),
            stage,
            image,
            cell,
            opts,
        })
    }

    pub fn image(&self) -> &GridImage {
        &self.image
    }

    pub fn stage(&self) -> &SupportSet {
        &self.stage
    }

    pub fn options(&self) -> &InnerOptions {
        &self.opts
    }

    fn objective(&self, f: &[f64], g: f64, alpha: &[f64], s: f64) -> f64 {
        let lin: f64 = alpha.iter().zip(f.iter().zip(&self.phi)).map(|(a, (fi, p))| a * (fi - p)).sum();
        s * (g + lin)
    }

    fn eval_point(&self, x: &[f64], alpha: &[f64], s: f64) -> Option<(f64, Vec<f64>, f64)> {
        let (f, g) = self.problem.gamma(x).ok()?;
        let v = self.objective(&f, g, alpha, s);
        v.is_finite().then_some((v, f, g))
    }

    /// Maximises `±G(·; α)` over the stage.
    pub fn evaluate(&self, alpha: &[f64], direction: Direction) -> InnerResult {
        self.evaluate_with_tol(alpha, direction, self.opts.tol_active)
    }

    /// As [`evaluate`](Self::evaluate) with relative active tolerance `tol_active`.
    pub fn evaluate_with_tol(&self, alpha: &[f64], direction: Direction, tol_active: f64) -> InnerResult {
        let s = direction.sign();
        let img = &self.image;
        let values: Vec<f64> = (0..img.len())
            .into_par_iter()
            .map(|i| self.objective(&img.f[i], img.g[i], alpha, s))
            .collect();
        let mut evaluations = values.len();

        let candidates = self.select_candidates(&values);
        let refined: Vec<(CandidatePoint, f64, usize)> = candidates
            .par_iter()
            .map(|&i| self.refine(i, values[i], alpha, s))
            .collect();
        evaluations += refined.iter().map(|r| r.2).sum::<usize>();

        let grid_best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best = refined.iter().map(|r| r.1).fold(grid_best, f64::max);
        let tol = tol_active * (1.0 + best.abs());

        let mut active: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for (i, v) in values.iter().enumerate() {
            if *v >= best - tol {
                active.push((img.points[i].clone(), img.f[i].clone()));
            }
        }
        for (c, v, _) in &refined {
            if *v >= best - tol {
                active.push((c.x.clone(), c.f.clone()));
            }
        }
        active.sort_by(|a, b| lex_cmp(&a.0, &b.0));
        active.dedup_by(|a, b| a.0 == b.0);
        let (maximizers, f_image): (Vec<_>, Vec<_>) = active
            .into_iter()
            .map(|(x, f)| {
                let d: Vec<f64> = f.iter().zip(&self.phi).map(|(a, b)| a - b).collect();
                (x, d)
            })
            .unzip();

        InnerResult {
            value: best,
            maximizers,
            f_image,
            evaluations,
            skipped: img.skipped,
            local_maxima: refined.into_iter().map(|r| r.0).collect(),
        }
    }

    /// Indices of the best grid points that are not neighbours of a better one.
    fn select_candidates(&self, values: &[f64]) -> Vec<usize> {
        let k = self.opts.refine_candidates;
        if k == 0 {
            return Vec::new();
        }
        let pts = &self.image.points;
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
        let mut chosen: Vec<usize> = Vec::with_capacity(k);
        let one_d = self.problem.dim == 1;
        for i in order {
            if chosen.len() >= k {
                break;
            }
            let keep = if one_d {
                // local maximum in sorted order
                let left = i.checked_sub(1).is_none_or(|j| values[j] <= values[i]);
                let right = values.get(i + 1).is_none_or(|v| *v <= values[i]);
                left && right
            } else if self.cell.is_empty() {
                true
            } else {
                chosen.iter().all(|&c| {
                    pts[c]
                        .iter()
                        .zip(&pts[i])
                        .zip(&self.cell)
                        .any(|((a, b), h)| (a - b).abs() > 1.5 * h)
                })
            };
            if keep {
                chosen.push(i);
            }
        }
        chosen
    }

    /// Refinement bracket for coordinate `d` of grid point `i`.
    fn bracket(&self, i: usize, d: usize) -> Option<(f64, f64)> {
        let pts = &self.image.points;
        let x = pts[i][d];
        match &self.stage.region {
            Region::Points(_) => None,
            Region::Box { lower, upper, .. } => {
                if self.problem.dim == 1 {
                    let lo = if i > 0 { pts[i - 1][0] } else { lower[0] };
                    let hi = pts.get(i + 1).map_or(upper[0], |p| p[0]);
                    Some((lo.max(lower[0]), hi.min(upper[0])))
                } else {
                    let h = self.cell[d];
                    Some(((x - h).max(lower[d]), (x + h).min(upper[d])))
                }
            }
            Region::Intervals(iv) => {
                let comp = iv.iter().find(|c| x >= c.lo && x <= c.hi)?;
                let lo = if i > 0 { pts[i - 1][0].max(comp.lo) } else { comp.lo };
                let hi = pts.get(i + 1).map_or(comp.hi, |p| p[0].min(comp.hi));
                Some((lo.max(comp.lo).min(x), hi.min(comp.hi).max(x)))
            }
        }
    }

    fn refine(&self, i: usize, v0: f64, alpha: &[f64], s: f64) -> (CandidatePoint, f64, usize) {
        let img = &self.image;
        let mut x = img.points[i].clone();
        let mut best = v0;
        let mut f = img.f[i].clone();
        let mut g = img.g[i];
        let mut evals = 0;
        let n = x.len();
        let brackets: Vec<Option<(f64, f64)>> = (0..n).map(|d| self.bracket(i, d)).collect();
        for _ in 0..self.opts.refine_iters {
            let mut improved = false;
            for d in 0..n {
                let Some((lo, hi)) = brackets[d] else { continue };
                if hi - lo <= 0.0 {
                    continue;
                }
                let mut probe = x.clone();
                let mut objective = |t: f64| {
                    probe[d] = t;
                    evals += 1;
                    self.eval_point(&probe, alpha, s).map_or(f64::NEG_INFINITY, |r| r.0)
                };
                let t = golden_max(&mut objective, lo, hi);
                let mut cand = x.clone();
                cand[d] = t;
                evals += 1;
                if let Some((v, cf, cg)) = self.eval_point(&cand, alpha, s) {
                    if v > best {
                        best = v;
                        x = cand;
                        f = cf;
                        g = cg;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        (CandidatePoint { x, f, g }, best, evals)
    }
}

/// Golden-section search for a maximiser of a unimodal function on `[lo, hi]`.
fn golden_max(f: &mut impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    let tol = 1e-13 * (1.0 + lo.abs().max(hi.abs()));
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

/// One-shot inner evaluation on the problem's (last) bounded stage.
pub fn evaluate_inner(
    p: &ProblemSpec,
    alpha: &[f64],
    direction: Direction,
    grid_res: usize,
    refine_iters: usize,
) -> Result<InnerResult, InnerError> {
    let stage = truncation_stage(&p.support, p.support.stage_count() - 1)?;
    let opts = InnerOptions {
        grid_res,
        refine_iters,
        ..InnerOptions::default()
    };
    Ok(InnerSolver::new(p, stage, &[], opts)?.evaluate(alpha, direction))
}
