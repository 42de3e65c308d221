//! Extremal measure reconstruction from a dual certificate.
//!
//! At an optimal multiplier the extremal measures live on the maximisers of
//! `±G(·; α*)`. We collect those points, then find non-negative weights
//! reproducing `(1, φ)` by non-negative least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::DualCertificate;
use crate::expr::EvalError;
use crate::inner::{InnerError, InnerOptions, InnerSolver};
use crate::problem::{lex_cmp, measure_expectation, truncation_stage, DiscreteMeasure, ProblemSpec};

/// Absolute tolerance on every moment row of a recovered measure.
pub const TOL_MOMENTS: f64 = 1e-7;
/// Active points closer than this fraction of the stage diameter are merged.
pub const MERGE_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecoveryError {
    #[error("no active points; the inner grid is probably too coarse")]
    EmptyActiveSet,
    #[error("moments cannot be matched on the active set (residual {residual:e})")]
    Unmatchable { residual: f64 },
    #[error(transparent)]
    Inner(#[from] InnerError),
    #[error("evaluation failed at an active point: {0}")]
    Eval(#[from] EvalError),
}

/// Maximisers of `±G(·; α*)` on the certificate's stage, merged within
/// `MERGE_RADIUS × diameter`.
pub fn active_points(
    p: &ProblemSpec,
    cert: &DualCertificate,
    tol_active: f64,
    opts: InnerOptions,
) -> Result<Vec<Vec<f64>>, RecoveryError> {
    let stage = truncation_stage(&p.support, cert.stage).map_err(InnerError::from)?;
    let solver = InnerSolver::new(p, stage, &cert.active_points, opts)?;
    let res = solver.evaluate_with_tol(&cert.alpha, cert.direction, tol_active);
    let s = cert.direction.sign();
    let scored: Vec<(Vec<f64>, f64)> = res
        .maximizers
        .into_iter()
        .zip(res.f_image)
        .map(|(x, d)| {
            let (_, g) = p.gamma(&x).expect("maximiser was evaluable");
            let lin: f64 = cert.alpha.iter().zip(&d).map(|(a, v)| a * v).sum();
            (x, s * (g + lin))
        })
        .collect();
    let merged = merge_points(scored, MERGE_RADIUS * solver.stage().diameter());
    if merged.is_empty() {
        return Err(RecoveryError::EmptyActiveSet);
    }
    Ok(merged)
}

/// Greedy clustering: the best-valued point of each cluster survives.
fn merge_points(mut pts: Vec<(Vec<f64>, f64)>, radius: f64) -> Vec<Vec<f64>> {
    pts.sort_by(|a, b| b.1.total_cmp(&a.1).then(lex_cmp(&a.0, &b.0)));
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for (x, _) in pts {
        let near = kept.iter().any(|k| {
            let d2: f64 = k.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() <= radius
        });
        if !near {
            kept.push(x);
        }
    }
    kept.sort_by(|a, b| lex_cmp(a, b));
    kept
}

/// Non-negative weights on `points` with total mass 1 and `E f = φ`.
pub fn match_moments(points: &[Vec<f64>], p: &ProblemSpec) -> Result<DiscreteMeasure, RecoveryError> {
    if points.is_empty() {
        return Err(RecoveryError::EmptyActiveSet);
    }
    let m = p.m();
    let phi = p.phi();
    let mut cols = Vec::with_capacity(points.len());
    for x in points {
        cols.push(p.gamma(x)?.0);
    }
    let rows = m + 1;
    // row scaling only conditions the solve; the residual test is unscaled
    let scale: Vec<f64> = (0..rows)
        .map(|r| {
            if r == 0 {
                1.0
            } else {
                let mx = cols.iter().map(|f| f[r - 1].abs()).fold(phi[r - 1].abs(), f64::max);
                1.0 / mx.max(1.0)
            }
        })
        .collect();
    let a = DMatrix::from_fn(rows, points.len(), |r, c| scale[r] * if r == 0 { 1.0 } else { cols[c][r - 1] });
    let b = DVector::from_fn(rows, |r, _| scale[r] * if r == 0 { 1.0 } else { phi[r - 1] });
    let w = nnls(&a, &b);

    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (x, wi) in points.iter().zip(w.iter()) {
        if *wi > 1e-12 {
            atoms.push(x.clone());
            weights.push(*wi);
        }
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(RecoveryError::Unmatchable { residual: 1.0 });
    }
    weights.iter_mut().for_each(|w| *w /= total);
    let mu = DiscreteMeasure { atoms, weights };
    let residual = moment_violation(p, &mu)?;
    if residual > TOL_MOMENTS {
        return Err(RecoveryError::Unmatchable { residual });
    }
    Ok(mu)
}

/// `max_j |Σ w_i f_j(x_i) − φ_j|`.
pub fn moment_violation(p: &ProblemSpec, mu: &DiscreteMeasure) -> Result<f64, EvalError> {
    let mut worst: f64 = 0.0;
    for c in &p.constraints {
        worst = worst.max((measure_expectation(mu, &c.f)? - c.phi).abs());
    }
    Ok(worst)
}

/// Lawson–Hanson active-set NNLS: `min ‖Aw − b‖₂` subject to `w ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut w = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-14 * (1.0 + a.amax()) * (1.0 + b.amax()) * n as f64;
    let ls = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
        let z = sub
            .svd(true, true)
            .solve(b, 1e-13)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut full = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            full[j] = z[k];
        }
        full
    };
    for _ in 0..(3 * n + 10) {
        let grad = a.transpose() * (b - a * &w);
        let pick = (0..n)
            .filter(|&j| !passive[j] && grad[j] > tol)
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]).then(j.cmp(&i)));
        let Some(j) = pick else { break };
        passive[j] = true;
        loop {
            let z = ls(&passive);
            if (0..n).filter(|&k| passive[k]).all(|k| z[k] > 0.0) {
                w = z;
                break;
            }
            let mut step = 1.0f64;
            for k in (0..n).filter(|&k| passive[k] && z[k] <= 0.0) {
                step = step.min(w[k] / (w[k] - z[k]));
            }
            for k in 0..n {
                if passive[k] {
                    w[k] += step * (z[k] - w[k]);
                    if w[k] <= 1e-15 {
                        w[k] = 0.0;
                        passive[k] = false;
                    }
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    /// `|E_μ[g] − bound|`.
    pub expectation_gap: f64,
    pub max_constraint_violation: f64,
    /// `max |g(x) + ⟨α, f(x)⟩ + c|` over the atoms.
    pub max_hyperplane_residual: f64,
}

pub fn verify_certificate(
    p: &ProblemSpec,
    cert: &DualCertificate,
    mu: &DiscreteMeasure,
) -> Result<CertificateCheck, EvalError> {
    let eg = measure_expectation(mu, &p.objective)?;
    let mut hyper: f64 = 0.0;
    for x in &mu.atoms {
        let (f, g) = p.gamma(x)?;
        let lin: f64 = cert.alpha.iter().zip(&f).map(|(a, v)| a * v).sum();
        hyper = hyper.max((g + lin + cert.c).abs());
    }
    Ok(CertificateCheck {
        expectation_gap: (eg - cert.bound).abs(),
        max_constraint_violation: moment_violation(p, mu)?,
        max_hyperplane_residual: hyper,
    })
}
