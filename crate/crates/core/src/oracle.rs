//! Ground truth over finitely supported measures.
//!
//! On a finite grid the extremal expectation is a linear program in the atom
//! probabilities: extremise `Σ p_i g(x_i)` subject to `Σ p_i f(x_i) = φ`,
//! `Σ p_i = 1`, `p ≥ 0`. [`enumerate_bound`] brute-forces the same problem
//! over small supports and exists to check the simplex.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::problem::{DiscreteMeasure, Direction, ProblemSpec};
use crate::simplex::{self, LpError, SimplexOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("phi is outside the hull of f over the grid")]
    Infeasible,
    #[error("grid is empty or no point could be evaluated")]
    EmptyGrid,
    #[error("enumeration guard: {0}")]
    Guard(String),
    #[error("linear program failed: {0}")]
    Lp(LpError),
}

/// Γ evaluated on a set of points; points where an expression fails are dropped.
#[derive(Debug, Clone, Default)]
pub struct GridImage {
    pub points: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    pub skipped: usize,
}

impl GridImage {
    pub fn evaluate(p: &ProblemSpec, points: &[Vec<f64>]) -> Self {
        let mut out = GridImage::default();
        for x in points {
            match p.gamma(x) {
                Ok((f, g)) => {
                    out.points.push(x.clone());
                    out.f.push(f);
                    out.g.push(g);
                }
                Err(_) => out.skipped += 1,
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub value: f64,
    pub measure: DiscreteMeasure,
}

/// Exact extremum of `E[g]` over measures supported on `grid`.
pub fn lp_bound(p: &ProblemSpec, grid: &[Vec<f64>], direction: Direction) -> Result<OracleSolution, OracleError> {
    let image = GridImage::evaluate(p, grid);
    lp_bound_image(&image, &p.phi(), direction)
}

pub fn lp_bound_image(image: &GridImage, phi: &[f64], direction: Direction) -> Result<OracleSolution, OracleError> {
    if image.is_empty() {
        return Err(OracleError::EmptyGrid);
    }
    let m = phi.len();
    let n = image.len();
    let mut a = vec![vec![1.0; n]];
    for j in 0..m {
        a.push(image.f.iter().map(|f| f[j]).collect());
    }
    let mut b = vec![1.0];
    b.extend_from_slice(phi);
    let s = direction.sign();
    let c: Vec<f64> = image.g.iter().map(|g| -s * g).collect();
    let sol = simplex::solve(&a, &b, &c, &SimplexOptions::default()).map_err(|e| match e {
        LpError::Infeasible { .. } => OracleError::Infeasible,
        other => OracleError::Lp(other),
    })?;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (i, w) in sol.x.iter().enumerate() {
        if *w > 0.0 {
            atoms.push(image.points[i].clone());
            weights.push(*w);
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let value = weights
        .iter()
        .zip(&atoms)
        .map(|(w, x)| {
            let i = image.points.iter().position(|q| q == x).expect("atom from grid");
            w * image.g[i]
        })
        .sum();
    Ok(OracleSolution {
        value,
        measure: DiscreteMeasure { atoms, weights },
    })
}

/// Brute-force extremum over all grid measures with at most `k` atoms.
///
/// Only subsets of size `≤ min(k, m+1)` are solved: the measures on a larger
/// subset form a polytope whose vertices live on subsets of size `≤ m+1`.
pub fn enumerate_bound(p: &ProblemSpec, grid: &[Vec<f64>], k: usize, direction: Direction) -> Result<f64, OracleError> {
    let m = p.m();
    if grid.len() > 25 {
        return Err(OracleError::Guard(format!("{} grid points > 25", grid.len())));
    }
    if k == 0 || k > m + 2 {
        return Err(OracleError::Guard(format!("k = {k} not in 1..={}", m + 2)));
    }
    let image = GridImage::evaluate(p, grid);
    if image.is_empty() {
        return Err(OracleError::EmptyGrid);
    }
    let phi = p.phi();
    let rhs = DVector::from_iterator(m + 1, std::iter::once(1.0).chain(phi.iter().copied()));
    let s = direction.sign();
    let mut best: Option<f64> = None;
    let n = image.len();
    for size in 1..=k.min(m + 1).min(n) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let mat = DMatrix::from_fn(m + 1, size, |r, c| {
                if r == 0 {
                    1.0
                } else {
                    image.f[idx[c]][r - 1]
                }
            });
            if let Some(w) = subset_weights(&mat, &rhs) {
                let v: f64 = idx.iter().zip(w.iter()).map(|(i, wi)| wi * image.g[*i]).sum();
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        if s * v > s * b {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            // next combination in lexicographic order
            let mut i = size;
            while i > 0 && idx[i - 1] == n - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    best.ok_or(OracleError::Infeasible)
}

/// Unique non-negative solution of `mat · w = rhs` when the columns are
/// independent, otherwise `None`.
fn subset_weights(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = mat.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-10 * smax.max(1.0) {
        return None;
    }
    let w = svd.solve(rhs, 0.0).ok()?;
    let resid = mat * &w - rhs;
    let scale = 1.0 + rhs.amax() + mat.amax();
    if resid.amax() > 1e-11 * scale {
        return None;
    }
    if w.iter().any(|v| *v < -1e-12) {
        return None;
    }
    Some(w.map(|v| v.max(0.0)))
}
