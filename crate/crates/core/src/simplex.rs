//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Solves `min cᵀx  s.t.  Ax = b, x ≥ 0`. The problems here have few rows
//! (moment constraints) and many columns (support points), so the tableau is
//! stored row-major with every column of `A` plus one artificial per row.
//!
//! Rows and columns are equilibrated before solving. Once the optimal basis is found the
//! basic solution and the row multipliers are recomputed from the original
//! data with an LU solve, which removes most of the drift the tableau
//! accumulates over many pivots.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("infeasible (phase-one residual {residual:e})")]
    Infeasible { residual: f64 },
    #[error("unbounded")]
    Unbounded,
    #[error("iteration limit of {0} pivots reached")]
    IterationLimit(usize),
    #[error("malformed problem: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Phase one accepts a scaled artificial sum at or below this value.
    pub feasibility_tol: f64,
    pub pivot_tol: f64,
    pub optimality_tol: f64,
    pub max_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            feasibility_tol: 1e-9,
            pivot_tol: 1e-11,
            optimality_tol: 1e-12,
            max_pivots: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` with `c - Aᵀy ≥ 0` at the optimum.
    pub duals: Vec<f64>,
    /// Column index of the basic variable of each row (`None` for a redundant row).
    pub basis: Vec<Option<usize>>,
    pub pivots: usize,
}

struct Tableau {
    rows: usize,
    cols: usize,
    t: Vec<f64>,
    rhs: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let p = self.at(r, q);
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[q] = 1.0;
        }
        self.rhs[r] /= p;
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        let prhs = self.rhs[r];
        let update = |row: &mut [f64], rhs: &mut f64| {
            let f = row[q];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[q] = 0.0;
                *rhs -= f * prhs;
            }
        };
        for (i, row) in before.chunks_mut(cols).enumerate() {
            update(row, &mut self.rhs[i]);
        }
        for (k, row) in after.chunks_mut(cols).enumerate() {
            update(row, &mut self.rhs[r + 1 + k]);
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, pv) in self.d.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            self.d[q] = 0.0;
        }
        self.basis[r] = q;
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..self.cols {
                    self.d[j] -= cb * self.t[i * self.cols + j];
                }
            }
        }
    }

    /// Bland's rule: lowest eligible entering index, lowest basic index on ratio ties.
    fn run(&mut self, eligible: usize, opts: &SimplexOptions, pivots: &mut usize) -> Result<(), LpError> {
        loop {
            let Some(q) = (0..eligible).find(|&j| self.d[j] < -opts.optimality_tol) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, q);
                if a > opts.pivot_tol {
                    let ratio = self.rhs[i].max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-15 * (1.0 + br)
                                || (ratio <= br + 1e-15 * (1.0 + br) && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, q);
            *pivots += 1;
            if *pivots > opts.max_pivots {
                return Err(LpError::IterationLimit(opts.max_pivots));
            }
        }
    }
}

/// Solves `min cᵀx s.t. Ax = b, x ≥ 0` where `a` is given row by row.
pub fn solve(a: &[Vec<f64>], b: &[f64], c: &[f64], opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|r| r.len() != n) {
        return Err(LpError::Shape(format!(
            "{} rows, {} rhs, {} costs",
            m,
            b.len(),
            n
        )));
    }
    if m == 0 {
        if c.iter().any(|v| *v < 0.0) {
            return Err(LpError::Unbounded);
        }
        return Ok(LpSolution {
            x: vec![0.0; n],
            objective: 0.0,
            duals: vec![],
            basis: vec![],
            pivots: 0,
        });
    }

    // alternate column and row equilibration; the rows finally get a sign so
    // that the scaled rhs is non-negative. Column scaling substitutes
    // x_j = colscale_j · x'_j.
    let mut colscale = vec![1.0; n];
    let mut scale = vec![1.0; m];
    for _ in 0..2 {
        for j in 0..n {
            let mx = (0..m).fold(0.0f64, |acc, i| acc.max((a[i][j] * scale[i]).abs()));
            colscale[j] = if mx > 0.0 { 1.0 / mx } else { 1.0 };
        }
        for i in 0..m {
            let mx = (0..n).fold(0.0f64, |acc, j| acc.max((a[i][j] * colscale[j]).abs()));
            scale[i] = if mx > 0.0 { 1.0 / mx } else { 1.0 };
        }
    }
    for i in 0..m {
        if b[i] < 0.0 {
            scale[i] = -scale[i];
        }
    }
    // a median scale keeps a few huge costs from swamping the rest
    let mut mags: Vec<f64> = (0..n).map(|j| (c[j] * colscale[j]).abs()).filter(|v| *v > 0.0).collect();
    mags.sort_by(f64::total_cmp);
    let cscale = mags.get(mags.len() / 2).map_or(1.0, |v| 1.0 / v);

    let cols = n + m;
    let mut t = vec![0.0; m * cols];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        for j in 0..n {
            t[i * cols + j] = a[i][j] * scale[i] * colscale[j];
        }
        t[i * cols + n + i] = 1.0;
        rhs[i] = b[i] * scale[i];
    }
    let mut tab = Tableau {
        rows: m,
        cols,
        t,
        rhs,
        d: vec![0.0; cols],
        basis: (n..n + m).collect(),
    };
    let mut pivots = 0;

    // phase one
    let mut cost1 = vec![0.0; cols];
    cost1[n..].iter_mut().for_each(|v| *v = 1.0);
    tab.set_costs(&cost1);
    tab.run(n, opts, &mut pivots)?;
    let residual: f64 = (0..m)
        .filter(|&i| tab.basis[i] >= n)
        .map(|i| tab.rhs[i].abs())
        .sum();
    if residual > opts.feasibility_tol {
        return Err(LpError::Infeasible { residual });
    }
    // drive remaining artificials out of the basis
    let mut redundant = vec![false; m];
    for i in 0..m {
        if tab.basis[i] >= n {
            let mut best = None;
            let mut best_abs = 1e-9;
            for j in 0..n {
                let v = tab.at(i, j).abs();
                if v > best_abs {
                    best_abs = v;
                    best = Some(j);
                }
            }
            match best {
                Some(j) => tab.pivot(i, j),
                None => redundant[i] = true,
            }
        }
    }

    // phase two
    let mut cost2 = vec![0.0; cols];
    for j in 0..n {
        cost2[j] = c[j] * colscale[j] * cscale;
    }
    tab.set_costs(&cost2);
    tab.run(n, opts, &mut pivots)?;

    // recompute the basic solution and multipliers from the original data
    let basis: Vec<Option<usize>> = (0..m)
        .map(|i| (!redundant[i] && tab.basis[i] < n).then_some(tab.basis[i]))
        .collect();
    let bmat = DMatrix::from_fn(m, m, |r, k| match basis[k] {
        Some(j) => a[r][j] * scale[r],
        None => {
            if r == k {
                1.0
            } else {
                0.0
            }
        }
    });
    let bs = DVector::from_fn(m, |r, _| b[r] * scale[r]);
    let cb = DVector::from_fn(m, |k, _| basis[k].map_or(0.0, |j| c[j]));
    let lu = bmat.clone().lu();
    let xb = lu.solve(&bs);
    let ys = bmat.transpose().lu().solve(&cb);

    let mut x = vec![0.0; n];
    match xb {
        Some(xb) if xb.iter().all(|v| v.is_finite()) => {
            for k in 0..m {
                if let Some(j) = basis[k] {
                    x[j] = xb[k].max(0.0);
                }
            }
        }
        _ => {
            for k in 0..m {
                if let Some(j) = basis[k] {
                    x[j] = tab.rhs[k].max(0.0) * colscale[j];
                }
            }
        }
    }
    let duals: Vec<f64> = match ys {
        Some(ys) if ys.iter().all(|v| v.is_finite()) => (0..m).map(|r| ys[r] * scale[r]).collect(),
        _ => (0..m).map(|r| -tab.d[n + r] * scale[r] / cscale).collect(),
    };
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution {
        x,
        objective,
        duals,
        basis,
        pivots,
    })
}
