//! Closed-form sharp bounds for mean/variance data, and the three-point
//! parametrisation of measures with given mean and variance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::problem::{Direction, DiscreteMeasure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("s must be nonzero")]
    ZeroExponent,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ClosedFormError> {
    if ok {
        Ok(())
    } else {
        Err(ClosedFormError::OutOfRange(msg()))
    }
}

/// Variance range `(0, (b − λ)(λ − a))` of measures on `[a, b]` with mean λ.
pub fn variance_range(a: f64, b: f64, lambda: f64) -> Result<(f64, f64), ClosedFormError> {
    check(a < lambda && lambda < b, || format!("need a < λ < b, got a={a}, λ={lambda}, b={b}"))?;
    Ok((0.0, (b - lambda) * (lambda - a)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenGap {
    pub lower: f64,
    pub upper: f64,
    pub mu_minus: DiscreteMeasure,
    pub mu_plus: DiscreteMeasure,
}

/// Sharp bounds on `E g(X)` over `[a, b]` with mean λ and variance σ², for `g`
/// whose derivative is strictly convex (not checked).
pub fn jensen_gap_bounds(g: &Expr, a: f64, b: f64, lambda: f64, var: f64) -> Result<JensenGap, ClosedFormError> {
    let (_, vmax) = variance_range(a, b, lambda)?;
    check(var > 0.0 && var <= vmax * (1.0 + 1e-12), || {
        format!("need 0 < σ² ≤ {vmax}, got {var}")
    })?;
    let two_atom = |end: f64| -> Result<(f64, DiscreteMeasure), ClosedFormError> {
        let d2 = (lambda - end).powi(2);
        let other = lambda + var / (lambda - end);
        let (pe, po) = (var / (var + d2), d2 / (var + d2));
        let value = pe * g.eval(&[end])? + po * g.eval(&[other])?;
        let mut pairs = [(end, pe), (other, po)];
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mu = DiscreteMeasure {
            atoms: pairs.iter().map(|p| vec![p.0]).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        };
        Ok((value, mu))
    };
    let (lower, mu_minus) = two_atom(a)?;
    let (upper, mu_plus) = two_atom(b)?;
    Ok(JensenGap {
        lower,
        upper,
        mu_minus,
        mu_plus,
    })
}

/// `[σ² e^{as} + (λ−a)² e^{λs + σ²s/(λ−a)}] / [σ² + (λ−a)²]`, the two-atom
/// value with one atom at `a`.
pub fn mgf_two_atom(lambda: f64, var: f64, s: f64, a: f64) -> f64 {
    let d2 = (lambda - a).powi(2);
    (var * (a * s).exp() + d2 * (lambda * s + var * s / (lambda - a)).exp()) / (var + d2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(with = "crate::extended")]
    pub lower: f64,
    #[serde(with = "crate::extended")]
    pub upper: f64,
}

/// Bounds on `E e^{sX}` for `X ≥ 0` with mean λ and variance σ².
pub fn mgf_bounds(lambda: f64, var: f64, s: f64) -> Result<Bounds, ClosedFormError> {
    check(lambda > 0.0 && var > 0.0, || format!("need λ > 0 and σ² > 0, got {lambda}, {var}"))?;
    if s == 0.0 {
        return Err(ClosedFormError::ZeroExponent);
    }
    let zero_atom = (var + lambda * lambda * ((lambda * lambda + var) * s / lambda).exp()) / (var + lambda * lambda);
    Ok(if s > 0.0 {
        Bounds {
            lower: zero_atom,
            upper: f64::INFINITY,
        }
    } else {
        Bounds {
            lower: (lambda * s).exp(),
            upper: zero_atom,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerMeanBounds {
    pub lower: f64,
    /// `None` when no upper bound exists (`s > 2`).
    pub upper: Option<f64>,
}

/// Bounds on `M_s = (E X^s)^{1/s}` for `X > 0` with mean λ and variance σ².
pub fn power_mean_bounds(lambda: f64, var: f64, s: f64) -> Result<PowerMeanBounds, ClosedFormError> {
    check(lambda > 0.0 && var > 0.0, || format!("need λ > 0 and σ² > 0, got {lambda}, {var}"))?;
    if s == 0.0 {
        return Err(ClosedFormError::ZeroExponent);
    }
    let k = (var + lambda * lambda).powf(1.0 - 1.0 / s) / lambda.powf(1.0 - 2.0 / s);
    let (lower, upper) = if s < 0.0 {
        (0.0, Some(lambda))
    } else if s < 1.0 {
        (k, Some(lambda))
    } else if s == 1.0 {
        (lambda, Some(lambda))
    } else if s < 2.0 {
        (lambda, Some(k))
    } else if s == 2.0 {
        let m2 = (lambda * lambda + var).sqrt();
        (m2, Some(m2))
    } else {
        (k, None)
    };
    Ok(PowerMeanBounds { lower, upper })
}

/// The power-mean bounds expressed for `E X^s`; missing bounds become `+∞`.
pub fn power_mean_expectation_bounds(lambda: f64, var: f64, s: f64) -> Result<Bounds, ClosedFormError> {
    let pm = power_mean_bounds(lambda, var, s)?;
    let up = pm.upper.unwrap_or(f64::INFINITY);
    Ok(if s > 0.0 {
        Bounds {
            lower: pm.lower.powf(s),
            upper: up.powf(s),
        }
    } else {
        // x ↦ x^s is decreasing, and 0^s = ∞
        Bounds {
            lower: up.powf(s),
            upper: f64::INFINITY,
        }
    })
}

/// Sharp lower bound of `P(X ≤ a)` for `X ≥ 0` with mean λ.
pub fn markov_bound(lambda: f64, a: f64) -> f64 {
    (1.0 - lambda / a).max(0.0)
}

/// Sharp upper bound of `P(X ≥ λ)` for `X ≥ a` with `E e^X = 1`.
pub fn jarzynski_bound(a: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    ((1.0 - a.exp()) / (lambda.exp() - a.exp())).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePointParam {
    pub p: [f64; 3],
    pub theta: f64,
    pub lambda: f64,
    pub sigma: f64,
}

impl ThreePointParam {
    pub fn is_valid(&self) -> bool {
        self.p.iter().all(|v| *v > 0.0) && (self.p.iter().sum::<f64>() - 1.0).abs() <= 1e-12 && self.sigma > 0.0
    }

    pub fn measure(&self) -> DiscreteMeasure {
        let (xa, xb, xc) = three_point_atoms(self);
        DiscreteMeasure {
            atoms: vec![vec![xa], vec![xb], vec![xc]],
            weights: self.p.to_vec(),
        }
    }
}

/// Atom locations of the three-point measure with weights `p`, mean λ and
/// standard deviation σ, parametrised by the angle θ.
pub fn three_point_atoms(tp: &ThreePointParam) -> (f64, f64, f64) {
    let [pa, pb, pc] = tp.p;
    let (sin, cos) = tp.theta.sin_cos();
    let ab = (pa + pb).sqrt();
    let xa = tp.lambda + tp.sigma * (cos * (pb / pa).sqrt() + sin * pc.sqrt()) / ab;
    let xb = tp.lambda + tp.sigma * (-cos * (pa / pb).sqrt() + sin * pc.sqrt()) / ab;
    let xc = tp.lambda - tp.sigma * sin * ((pa + pb) / pc).sqrt();
    (xa, xb, xc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThreePointOptions {
    pub starts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for ThreePointOptions {
    fn default() -> Self {
        ThreePointOptions {
            starts: 64,
            max_iters: 4000,
            seed: 0,
        }
    }
}

fn softmax(l: &[f64]) -> [f64; 3] {
    let mx = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = l.iter().map(|v| (v - mx).exp()).collect();
    let z: f64 = e.iter().sum();
    [e[0] / z, e[1] / z, e[2] / z]
}

/// Heuristic extremum of `E g(X)` over all laws on ℝ with mean λ and
/// variance σ², by multistart compass search over (softmax logits, θ).
/// The result is an inner approximation: a missed basin leaves it loose.
pub fn three_point_extremize(
    g: &Expr,
    lambda: f64,
    var: f64,
    direction: Direction,
    opts: ThreePointOptions,
) -> Result<f64, ClosedFormError> {
    check(var > 0.0, || format!("need σ² > 0, got {var}"))?;
    let sigma = var.sqrt();
    let s = direction.sign();
    // maximise s · E g
    let objective = |z: &[f64]| -> f64 {
        let p = softmax(&z[..3]);
        if p.iter().any(|v| *v <= 0.0) {
            return f64::NEG_INFINITY;
        }
        let tp = ThreePointParam {
            p,
            theta: z[3],
            lambda,
            sigma,
        };
        let (xa, xb, xc) = three_point_atoms(&tp);
        let mut e = 0.0;
        for (w, x) in p.iter().zip([xa, xb, xc]) {
            match g.eval(&[x]) {
                Ok(v) => e += w * v,
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        let v = s * e;
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<[f64; 4]> = (0..opts.starts.max(1))
        .map(|_| {
            [
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    let results: Vec<f64> = starts
        .par_iter()
        .map(|z0| {
            let mut z = *z0;
            let mut best = objective(&z);
            let mut step = 1.0;
            for _ in 0..opts.max_iters {
                if step < 1e-12 {
                    break;
                }
                let mut moved = false;
                for d in 0..4 {
                    for dir in [1.0, -1.0] {
                        let mut t = z;
                        t[d] += dir * step;
                        let v = objective(&t);
                        if v > best {
                            best = v;
                            z = t;
                            moved = true;
                            break;
                        }
                    }
                }
                if moved {
                    step *= 1.5;
                } else {
                    step *= 0.5;
                }
            }
            best
        })
        .collect();
    // lowest start index wins ties
    let mut best = f64::NEG_INFINITY;
    for v in results {
        if v > best {
            best = v;
        }
    }
    Ok(s * best)
}
