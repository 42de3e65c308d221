//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::BTreeMap;
use std::f64::consts::E;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sharpbound::cli::{sweep_config, SweepRow, SweepSpec};
use sharpbound::closed_form::{jarzynski_bound, jensen_gap_bounds, markov_bound, ThreePointParam};
use sharpbound::config::Config;
use sharpbound::dual::{
    check_feasibility, solve_dual, BoundResult, DualCertificate, FeasibilityStatus, SolverParams, StagePolicy,
};
use sharpbound::expr::parse_expr;
use sharpbound::inner::{subgradient_from, InnerOptions, InnerSolver};
use sharpbound::oracle::{enumerate_bound, lp_bound};
use sharpbound::problem::{
    measure_expectation, truncation_stage, Constraint, Direction, ProblemSpec, SupportSet,
};
use sharpbound::recovery::verify_certificate;
use sharpbound::report::RunOptions;

// Tolerances, pinned.
const TOL_VARIANCE: f64 = 1e-6;
const MAX_TIME_VARIANCE: Duration = Duration::from_secs(1);
const TOL_FOURTH: f64 = 1e-5;
const TOL_FOURTH_ATOM: f64 = 1e-5;
const MARKOV_SLACK: f64 = 0.01;
const TOL_MARKOV_FINAL: f64 = 1e-3;
const TOL_MARKOV_ZERO: f64 = 1e-6;
const TOL_JARZYNSKI: f64 = 1e-5;
const TOL_JARZYNSKI_ALPHA: f64 = 1e-4;
const TOL_TWO_VAR: f64 = 1e-5;
const TOL_TWO_VAR_ALPHA: f64 = 1e-3;
const TOL_TWO_VAR_ATOM: f64 = 1e-4;
const TOL_TWO_VAR_WEIGHT: f64 = 1e-4;
const MAX_TIME_TWO_VAR: Duration = Duration::from_secs(30);
const TOL_JENSEN: f64 = 1e-5;
const TOL_WITNESS: f64 = 1e-7;
const TOL_SWEEP: f64 = 1e-4;
const TOL_ORACLE: f64 = 1e-7;
const TOL_ENUMERATION: f64 = 1e-10;
const TOL_SUBGRADIENT: f64 = 1e-10;
const TOL_WEAK_DUALITY: f64 = 1e-9;
const TOL_THREE_POINT: f64 = 1e-10;

type Outcome = Result<String, String>;

fn problem(dim: usize, support: SupportSet, fs: &[(&str, f64)], g: &str, direction: Direction) -> ProblemSpec {
    ProblemSpec {
        dim,
        support,
        constraints: fs
            .iter()
            .map(|(f, phi)| Constraint {
                f: parse_expr(f, dim).unwrap(),
                phi: *phi,
            })
            .collect(),
        objective: parse_expr(g, dim).unwrap(),
        direction,
    }
}

fn config(name: &str) -> Config {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    Config::load(&path).unwrap()
}

fn solve_config(name: &str, params: &[(&str, f64)]) -> BoundResult {
    let overrides: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let r = config(name).resolve_with(&overrides).unwrap();
    solve_dual(&r.problem.with_direction(r.directions[0]), &r.solver).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn variance_range() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for lambda in [0.1, 0.3, 0.5, 0.9] {
        let p = problem(1, SupportSet::interval(0.0, 1.0), &[("x1", lambda)], "x1^2", Direction::Upper);
        let t = Instant::now();
        let r = solve_dual(&p, &SolverParams::default()).unwrap();
        slowest = slowest.max(t.elapsed());
        worst = worst.max((r.bound.unwrap() - lambda).abs());
    }
    check(
        worst <= TOL_VARIANCE && slowest < MAX_TIME_VARIANCE,
        format!("max error {worst:.2e}, slowest {slowest:.2?}"),
    )
}

fn fourth_moment() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_atom: f64 = 0.0;
    for r in [2.0, 4.0, 8.0] {
        let p = problem(
            1,
            SupportSet::interval(-r, r),
            &[("x1", 0.0), ("x1^2", 1.0)],
            "x1^4",
            Direction::Lower,
        );
        let res = solve_dual(&p, &SolverParams::default()).unwrap();
        worst = worst.max((res.bound.unwrap() - 1.0).abs());
        let mu = res.measure.ok_or(format!("no measure at R = {r}"))?;
        if mu.len() != 2 {
            return Err(format!("R = {r}: measure has {} atoms", mu.len()));
        }
        for (x, w) in mu.atoms.iter().zip(&mu.weights) {
            let target = if x[0] < 0.0 { -1.0 } else { 1.0 };
            worst_atom = worst_atom.max((x[0] - target).abs()).max((w - 0.5).abs());
        }
    }
    check(
        worst <= TOL_FOURTH && worst_atom <= TOL_FOURTH_ATOM,
        format!("max bound error {worst:.2e}, max atom/weight error {worst_atom:.2e}"),
    )
}

fn markov() -> Outcome {
    let r = solve_config("markov.json", &[("lambda", 1.0), ("a", 2.0)]);
    let target = markov_bound(1.0, 2.0);
    let mut prev = f64::INFINITY;
    let mut detail = Vec::new();
    for st in &r.stages {
        let (Some(b), Some(n)) = (st.bound, st.radius) else { continue };
        let err = b - target;
        let slack = st.gap.unwrap_or(0.0) + 1e-12;
        if b > prev + slack {
            return Err(format!("stage n = {n:.1}: bound {b} rose above {prev}"));
        }
        if err.abs() > 2.0 / n * (1.0 + MARKOV_SLACK) {
            return Err(format!("stage n = {n:.1}: error {err:.3e} exceeds 2/n"));
        }
        detail.push(format!("{n:.0}:{err:.1e}"));
        prev = b;
    }
    let last = r.stages.last().unwrap();
    let final_err = (r.bound.unwrap() - target).abs();
    if (last.radius.unwrap() - 1000.0).abs() > 1e-6 || final_err > TOL_MARKOV_FINAL {
        return Err(format!("final stage n = {:?}, error {final_err:.2e}", last.radius));
    }
    let zero = solve_config("markov.json", &[("lambda", 3.0), ("a", 2.0)]);
    let z = zero.bound.unwrap();
    check(
        z.abs() <= TOL_MARKOV_ZERO,
        format!("errors by stage [{}]; lambda=3 bound {z:.1e}", detail.join(" ")),
    )
}

fn jarzynski() -> Outcome {
    let a = -3.0;
    let mut out = Vec::new();
    for lambda in [-0.2, 0.5] {
        let r = solve_config("jarzynski.json", &[("lambda", lambda)]);
        let err = (r.bound.unwrap() - jarzynski_bound(a, lambda)).abs();
        let alpha = r.certificate.as_ref().ok_or("no certificate")?.alpha[0];
        let want = if lambda <= 0.0 { 0.0 } else { 1.0 / (a.exp() - lambda.exp()) };
        let aerr = (alpha - want).abs();
        if err > TOL_JARZYNSKI || aerr > TOL_JARZYNSKI_ALPHA {
            return Err(format!("lambda = {lambda}: bound error {err:.2e}, alpha {alpha} vs {want}"));
        }
        out.push(format!("lambda={lambda}: err {err:.1e}, alpha err {aerr:.1e}"));
    }
    Ok(out.join("; "))
}

fn two_variable() -> Outcome {
    let p = problem(
        2,
        SupportSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]),
        &[("x1", 0.0), ("x1*x2", 0.5)],
        "exp(x1) + exp(x2)",
        Direction::Upper,
    );
    let params = SolverParams {
        inner: InnerOptions {
            grid_res: 129,
            ..InnerOptions::default()
        },
        ..SolverParams::default()
    };
    let t = Instant::now();
    let r = solve_dual(&p, &params).unwrap();
    let elapsed = t.elapsed();
    let err = (r.bound.unwrap() - (5.0 * E / 4.0 + 3.0 / (4.0 * E))).abs();
    let alpha = &r.certificate.as_ref().ok_or("no certificate")?.alpha;
    let aerr = dist(alpha, &[1.0 / E - E, (E - 1.0 / E) / 2.0]);
    let mu = r.measure.as_ref().ok_or("no measure")?;
    let want = [(vec![-1.0, -1.0], 0.25), (vec![-1.0, 1.0], 0.25), (vec![1.0, 1.0], 0.5)];
    if mu.len() != 3 {
        return Err(format!("measure has {} atoms", mu.len()));
    }
    let (mut atom_err, mut weight_err) = (0.0f64, 0.0f64);
    for (x, w) in &want {
        let i = (0..mu.len())
            .min_by(|&i, &j| dist(&mu.atoms[i], x).total_cmp(&dist(&mu.atoms[j], x)))
            .unwrap();
        atom_err = atom_err.max(dist(&mu.atoms[i], x));
        weight_err = weight_err.max((mu.weights[i] - w).abs());
    }
    check(
        err <= TOL_TWO_VAR
            && aerr <= TOL_TWO_VAR_ALPHA
            && atom_err <= TOL_TWO_VAR_ATOM
            && weight_err <= TOL_TWO_VAR_WEIGHT
            && elapsed < MAX_TIME_TWO_VAR,
        format!(
            "bound error {err:.1e}, alpha error {aerr:.1e}, atom error {atom_err:.1e}, weight error {weight_err:.1e}, {elapsed:.2?}"
        ),
    )
}

fn jensen_cross_validation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst, mut worst_witness, mut worst_hyper) = (0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    for _ in 0..20 {
        for g in ["exp(x1)", "x1^4", "-exp(-x1)"] {
            let a = if g == "x1^4" { 0.0 } else { rng.random_range(-2.0..0.0) };
            let b = a + rng.random_range(0.5..3.0);
            let lambda = a + (b - a) * rng.random_range(0.1..0.9);
            let var = (b - lambda) * (lambda - a) * rng.random_range(0.05..0.95);
            let expr = parse_expr(g, 1).unwrap();
            let cf = jensen_gap_bounds(&expr, a, b, lambda, var).map_err(|e| e.to_string())?;
            for (d, reference, witness) in [
                (Direction::Lower, cf.lower, &cf.mu_minus),
                (Direction::Upper, cf.upper, &cf.mu_plus),
            ] {
                let p = problem(
                    1,
                    SupportSet::interval(a, b),
                    &[("x1", lambda), ("x1^2", lambda * lambda + var)],
                    g,
                    d,
                );
                let r = solve_dual(&p, &SolverParams::default()).unwrap();
                let bound = r.bound.unwrap();
                let err = (bound - reference).abs();
                let cert: &DualCertificate = r.certificate.as_ref().ok_or("no certificate")?;
                let chk = verify_certificate(&p, cert, witness).map_err(|e| e.to_string())?;
                worst = worst.max(err);
                worst_witness = worst_witness.max(chk.expectation_gap).max(chk.max_constraint_violation);
                worst_hyper = worst_hyper.max(chk.max_hyperplane_residual);
                count += 1;
                if err > TOL_JENSEN || chk.expectation_gap > TOL_WITNESS || chk.max_constraint_violation > TOL_WITNESS {
                    return Err(format!(
                        "{g} on [{a:.3}, {b:.3}], lambda {lambda:.3}, var {var:.3}, {}: bound error {err:.2e}, witness gap {:.2e}, moment violation {:.2e}",
                        d.as_str(),
                        chk.expectation_gap,
                        chk.max_constraint_violation
                    ));
                }
            }
        }
    }
    Ok(format!(
        "{count} solves, max bound error {worst:.1e}, max witness gap {worst_witness:.1e}, max hyperplane residual {worst_hyper:.1e}"
    ))
}

fn sweep_failures(rows: &[SweepRow]) -> (usize, Vec<String>) {
    let mut compared = 0;
    let mut bad = Vec::new();
    for r in rows {
        for (name, v, reference, gap) in [
            ("lower", r.lower, r.lower_ref, r.gap_lower),
            ("upper", r.upper, r.upper_ref, r.gap_upper),
        ] {
            let Some(reference) = reference else { continue };
            compared += 1;
            if gap.is_none_or(|g| !(g <= TOL_SWEEP)) {
                bad.push(format!("s={:.2} {name} {:?} vs {reference:.6}", r.param, v));
            }
        }
    }
    (compared, bad)
}

fn sweeps() -> Outcome {
    let opts = RunOptions::default();
    let mgf = sweep_config(
        &config("mgf.json"),
        &SweepSpec {
            param: "s".into(),
            from: -2.0,
            to: 2.0,
            steps: 81,
        },
        opts,
    )
    .map_err(|e| e.to_string())?;
    let pm = sweep_config(
        &config("power_mean.json"),
        &SweepSpec {
            param: "s".into(),
            from: -3.0,
            to: 5.0,
            steps: 81,
        },
        opts,
    )
    .map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    for r in mgf.iter().filter(|r| r.param > 0.0) {
        if r.upper != Some(f64::INFINITY) {
            problems.push(format!("mgf s={:.2} upper {:?} not +inf", r.param, r.upper));
        }
    }
    for r in pm.iter().filter(|r| r.param > 2.0 + 1e-9) {
        if r.upper != Some(f64::INFINITY) {
            problems.push(format!("power mean s={:.2} upper {:?} not absent", r.param, r.upper));
        }
    }
    let (mgf_n, mgf_bad) = sweep_failures(&mgf);
    let (pm_n, pm_bad) = sweep_failures(&pm);
    let summary = format!(
        "mgf {}/{mgf_n} within tolerance, power mean {}/{pm_n} within tolerance",
        mgf_n - mgf_bad.len(),
        pm_n - pm_bad.len()
    );
    problems.extend(mgf_bad);
    problems.extend(pm_bad);
    if problems.is_empty() {
        Ok(summary)
    } else {
        let shown: Vec<&str> = problems.iter().take(6).map(String::as_str).collect();
        Err(format!("{summary}; e.g. {}", shown.join("; ")))
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pool1 = ["x1", "x1^2", "exp(x1)", "x1^3", "max(x1, 0)"];
    let pool2 = ["x1", "x2", "x1*x2", "x1^2 + x2", "exp(x1 - x2)", "x2^2"];
    let params = SolverParams {
        tol_gap_abs: 1e-10,
        tol_gap_rel: 1e-12,
        ..SolverParams::default()
    };
    let (mut worst, mut worst_enum, mut enumerated, mut max_atoms) = (0.0f64, 0.0f64, 0, 0);
    for case in 0..30 {
        let n = 1 + case % 2;
        let m = 1 + rng.random_range(0..3usize);
        let npts = if case % 3 == 0 { rng.random_range(m + 3..=25) } else { rng.random_range(26..=200) };
        let pts: Vec<Vec<f64>> = (0..npts)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let pool: &[&str] = if n == 1 { &pool1 } else { &pool2 };
        let mut fs: Vec<&str> = pool.to_vec();
        for i in (1..fs.len()).rev() {
            fs.swap(i, rng.random_range(0..=i));
        }
        fs.truncate(m);
        let g = if n == 1 { "exp(x1) - x1^4" } else { "exp(x1) + x2^3 - x1*x2^2" };
        // φ from a strictly positive measure on every point is interior
        let w: Vec<f64> = (0..npts).map(|_| rng.random_range(0.5..1.5)).collect();
        let total: f64 = w.iter().sum();
        let exprs: Vec<_> = fs.iter().map(|f| parse_expr(f, n).unwrap()).collect();
        let phi: Vec<f64> = exprs
            .iter()
            .map(|e| pts.iter().zip(&w).map(|(x, wi)| wi * e.eval(x).unwrap()).sum::<f64>() / total)
            .collect();
        let spec: Vec<(&str, f64)> = fs.iter().copied().zip(phi.iter().copied()).collect();
        for d in [Direction::Lower, Direction::Upper] {
            let p = problem(n, SupportSet::points(pts.clone()), &spec, g, d);
            let lp = lp_bound(&p, &pts, d).map_err(|e| format!("case {case}: {e}"))?;
            max_atoms = max_atoms.max(lp.measure.len());
            if lp.measure.len() > m + 1 {
                return Err(format!("case {case}: LP measure has {} atoms, m = {m}", lp.measure.len()));
            }
            let r = solve_dual(&p, &params).unwrap();
            let err = (r.bound.ok_or(format!("case {case}: no bound ({:?})", r.status))? - lp.value).abs();
            worst = worst.max(err);
            if err > TOL_ORACLE {
                return Err(format!("case {case} ({n}-d, m={m}, {npts} points, {}): dual vs LP {err:.2e}", d.as_str()));
            }
            if npts <= 25 {
                let e = enumerate_bound(&p, &pts, m + 1, d).map_err(|e| e.to_string())?;
                worst_enum = worst_enum.max((e - lp.value).abs());
                enumerated += 1;
                if (e - lp.value).abs() > TOL_ENUMERATION {
                    return Err(format!("case {case}: LP {} vs enumeration {e}", lp.value));
                }
            }
        }
    }
    Ok(format!(
        "max dual-LP difference {worst:.1e}; {enumerated} enumerations, max difference {worst_enum:.1e}; max atoms {max_atoms}"
    ))
}

fn subgradient_inequality() -> Result<String, String> {
    let p = problem(
        2,
        SupportSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]),
        &[("x1", 0.0), ("x1*x2", 0.5)],
        "exp(x1) + exp(x2)",
        Direction::Upper,
    );
    let opts = InnerOptions {
        grid_res: 33,
        refine_iters: 0,
        ..InnerOptions::default()
    };
    let stage = truncation_stage(&p.support, 0).unwrap();
    let solver = InnerSolver::new(&p, stage, &[], opts).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = f64::INFINITY;
    for _ in 0..60 {
        for d in [Direction::Lower, Direction::Upper] {
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.random_range(-5.0..5.0)).collect();
            let fa = solver.evaluate(&a, d);
            let fb = solver.evaluate(&b, d);
            let sg = subgradient_from(&fa, d);
            let lin: f64 = fa.value + sg.iter().zip(b.iter().zip(&a)).map(|(g, (x, y))| g * (x - y)).sum::<f64>();
            let slack = fb.value - lin;
            worst = worst.min(slack);
            if slack < -TOL_SUBGRADIENT * (1.0 + fb.value.abs()) {
                return Err(format!("F(b) = {} below linearisation {lin}", fb.value));
            }
        }
    }
    Ok(format!("120 pairs, min slack {worst:.1e}"))
}

fn weak_duality() -> Result<String, String> {
    let cases = [
        problem(
            2,
            SupportSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]),
            &[("x1", 0.0), ("x1*x2", 0.5)],
            "exp(x1) + exp(x2)",
            Direction::Upper,
        ),
        problem(1, SupportSet::interval(-2.0, 2.0), &[("x1", 0.0), ("x1^2", 1.0)], "x1^4", Direction::Lower),
        problem(1, SupportSet::interval(0.0, 3.0), &[("x1", 1.0), ("x1^2", 1.5)], "exp(x1)", Direction::Upper),
    ];
    let mut checks = 0usize;
    let mut worst: f64 = f64::INFINITY;
    for p in &cases {
        for d in [Direction::Lower, Direction::Upper] {
            let p = p.with_direction(d);
            let s = d.sign();
            let r = solve_dual(&p, &SolverParams::default()).unwrap();
            let stage = truncation_stage(&p.support, 0).unwrap();
            // witness grids are sub-grids of the solver's 129-point grid
            let mut witnesses = Vec::new();
            for res in [9, 17, 33, 65] {
                let grid = sharpbound::inner::support_grid(&stage, res);
                for wd in [Direction::Lower, Direction::Upper] {
                    if let Ok(sol) = lp_bound(&p, &grid, wd) {
                        witnesses.push(sol.measure);
                    }
                }
            }
            if witnesses.is_empty() || r.history.is_empty() {
                return Err("no witnesses or no history".into());
            }
            for mu in &witnesses {
                let eg = measure_expectation(mu, &p.objective).unwrap();
                for h in &r.history {
                    let slack = h.value - s * eg;
                    worst = worst.min(slack);
                    checks += 1;
                    if slack < -TOL_WEAK_DUALITY * (1.0 + eg.abs()) {
                        return Err(format!("iterate value {} below witness {}", h.value, s * eg));
                    }
                }
            }
        }
    }
    Ok(format!("{checks} iterate/witness pairs, min slack {worst:.1e}"))
}

fn stage_monotonicity() -> Result<String, String> {
    let mut runs = vec![("markov", solve_config("markov.json", &[]))];
    for s in [-1.0, 0.5] {
        let base = config("mgf.json")
            .resolve_with(&BTreeMap::from([("s".to_string(), s)]))
            .unwrap();
        let params = SolverParams {
            stage_policy: StagePolicy::All,
            ..base.solver.clone()
        };
        for d in [Direction::Lower, Direction::Upper] {
            let r = solve_dual(&base.problem.with_direction(d), &params).unwrap();
            runs.push(("mgf", r));
        }
    }
    let mut pairs = 0;
    for (name, r) in &runs {
        let s = r.direction.sign();
        let bounds: Vec<(f64, f64)> = r
            .stages
            .iter()
            .filter_map(|st| st.bound.map(|b| (b, st.gap.unwrap_or(0.0))))
            .collect();
        for w in bounds.windows(2) {
            let ((b0, g0), (b1, g1)) = (w[0], w[1]);
            pairs += 1;
            if b1.is_finite() && s * (b1 - b0) < -(g0 + g1 + 1e-9 * (1.0 + b0.abs())) {
                return Err(format!("{name} {}: stage bound moved inward {b0} -> {b1}", r.direction.as_str()));
            }
        }
    }
    Ok(format!("{} runs, {pairs} successive stage pairs", runs.len()))
}

fn three_point_matching() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..1.0)).collect();
        let z: f64 = raw.iter().sum();
        let tp = ThreePointParam {
            p: [raw[0] / z, raw[1] / z, raw[2] / z],
            theta: rng.random_range(0.0..std::f64::consts::TAU),
            lambda: rng.random_range(-3.0..3.0),
            sigma: rng.random_range(0.1..3.0),
        };
        let mu = tp.measure();
        let mean: f64 = mu.atoms.iter().zip(&mu.weights).map(|(x, w)| w * x[0]).sum();
        let var: f64 = mu.atoms.iter().zip(&mu.weights).map(|(x, w)| w * (x[0] - mean).powi(2)).sum();
        worst = worst.max((mean - tp.lambda).abs()).max((var - tp.sigma * tp.sigma).abs());
    }
    check(worst <= TOL_THREE_POINT, format!("1000 parameters, max moment error {worst:.1e}"))
}

fn property_suite() -> Outcome {
    let parts = [
        ("subgradient", subgradient_inequality()),
        ("weak duality", weak_duality()),
        ("stage monotonicity", stage_monotonicity()),
        ("three-point", three_point_matching()),
    ];
    let mut ok = true;
    let mut out = Vec::new();
    for (name, r) in parts {
        match r {
            Ok(d) => out.push(format!("{name}: {d}")),
            Err(d) => {
                ok = false;
                out.push(format!("{name} FAILED: {d}"));
            }
        }
    }
    check(ok, out.join("; "))
}

fn feasibility() -> Outcome {
    let interval = SupportSet::interval(0.0, 1.0);
    let sym = SupportSet::interval(-1.0, 1.0);
    let square = SupportSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]);
    let cases: Vec<(ProblemSpec, &str)> = vec![
        (problem(1, interval.clone(), &[("x1", 0.5)], "x1", Direction::Upper), "feasible"),
        (problem(1, interval.clone(), &[("x1", 2.0)], "x1", Direction::Upper), "infeasible"),
        (problem(1, interval.clone(), &[("x1", -0.25)], "x1", Direction::Upper), "infeasible"),
        (problem(1, interval.clone(), &[("x1", 1.0 - 5e-9)], "x1", Direction::Upper), "boundary"),
        (problem(1, interval, &[("x1", 5e-9)], "x1", Direction::Upper), "boundary"),
        (problem(1, sym.clone(), &[("x1", 0.0), ("x1^2", 0.5)], "x1^4", Direction::Upper), "feasible"),
        (problem(1, sym.clone(), &[("x1", 0.0), ("x1^2", 1.5)], "x1^4", Direction::Upper), "infeasible"),
        (problem(1, sym, &[("x1", 0.0), ("x1^2", 1.0 - 5e-9)], "x1^4", Direction::Upper), "boundary"),
        (problem(2, square.clone(), &[("x1", 0.5), ("x2", 0.5)], "x1*x2", Direction::Upper), "feasible"),
        (problem(2, square, &[("x1", 1.5), ("x2", 0.5)], "x1*x2", Direction::Upper), "infeasible"),
    ];
    let opts = InnerOptions::default();
    let mut counts = [0usize; 3];
    for (i, (p, want)) in cases.iter().enumerate() {
        let rep = check_feasibility(p, opts.grid_res).map_err(|e| e.to_string())?;
        let got = match &rep.status {
            FeasibilityStatus::Feasible { .. } => "feasible",
            FeasibilityStatus::Boundary { .. } => "boundary",
            FeasibilityStatus::Infeasible { .. } => "infeasible",
        };
        if got != *want {
            return Err(format!("case {i}: expected {want}, got {got} ({:?})", rep.status));
        }
        if let FeasibilityStatus::Infeasible { alpha, .. } = &rep.status {
            let stage = truncation_stage(&p.support, 0).unwrap();
            let solver = InnerSolver::new(p, stage, &[], opts).unwrap();
            let phi = p.phi();
            for f in &solver.image().f {
                let v: f64 = alpha.iter().zip(f.iter().zip(&phi)).map(|(a, (fi, ph))| a * (fi - ph)).sum();
                if !(v > 0.0) {
                    return Err(format!("case {i}: certificate value {v} at a grid point"));
                }
            }
            counts[2] += 1;
        } else if got == "feasible" {
            counts[0] += 1;
        } else {
            counts[1] += 1;
        }
    }
    Ok(format!(
        "{} feasible, {} boundary, {} infeasible with valid certificates",
        counts[0], counts[1], counts[2]
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("variance range", variance_range),
        ("fourth moment lower bound", fourth_moment),
        ("markov", markov),
        ("jarzynski", jarzynski),
        ("two-variable example", two_variable),
        ("jensen gap cross-validation", jensen_cross_validation),
        ("mgf and power-mean sweeps", sweeps),
        ("oracle equivalence", oracle_equivalence),
        ("property suite", property_suite),
        ("feasibility", feasibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
