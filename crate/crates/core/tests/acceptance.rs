//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL` line with the measured quantities.
//!
//! Run with `cargo test -p hb-polyak --test acceptance -- --nocapture
//! --test-threads 1` to see the lines in order.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hb_polyak::harness::{error_orthogonality, gradient_orthogonality, run_methods};
use hb_polyak::krylov_oracle::instance_optimality_report;
use hb_polyak::par::Execution;
use hb_polyak::polynomial_view::{
    measure_from_problem, norm_sq, optimal_polynomials, SpectralMeasure,
};
use hb_polyak::solvers::{cg_classic, gd_optimal_step, run_partial, Trajectory};
use hb_polyak::{
    make_problem, run, Error, Method, QPolynomial, QuadraticProblem, RunSettings, SpectrumSpec,
    XStar,
};

fn report(n: u32, pass: bool, detail: &str, elapsed: Duration) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {n}: {verdict} | {detail} | {:.3} s",
        elapsed.as_secs_f64()
    );
}

/// Harness convention: `x⋆ = 0`, `f⋆ = 0`, seeded start at distance 10.
fn instance(spec: SpectrumSpec) -> (QuadraticProblem, DVector<f64>) {
    let p = make_problem(&spec, XStar::Zero, 0.0).unwrap();
    let x0 = p.default_start();
    (p, x0)
}

fn with_iterates() -> RunSettings {
    RunSettings {
        record_iterates: true,
        ..Default::default()
    }
}

fn excess_at(traj: &Trajectory, t: usize) -> f64 {
    traj.records.get(t).unwrap_or_else(|| traj.last()).excess
}

fn competitors() -> Vec<Method> {
    vec![
        Method::GdConstant { gamma: None },
        Method::GdPolyak,
        Method::GdPolyak2x,
        Method::HbConstant {
            gamma: None,
            m: None,
        },
        Method::Chebyshev,
    ]
}

#[test]
fn criterion_1_projection_equivalence() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let (p, x0) = instance(SpectrumSpec::geometric(25, 1.0, 10.0, seed));
        let traj = run(&Method::HbPolyak, &p, &x0, 25, &with_iterates()).unwrap();
        let dev = instance_optimality_report(&p, &x0, 25, &QPolynomial::one(), &traj).unwrap();
        worst = dev.iter().map(|d| d.deviation).fold(worst, f64::max);
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-6 && elapsed < Duration::from_secs(1);
    report(
        1,
        pass,
        &format!("d=25 κ=10 geometric, 3 seeds: max_t≤25 ‖x_t−x_t^oracle‖/‖x₀−x⋆‖ = {worst:.2e} (tol 1e-6, < 1 s)"),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_2_finite_time_convergence() {
    let methods = [
        Method::HbPolyak,
        Method::QMin(QPolynomial::one()),
        Method::QMin(QPolynomial::monomial(1)),
        Method::QMin(QPolynomial::monomial(2)),
    ];
    let start = Instant::now();
    let mut slowest = Duration::ZERO;
    let mut cells = Vec::new();
    let mut pass = true;
    for (kind, make) in [
        (
            "geometric",
            SpectrumSpec::geometric as fn(usize, f64, f64, u64) -> SpectrumSpec,
        ),
        ("uniform", SpectrumSpec::uniform),
    ] {
        for kappa in [2.0, 10.0, 30.0, 100.0] {
            let mut worst: f64 = 0.0;
            for seed in 0..3 {
                let t0 = Instant::now();
                let (p, x0) = instance(make(10, 1.0, kappa, seed));
                let e0 = (&x0 - p.x_star()).norm();
                for m in &methods {
                    let traj = run(m, &p, &x0, 10, &RunSettings::default()).unwrap();
                    worst = worst.max(traj.dist_at(10) / e0);
                }
                slowest = slowest.max(t0.elapsed());
            }
            pass &= worst <= 1e-9;
            cells.push(format!("{kind} κ={kappa}: {worst:.1e}"));
        }
    }
    pass &= slowest < Duration::from_millis(100);
    report(
        2,
        pass,
        &format!(
            "d=10, max ‖x_10−x⋆‖/‖x₀−x⋆‖ over hb-polyak and qmin Q∈{{1,X,X²}}, 3 seeds (tol 1e-9): {}; slowest instance {:.1} ms (< 100 ms)",
            cells.join(", "),
            slowest.as_secs_f64() * 1e3
        ),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_3_cg_correspondence() {
    let start = Instant::now();
    let (p, x0) = instance(SpectrumSpec::geometric(25, 1.0, 10.0, 1));
    let qmin = run(
        &Method::QMin(QPolynomial::monomial(1)),
        &p,
        &x0,
        50,
        &RunSettings::default(),
    )
    .unwrap();
    let cg = cg_classic(&p, &x0, 50).unwrap();
    let mut worst_rel: f64 = 0.0;
    let mut ok = true;
    for t in 0..=50 {
        let (a, b) = (excess_at(&qmin, t), excess_at(&cg, t));
        let diff = (a - b).abs();
        ok &= diff <= (1e-8 * b.abs()).max(1e-14);
        if b.abs() > 1e-14 {
            worst_rel = worst_rel.max(diff / b.abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = ok && elapsed < Duration::from_millis(100);
    report(
        3,
        pass,
        &format!("d=25 κ=10: worst relative excess gap where f−f⋆ > 1e-14 = {worst_rel:.2e} (tol 1e-8, absolute floor 1e-14, < 100 ms)"),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_4_instance_optimality() {
    let start = Instant::now();
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut fastest = true;
    for seed in 0..5 {
        let (p, x0) = instance(SpectrumSpec::geometric(25, 1.0, 10.0, seed));
        let e0 = (&x0 - p.x_star()).norm();
        let adaptive = run(&Method::HbPolyak, &p, &x0, 50, &RunSettings::default()).unwrap();
        let cg = run(&Method::Cg, &p, &x0, 50, &RunSettings::default()).unwrap();
        for m in competitors() {
            let other = run(&m, &p, &x0, 50, &RunSettings::default()).unwrap();
            for t in 0..=50 {
                worst = worst.max((adaptive.dist_at(t) - other.dist_at(t)) / e0);
            }
            let t = 20;
            fastest &= adaptive.dist_at(t) < other.dist_at(t) && cg.dist_at(t) < other.dist_at(t);
        }
    }
    let pass = worst <= 1e-8 && fastest;
    report(
        4,
        pass,
        &format!(
            "5 seeds d=25 κ=10 T=50: max_t (‖x_t^hb-polyak−x⋆‖ − ‖x_t^other−x⋆‖)/‖x₀−x⋆‖ = {worst:.2e} (tol 1e-8); \
             hb-polyak and CG ahead of all five at t=20: {fastest}"
        ),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_5_natural_step_identity() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (d, kappa, seed) in [(25, 10.0, 1), (100, 1e3, 2), (10, 1e5, 3)] {
        let (p, x0) = instance(SpectrumSpec::geometric(d, 1.0, kappa, seed));
        let h_opt = gd_optimal_step(p.mu(), p.l());
        for m in [
            Method::Chebyshev,
            Method::HbConstant {
                gamma: None,
                m: None,
            },
        ] {
            let traj = run(&m, &p, &x0, 60, &RunSettings::default()).unwrap();
            for r in traj.records.iter().filter(|r| r.h.is_finite()) {
                if matches!(m, Method::Chebyshev) && r.t == 0 {
                    continue;
                }
                worst = worst.max(((r.h - h_opt) / h_opt).abs());
            }
        }
    }
    let pass = worst <= 1e-12;
    report(
        5,
        pass,
        &format!("Chebyshev (t≥1) and stationary HB: max |h_t − 2/(L+μ)|/(2/(L+μ)) = {worst:.2e} (tol 1e-12)"),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_6_orthogonality() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let (mut worst_grad, mut worst_err): (f64, f64) = (0.0, 0.0);
    for (kind, make) in [
        (
            "geometric",
            SpectrumSpec::geometric as fn(usize, f64, f64, u64) -> SpectrumSpec,
        ),
        ("uniform", SpectrumSpec::uniform),
    ] {
        for d in [5, 10, 15, 20, 25] {
            for kappa in [2.0, 10.0, 100.0] {
                let (mut g, mut e): (f64, f64) = (0.0, 0.0);
                for seed in 0..3 {
                    let (p, x0) = instance(make(d, 1.0, kappa, seed));
                    let cg = run(
                        &Method::QMin(QPolynomial::monomial(1)),
                        &p,
                        &x0,
                        d,
                        &with_iterates(),
                    )
                    .unwrap();
                    g = gradient_orthogonality(&p, cg.iterates.as_ref().unwrap(), d)
                        .into_iter()
                        .fold(g, |a, (_, v)| a.max(v));
                    let hb = run(&Method::HbPolyak, &p, &x0, d, &with_iterates()).unwrap();
                    e = error_orthogonality(&p, hb.iterates.as_ref().unwrap(), d)
                        .into_iter()
                        .fold(e, |a, (_, v)| a.max(v));
                }
                worst_grad = worst_grad.max(g);
                worst_err = worst_err.max(e);
                if g > 1e-8 || e > 1e-8 {
                    failures.push(format!(
                        "{kind} d={d} κ={kappa} (grad {g:.1e}, err {e:.1e})"
                    ));
                }
            }
        }
    }
    let pass = failures.is_empty();
    report(
        6,
        pass,
        &format!(
            "d∈{{5..25}} κ∈{{2,10,100}} geometric+uniform, 3 seeds: worst Q=X gradient residual {worst_grad:.2e}, \
             worst Q=1 error residual {worst_err:.2e} (tol 1e-8); {} of 30 cells over tolerance{}{}",
            failures.len(),
            if failures.is_empty() { "" } else { ": " },
            failures.join(", ")
        ),
        start.elapsed(),
    );
    assert!(pass);
}

/// `min Σ w_i P(λ_i)²` over `deg P ≤ t`, `P(0) = 1`, by least squares on the
/// weighted Vandermonde system.
fn direct_minimum(atoms: &[(f64, f64)], t: usize) -> f64 {
    if t == 0 {
        return atoms.iter().map(|a| a.1).sum();
    }
    let n = atoms.len();
    let a = DMatrix::from_fn(n, t, |i, k| {
        atoms[i].1.sqrt() * atoms[i].0.powi(k as i32 + 1)
    });
    let b = DVector::from_fn(n, |i, _| -atoms[i].1.sqrt());
    let coef = a.clone().svd(true, true).solve(&b, 1e-300).unwrap();
    atoms
        .iter()
        .map(|&(l, w)| {
            let p = 1.0 + (0..t).map(|k| coef[k] * l.powi(k as i32 + 1)).sum::<f64>();
            w * p * p
        })
        .sum()
}

#[test]
fn criterion_7_polynomial_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut measures: Vec<Vec<(f64, f64)>> = (0..300)
        .map(|_| {
            let n = rng.random_range(1..=5);
            (0..n)
                .map(|_| (rng.random_range(0.05..10.0), rng.random_range(0.1..3.0)))
                .collect()
        })
        .collect();
    let (p, x0) = instance(SpectrumSpec::explicit(vec![0.5, 1.0, 2.0, 4.0, 8.0], 9));
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for q in [
        QPolynomial::one(),
        QPolynomial::monomial(1),
        QPolynomial::monomial(2),
    ] {
        let from_problem = measure_from_problem(&p, &x0, &q).unwrap();
        measures.push(from_problem.atoms().to_vec());
        for base in &measures {
            let weighted: Vec<(f64, f64)> = base.iter().map(|&(l, w)| (l, w * q.eval(l))).collect();
            let m_q = SpectralMeasure::new(weighted.clone()).unwrap();
            let polys = optimal_polynomials(&m_q, 3).unwrap();
            for (t, poly) in polys.iter().enumerate().take(m_q.support_size()) {
                let rec = norm_sq(poly, &m_q);
                let direct = direct_minimum(&weighted, t);
                worst = worst.max((rec - direct).abs() / direct);
                compared += 1;
            }
        }
        measures.pop();
    }
    let pass = worst <= 1e-8;
    report(
        7,
        pass,
        &format!(
            "{compared} (measure, Q, t) cases, ≤5 atoms, t≤3 below the support size: \
             max relative gap recursion vs least squares = {worst:.2e} (tol 1e-8)"
        ),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_8_fig2_reproduction() {
    let start = Instant::now();
    let (p, x0) = instance(SpectrumSpec::geometric(1000, 1.0, 1e5, 1));
    let methods = Method::registered();
    let runs = run_methods(
        &methods,
        &p,
        &x0,
        2000,
        &RunSettings::default(),
        Execution::Auto,
    );
    let elapsed = start.elapsed();
    let final_excess = |m: &Method| {
        let r = runs.iter().find(|r| &r.method == m).unwrap();
        assert!(r.error.is_none(), "{m}: {:?}", r.error);
        r.trajectory.last().excess
    };
    let baselines = [
        Method::GdConstant { gamma: None },
        Method::GdPolyak,
        Method::GdPolyak2x,
        Method::HbConstant {
            gamma: None,
            m: None,
        },
    ];
    let mut worst_ratio: f64 = 0.0;
    for fast in [Method::HbPolyak, Method::Cg] {
        for slow in &baselines {
            worst_ratio = worst_ratio.max(final_excess(&fast) / final_excess(slow));
        }
    }
    let summary: Vec<String> = runs
        .iter()
        .map(|r| format!("{} {:.1e}", r.method, r.trajectory.last().excess))
        .collect();
    let pass = worst_ratio <= 1e-6 && elapsed < Duration::from_secs(60);
    report(
        8,
        pass,
        &format!(
            "d=1000 κ=1e5 T=2000: max final-excess ratio (hb-polyak, CG) / (GD×3, HB-constant) = {worst_ratio:.2e} (tol 1e-6); \
             final excess: {}; d-step convergence not asserted",
            summary.join(", ")
        ),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_9_degenerate_inputs() {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    let mut all_methods = Method::registered();
    all_methods.extend([
        Method::QMin(QPolynomial::one()),
        Method::QMin(QPolynomial::monomial(1)),
        Method::QMin(QPolynomial::monomial(2)),
    ]);

    // x₀ = x⋆: nothing to do, no division by zero.
    let p = make_problem(
        &SpectrumSpec::geometric(12, 1.0, 10.0, 4),
        XStar::Random,
        1.5,
    )
    .unwrap();
    let x0 = p.x_star().clone();
    let mut ok = true;
    for m in &all_methods {
        let (traj, err) = run_partial(m, &p, &x0, 10, &RunSettings::default());
        let r = traj.last();
        ok &= err.is_none() && traj.converged && traj.iterations() == 0;
        ok &= r.dist_sq == 0.0 && r.excess == 0.0 && r.grad_norm_sq == 0.0;
    }
    pass &= ok;
    notes.push(format!(
        "x₀=x⋆ converges at t=0 for all {} methods: {ok}",
        all_methods.len()
    ));

    // H = μI: every momentum method lands on x⋆ after one step.
    let p = make_problem(&SpectrumSpec::explicit(vec![2.5; 8], 5), XStar::Random, 0.0).unwrap();
    let x0 = p.default_start();
    let e0 = (&x0 - p.x_star()).norm();
    let mut ok = true;
    let momentum: Vec<&Method> = all_methods
        .iter()
        .filter(|m| {
            !matches!(
                m,
                Method::GdConstant { .. } | Method::GdPolyak | Method::GdPolyak2x
            )
        })
        .collect();
    for m in &momentum {
        let (traj, err) = run_partial(m, &p, &x0, 10, &RunSettings::default());
        ok &= err.is_none()
            && traj.converged
            && traj.iterations() == 1
            && traj.dist_at(1) <= 1e-14 * e0;
    }
    pass &= ok;
    notes.push(format!(
        "H=μI one-step convergence for {} momentum methods: {ok}",
        momentum.len()
    ));

    // Supplied f⋆ above the attainable minimum: Polyak methods reach f < f⋆
    // and stop with the invalid-f⋆ error.
    let (p, x0) = instance(SpectrumSpec::geometric(25, 1.0, 10.0, 1));
    let polyak = [Method::GdPolyak, Method::GdPolyak2x, Method::HbPolyak];
    let mut ok = true;
    let settings = RunSettings {
        f_star: Some(p.f_star() + 1e-2),
        ..Default::default()
    };
    for m in &polyak {
        let (traj, err) = run_partial(m, &p, &x0, 500, &settings);
        ok &= matches!(
            err.as_ref().map(Error::root),
            Some(Error::InvalidFStar { .. })
        );
        ok &= traj
            .records
            .iter()
            .all(|r| r.dist_sq.is_finite() && r.excess.is_finite());
    }
    pass &= ok;
    notes.push(format!(
        "f⋆ supplied above the true minimum → invalid-f⋆ error: {ok}"
    ));

    // Supplied f⋆ below the minimum: f − f⋆ stays positive, so the run must
    // either finish with finite values or stop on a clean numerical error.
    let settings = RunSettings {
        f_star: Some(p.f_star() - 1e-2),
        ..Default::default()
    };
    let mut ok = true;
    for m in &polyak {
        let (traj, err) = run_partial(m, &p, &x0, 500, &settings);
        ok &= traj.records.iter().all(|r| r.dist_sq.is_finite());
        ok &= err.as_ref().is_none_or(Error::is_numerical_degeneracy);
    }
    pass &= ok;
    notes.push(format!(
        "f⋆ supplied below the true minimum → finite run or clean error: {ok}"
    ));

    report(9, pass, &notes.join("; "), start.elapsed());
    assert!(pass);
}
