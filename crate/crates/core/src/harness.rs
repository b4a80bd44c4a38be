//! Experiment driver behind the `run` and `verify` subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::krylov_oracle::instance_optimality_report;
use crate::par::{self, Execution};
use crate::quadratic_model::{
    make_problem, read_spectrum_file, QuadraticProblem, SpectrumSpec, XStar, DEFAULT_START_RADIUS,
};
use crate::solvers::{
    gd_optimal_step, run_partial, Method, QPolynomial, RunSettings, Trajectory,
    DEFAULT_REL_GRAD_TOL,
};

pub const CSV_HEADER: [&str; 9] = [
    "method",
    "t",
    "dist_sq",
    "excess",
    "grad_norm_sq",
    "h_t",
    "m_t",
    "gamma_t",
    "error",
];

/// Largest dimension `verify` accepts; the oracle is cubic in it.
pub const VERIFY_MAX_DIM: usize = 50;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumChoice {
    Geometric,
    Uniform,
    File(PathBuf),
}

impl FromStr for SpectrumChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Self::Geometric),
            "uniform" => Ok(Self::Uniform),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(Self::File(path.into())),
                _ => Err(Error::Validation(format!(
                    "unknown spectrum {s:?}; expected geometric, uniform or file:<path>"
                ))),
            },
        }
    }
}

impl std::fmt::Display for SpectrumChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Geometric => f.write_str("geometric"),
            Self::Uniform => f.write_str("uniform"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// `all` or a comma-separated list of registered names.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s.trim() == "all" {
        return Ok(Method::registered());
    }
    let methods = s
        .split(',')
        .filter(|m| !m.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Method>>>()?;
    if methods.is_empty() {
        return Err(Error::Validation("no methods given".into()));
    }
    Ok(methods)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub condition_number: f64,
    pub spectrum: SpectrumChoice,
    pub seed: u64,
    pub iters: usize,
    pub methods: Vec<Method>,
    pub grad_tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub plot: bool,
    pub f_star: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 25,
            condition_number: 10.0,
            spectrum: SpectrumChoice::Geometric,
            seed: 1,
            iters: 50,
            methods: Method::registered(),
            grad_tol: None,
            out: None,
            plot: false,
            f_star: 0.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.condition_number >= 1.0) || !self.condition_number.is_finite() {
            return Err(Error::Validation(format!(
                "condition number must be >= 1, got {}",
                self.condition_number
            )));
        }
        if self.dim < 1 && !matches!(self.spectrum, SpectrumChoice::File(_)) {
            return Err(Error::Validation("dimension must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Validation("no methods given".into()));
        }
        if let Some(tol) = self.grad_tol {
            if !(tol >= 0.0) {
                return Err(Error::Validation(format!(
                    "grad tolerance must be >= 0, got {tol}"
                )));
            }
        }
        Ok(())
    }

    /// Problem with `μ = 1`, `L = cond` (or the file's spectrum), `x⋆ = 0`.
    pub fn spectrum_spec(&self) -> Result<SpectrumSpec> {
        Ok(match &self.spectrum {
            SpectrumChoice::File(path) => {
                let values = read_spectrum_file(path)?;
                if values.len() != self.dim {
                    return Err(Error::Validation(format!(
                        "{} lists {} eigenvalues but --dim is {}",
                        path.display(),
                        values.len(),
                        self.dim
                    )));
                }
                SpectrumSpec::explicit(values, self.seed)
            }
            SpectrumChoice::Geometric | SpectrumChoice::Uniform if self.dim == 1 => {
                if self.condition_number != 1.0 {
                    return Err(Error::Validation(
                        "a one-dimensional problem has condition number 1".into(),
                    ));
                }
                SpectrumSpec::geometric(1, 1.0, 1.0, self.seed)
            }
            SpectrumChoice::Geometric => {
                SpectrumSpec::geometric(self.dim, 1.0, self.condition_number, self.seed)
            }
            SpectrumChoice::Uniform => {
                SpectrumSpec::uniform(self.dim, 1.0, self.condition_number, self.seed)
            }
        })
    }

    pub fn build_problem(&self) -> Result<(QuadraticProblem, DVector<f64>)> {
        self.validate()?;
        let p = make_problem(&self.spectrum_spec()?, XStar::Zero, self.f_star)?;
        let x0 = p.default_start();
        Ok((p, x0))
    }

    fn settings(&self, record_iterates: bool) -> RunSettings {
        RunSettings {
            grad_tol: self.grad_tol,
            f_star: None,
            record_iterates,
        }
    }
}

/// One method's outcome within an experiment.
#[derive(Debug)]
pub struct MethodRun {
    pub method: Method,
    pub trajectory: Trajectory,
    pub error: Option<Error>,
}

/// Runs every method over the shared problem, concurrently when possible.
/// Output order is the order of `methods`.
pub fn run_methods(
    methods: &[Method],
    p: &QuadraticProblem,
    x0: &DVector<f64>,
    iters: usize,
    settings: &RunSettings,
    exec: Execution,
) -> Vec<MethodRun> {
    par::map(exec, methods, |m| {
        let (trajectory, error) = run_partial(m, p, x0, iters, settings);
        MethodRun {
            method: m.clone(),
            trajectory,
            error,
        }
    })
}

fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

/// CSV with leading `#` metadata lines, the fixed header, then one row per
/// (method, t). Step fields are empty where undefined: `m_t` at `t = 0` and
/// all of them on the final row. A failed method carries its error on its
/// last row.
pub fn write_csv<W: Write>(
    mut w: W,
    cfg: &ExperimentConfig,
    p: &QuadraticProblem,
    runs: &[MethodRun],
) -> Result<()> {
    writeln!(
        w,
        "# dim={} cond={:e} spectrum={} seed={} iters={} f_star={:e} grad_tol={}",
        p.dim(),
        p.condition_number(),
        cfg.spectrum,
        cfg.seed,
        cfg.iters,
        p.f_star(),
        cfg.grad_tol
            .map(|t| format!("{t:e}"))
            .unwrap_or_else(|| "1e-13*|grad f(x0)|".into()),
    )?;
    writeln!(
        w,
        "# x0 = x* + {DEFAULT_START_RADIUS} * u, u a unit Gaussian direction drawn from seed {} (stream 2); x* = 0",
        cfg.seed
    )?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(CSV_HEADER)?;
    for run in runs {
        let name = run.method.name();
        let n = run.trajectory.records.len();
        for (i, r) in run.trajectory.records.iter().enumerate() {
            let error = match &run.error {
                Some(e) if i + 1 == n => e.to_string(),
                _ => String::new(),
            };
            csv.write_record([
                name.clone(),
                r.t.to_string(),
                fmt_float(r.dist_sq),
                fmt_float(r.excess),
                fmt_float(r.grad_norm_sq),
                fmt_float(r.h),
                if r.t == 0 {
                    String::new()
                } else {
                    fmt_float(r.m)
                },
                fmt_float(r.gamma),
                error,
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug)]
pub struct RunOutcome {
    pub runs: Vec<MethodRun>,
    pub exit_code: i32,
    pub plots: Vec<PathBuf>,
}

/// `run`: solve, write the CSV (to `cfg.out` or `sink`), optionally plot.
pub fn cmd_run<W: Write>(cfg: &ExperimentConfig, sink: W) -> Result<RunOutcome> {
    let (p, x0) = cfg.build_problem()?;
    let runs = run_methods(
        &cfg.methods,
        &p,
        &x0,
        cfg.iters,
        &cfg.settings(false),
        Execution::Auto,
    );
    match &cfg.out {
        Some(path) => write_csv(
            std::io::BufWriter::new(std::fs::File::create(path)?),
            cfg,
            &p,
            &runs,
        )?,
        None => write_csv(sink, cfg, &p, &runs)?,
    }
    let mut plots = Vec::new();
    if cfg.plot {
        let stem = cfg
            .out
            .as_ref()
            .map(|o| o.with_extension(""))
            .unwrap_or_else(|| PathBuf::from("hb-polyak"));
        plots = crate::plot::write_plots(&stem, &runs)?;
    }
    let exit_code = if runs.iter().any(|r| r.error.is_some()) {
        EXIT_DEGENERATE
    } else {
        EXIT_OK
    };
    Ok(RunOutcome {
        runs,
        exit_code,
        plots,
    })
}

// ---------------------------------------------------------------------------
// verify

/// Tolerances of the invariant checks.
pub mod tolerances {
    pub const ORACLE_DEVIATION: f64 = 1e-6;
    pub const Q_GAP: f64 = 1e-8;
    pub const ORTHOGONALITY: f64 = 1e-8;
    pub const MONOTONICITY: f64 = 1e-10;
    pub const INSTANCE_OPTIMALITY: f64 = 1e-8;
    pub const FINITE_TERMINATION: f64 = 1e-9;
    pub const NATURAL_STEP: f64 = 1e-12;
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub method: String,
    /// Worst normalized value observed.
    pub value: f64,
    pub t: usize,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub iterations: usize,
    pub converged: bool,
    /// `‖x_t − x⋆‖/‖x₀ − x⋆‖` at `t = min(T, d)`.
    pub rel_dist_at_d: f64,
    pub final_dist: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub dim: usize,
    pub condition_number: f64,
    pub seed: u64,
    pub iters: usize,
    pub methods: Vec<MethodSummary>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn violations(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_OK
        } else {
            EXIT_VIOLATION
        }
    }
}

fn worst<I: IntoIterator<Item = (usize, f64)>>(name: &str, method: &str, tol: f64, it: I) -> Check {
    let (t, value) = it.into_iter().fold((0, 0.0f64), |acc, (t, v)| {
        if acc.1.is_nan() || !(v.is_nan() || v > acc.1) {
            acc
        } else {
            (t, v)
        }
    });
    Check {
        name: name.into(),
        method: method.into(),
        value,
        t,
        tol,
        pass: value <= tol,
    }
}

/// `max_{s<t≤n} |⟨∇f(x_s), ∇f(x_t)⟩| / (‖∇f(x_s)‖ ‖∇f(x_0)‖)`.
pub fn gradient_orthogonality(
    p: &QuadraticProblem,
    iterates: &[DVector<f64>],
    n: usize,
) -> Vec<(usize, f64)> {
    let grads: Vec<DVector<f64>> = iterates
        .iter()
        .take(n + 1)
        .map(|x| p.grad_f(x).expect("dim"))
        .collect();
    let g0 = grads[0].norm();
    let mut out = Vec::new();
    for t in 1..grads.len() {
        for s in 0..t {
            let denom = grads[s].norm() * g0;
            if denom > 0.0 {
                out.push((t, grads[s].dot(&grads[t]).abs() / denom));
            }
        }
    }
    out
}

/// `max_{s<t≤n} |⟨∇f(x_t), x_s − x⋆⟩| / (‖∇f(x_t)‖ ‖x_0 − x⋆‖)`.
///
/// Iterates that are exact minimizers in exact arithmetic are skipped, since
/// their gradient direction is rounding noise: those with `t ≥ d` (the Krylov
/// space is exhausted) and those whose gradient is below the default stopping
/// threshold `DEFAULT_REL_GRAD_TOL · ‖∇f(x_0)‖`.
pub fn error_orthogonality(
    p: &QuadraticProblem,
    iterates: &[DVector<f64>],
    n: usize,
) -> Vec<(usize, f64)> {
    let e0 = (&iterates[0] - p.x_star()).norm();
    let floor = DEFAULT_REL_GRAD_TOL * p.grad_f(&iterates[0]).expect("dim").norm();
    let mut out = Vec::new();
    for t in 1..iterates.len().min(n + 1).min(p.dim()) {
        let g = p.grad_f(&iterates[t]).expect("dim");
        let denom = g.norm() * e0;
        if !(denom > 0.0) || g.norm() <= floor {
            continue;
        }
        for x_s in &iterates[..t] {
            out.push((t, g.dot(&(x_s - p.x_star())).abs() / denom));
        }
    }
    out
}

/// Runs the adaptive method, the Q-minimizing family, CG and the classical
/// competitors, and checks them against the Krylov oracle and each other.
pub fn verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    use tolerances as tol;

    cfg.validate()?;
    let (p, x0) = cfg.build_problem()?;
    if p.dim() > VERIFY_MAX_DIM {
        return Err(Error::Validation(format!(
            "verify is limited to dim <= {VERIFY_MAX_DIM} (got {})",
            p.dim()
        )));
    }
    let d = p.dim();
    let iters = cfg.iters;
    let horizon = iters.min(d);
    let e0 = (&x0 - p.x_star()).norm();

    let q1 = QPolynomial::one();
    let qx = QPolynomial::monomial(1);
    let qx2 = QPolynomial::monomial(2);
    let subjects: Vec<(Method, QPolynomial)> = vec![
        (Method::HbPolyak, q1.clone()),
        (Method::QMin(q1.clone()), q1.clone()),
        (Method::QMin(qx.clone()), qx.clone()),
        (Method::QMin(qx2.clone()), qx2.clone()),
        (Method::Cg, qx.clone()),
    ];
    let competitors = [
        Method::GdConstant { gamma: None },
        Method::GdPolyak,
        Method::GdPolyak2x,
        Method::HbConstant {
            gamma: None,
            m: None,
        },
        Method::Chebyshev,
    ];
    let all: Vec<Method> = subjects
        .iter()
        .map(|(m, _)| m.clone())
        .chain(competitors.iter().cloned())
        .collect();
    let runs = run_methods(&all, &p, &x0, iters, &cfg.settings(true), Execution::Auto);

    let mut checks = Vec::new();
    for run in &runs {
        if let Some(e) = &run.error {
            checks.push(Check {
                name: format!("run-error: {e}"),
                method: run.method.name(),
                value: f64::INFINITY,
                t: run.trajectory.iterations(),
                tol: 0.0,
                pass: false,
            });
        }
    }

    let reports = par::map(Execution::Auto, &subjects, |(m, q)| {
        let run = runs.iter().find(|r| &r.method == m).expect("ran");
        instance_optimality_report(&p, &x0, iters, q, &run.trajectory)
    });
    for ((method, q), report) in subjects.iter().zip(reports) {
        let report = report?;
        let name = method.name();
        checks.push(worst(
            &format!("oracle-deviation (Q={q})"),
            &name,
            tol::ORACLE_DEVIATION,
            report.iter().map(|r| (r.t, r.deviation)),
        ));
        if matches!(method, Method::Cg) {
            checks.push(worst(
                "q-metric-gap (Q=X)",
                &name,
                tol::Q_GAP,
                report.iter().map(|r| (r.t, r.q_gap.abs())),
            ));
        }
    }

    let traj = |m: &Method| {
        &runs
            .iter()
            .find(|r| &r.method == m)
            .expect("ran")
            .trajectory
    };
    let iterates = |m: &Method| traj(m).iterates.as_deref().expect("recorded");

    for m in [Method::QMin(qx.clone()), Method::Cg] {
        checks.push(worst(
            "gradient-orthogonality",
            &m.name(),
            tol::ORTHOGONALITY,
            gradient_orthogonality(&p, iterates(&m), horizon),
        ));
    }
    for m in [Method::HbPolyak, Method::QMin(q1.clone())] {
        checks.push(worst(
            "error-orthogonality",
            &m.name(),
            tol::ORTHOGONALITY,
            error_orthogonality(&p, iterates(&m), horizon),
        ));
    }

    let adaptive = traj(&Method::HbPolyak);
    checks.push(worst(
        "monotonicity",
        "hb-polyak",
        tol::MONOTONICITY,
        adaptive.records.windows(2).map(|w| {
            let (a, b) = (w[0].dist_sq.sqrt(), w[1].dist_sq.sqrt());
            (w[1].t, if a > 0.0 { (b / a - 1.0).max(0.0) } else { b })
        }),
    ));
    for c in &competitors {
        let other = traj(c);
        checks.push(worst(
            &format!("instance-optimality vs {}", c.name()),
            "hb-polyak",
            tol::INSTANCE_OPTIMALITY,
            (0..=iters).map(|t| (t, ((adaptive.dist_at(t) - other.dist_at(t)) / e0).max(0.0))),
        ));
    }

    let h_opt = gd_optimal_step(p.mu(), p.l());
    for m in [
        Method::Chebyshev,
        Method::HbConstant {
            gamma: None,
            m: None,
        },
    ] {
        let tr = traj(&m);
        checks.push(worst(
            "natural-step",
            &m.name(),
            tol::NATURAL_STEP,
            tr.records
                .iter()
                .filter(|r| r.h.is_finite() && (r.t >= 1 || !matches!(m, Method::Chebyshev)))
                .map(|r| (r.t, ((r.h - h_opt) / h_opt).abs())),
        ));
    }

    let distinct = {
        let mut e = p.eigenvalues().to_vec();
        e.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * p.l());
        e.len()
    };
    if iters >= distinct {
        for (m, _) in &subjects {
            checks.push(worst(
                "finite-termination",
                &m.name(),
                tol::FINITE_TERMINATION,
                [(distinct, traj(m).dist_at(distinct) / e0)],
            ));
        }
    }

    let methods = runs
        .iter()
        .map(|r| MethodSummary {
            method: r.method.name(),
            iterations: r.trajectory.iterations(),
            converged: r.trajectory.converged,
            rel_dist_at_d: if e0 > 0.0 {
                r.trajectory.dist_at(horizon) / e0
            } else {
                0.0
            },
            final_dist: r.trajectory.last().dist_sq.sqrt(),
            error: r.error.as_ref().map(|e| e.to_string()),
        })
        .collect();
    // An unchecked NaN must not pass silently.
    for c in &mut checks {
        c.pass = c.pass && !c.value.is_nan();
    }
    Ok(VerifyReport {
        pass: checks.iter().all(|c| c.pass),
        dim: d,
        condition_number: p.condition_number(),
        seed: cfg.seed,
        iters,
        methods,
        checks,
    })
}

/// Writes the report as pretty JSON.
pub fn write_report(path: Option<&Path>, report: &VerifyReport, sink: impl Write) -> Result<()> {
    let json =
        serde_json::to_string_pretty(report).map_err(|e| Error::Validation(e.to_string()))?;
    match path {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => {
            let mut sink = sink;
            writeln!(sink, "{json}")?;
        }
    }
    Ok(())
}
