//! Iterative methods behind one stepping interface.
//!
//! Every method keeps its iterate in a [`SolverState`] and advances it with a
//! `*_step` function. [`run`] drives a [`Method`] for a number of iterations
//! and records a [`Trajectory`].
//!
//! All Heavy-ball-type updates are written in the natural parametrization
//!
//! ```text
//! x_{t+1} = x_t − (1 + m_t) h_t ∇f(x_t) + m_t (x_t − x_{t−1}),   γ_t = (1 + m_t) h_t
//! ```
//!
//! with `x_{−1} = x_0`, so the first step of every method is a gradient step.

mod cg;
mod qpoly;
mod steps;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::quadratic_model::QuadraticProblem;

pub use cg::{cg_classic, cg_step};
pub use qpoly::{QPolynomial, RecursionCoeffs};
pub use steps::{
    adaptive_hb_step, chebyshev_params, chebyshev_step, gd_constant_step, gd_optimal_step,
    gd_polyak_step, hb_constant_step, hb_stationary_tuning, polyak_stepsize, q_min_hb_step,
};

/// Relative gradient tolerance used when [`RunSettings::grad_tol`] is unset.
pub const DEFAULT_REL_GRAD_TOL: f64 = 1e-13;

/// Guard on the adaptive momentum denominator, relative to its positive term.
pub const DENOM_TOL: f64 = 1e-14;

/// Parameters actually used for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub h: f64,
    pub m: f64,
    pub gamma: f64,
}

impl StepParams {
    pub fn from_natural(h: f64, m: f64) -> Self {
        Self {
            h,
            m,
            gamma: (1.0 + m) * h,
        }
    }

    pub fn from_effective(gamma: f64, m: f64) -> Self {
        Self {
            h: gamma / (1.0 + m),
            m,
            gamma,
        }
    }

    pub fn gradient_step(gamma: f64) -> Self {
        Self {
            h: gamma,
            m: 0.0,
            gamma,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) enum Memory {
    #[default]
    None,
    Adaptive {
        next_m: f64,
    },
    QMin {
        /// `⟨e_{t−1}, H Q(H) e_{t−1}⟩`.
        prev_weighted: f64,
        /// `∇f(x_{t−1}) = H e_{t−1}`.
        prev_grad: DVector<f64>,
    },
    Cg {
        residual: DVector<f64>,
        direction: DVector<f64>,
        residual_sq: f64,
        prev_alpha: f64,
        prev_beta: f64,
    },
}

/// Per-run iterate. `h_curr`, `m_curr` and `gamma_curr` describe the most
/// recent step; before the first step `m_curr = 0` and the others are NaN.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: usize,
    pub x_curr: DVector<f64>,
    pub x_prev: DVector<f64>,
    pub m_curr: f64,
    pub h_curr: f64,
    pub gamma_curr: f64,
    pub f_curr: f64,
    pub grad_curr: DVector<f64>,
    pub converged: bool,
    pub grad_tol: f64,
    pub(crate) memory: Memory,
}

impl SolverState {
    /// `grad_tol = None` selects `1e−13 · ‖∇f(x₀)‖`.
    pub fn new(p: &QuadraticProblem, x0: DVector<f64>, grad_tol: Option<f64>) -> Result<Self> {
        if x0.len() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                found: x0.len(),
            });
        }
        let (f, g) = p.f_and_grad(&x0);
        let grad_tol = grad_tol.unwrap_or(DEFAULT_REL_GRAD_TOL * g.norm());
        let converged = g.norm() <= grad_tol;
        Ok(Self {
            t: 0,
            x_prev: x0.clone(),
            x_curr: x0,
            m_curr: 0.0,
            h_curr: f64::NAN,
            gamma_curr: f64::NAN,
            f_curr: f,
            grad_curr: g,
            converged,
            grad_tol,
            memory: Memory::None,
        })
    }

    /// Heavy-ball update with the given parameters, followed by a fresh
    /// evaluation at the new point.
    pub(crate) fn advance(&mut self, p: &QuadraticProblem, params: StepParams) {
        let mut next = self.x_curr.clone();
        next.axpy(-params.gamma, &self.grad_curr, 1.0);
        if params.m != 0.0 {
            next.axpy(params.m, &self.x_curr, 1.0);
            next.axpy(-params.m, &self.x_prev, 1.0);
        }
        self.move_to(p, next, params);
    }

    pub(crate) fn move_to(&mut self, p: &QuadraticProblem, next: DVector<f64>, params: StepParams) {
        let (f, g) = p.f_and_grad(&next);
        self.x_prev = std::mem::replace(&mut self.x_curr, next);
        self.f_curr = f;
        self.grad_curr = g;
        self.h_curr = params.h;
        self.m_curr = params.m;
        self.gamma_curr = params.gamma;
        self.t += 1;
        self.converged = self.grad_curr.norm() <= self.grad_tol;
    }
}

/// A configured method. Unset constants are tuned from the problem's `μ`
/// and `L`.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Gradient descent, constant step (default `2/(L+μ)`).
    GdConstant {
        gamma: Option<f64>,
    },
    /// Gradient descent with `γ_t = (f − f⋆)/‖∇f‖²`.
    GdPolyak,
    /// Gradient descent with `γ_t = 2(f − f⋆)/‖∇f‖²`.
    GdPolyak2x,
    /// Heavy-ball with constant parameters (default: stationary Chebyshev tuning).
    HbConstant {
        gamma: Option<f64>,
        m: Option<f64>,
    },
    Chebyshev,
    /// Adaptive Heavy-ball with Polyak steps; needs only `f`, `∇f` and `f⋆`.
    HbPolyak,
    /// Q-minimizing Heavy-ball. Reads `x⋆` and `H` directly: this is the
    /// reference method for the projection equivalence, not a practical one.
    QMin(QPolynomial),
    Cg,
}

impl Method {
    /// Registration order used by `--methods all`.
    pub fn registered() -> Vec<Method> {
        vec![
            Method::GdConstant { gamma: None },
            Method::GdPolyak,
            Method::GdPolyak2x,
            Method::HbConstant {
                gamma: None,
                m: None,
            },
            Method::Chebyshev,
            Method::HbPolyak,
            Method::Cg,
        ]
    }

    pub fn name(&self) -> String {
        match self {
            Method::GdConstant { .. } => "gd-constant".into(),
            Method::GdPolyak => "gd-polyak".into(),
            Method::GdPolyak2x => "gd-polyak-2x".into(),
            Method::HbConstant { .. } => "hb-constant".into(),
            Method::Chebyshev => "chebyshev".into(),
            Method::HbPolyak => "hb-polyak".into(),
            Method::QMin(q) => format!("qmin:{q}"),
            Method::Cg => "cg".into(),
        }
    }

    pub fn uses_f_star(&self) -> bool {
        matches!(
            self,
            Method::GdPolyak | Method::GdPolyak2x | Method::HbPolyak
        )
    }

    /// Advances `state` by one iteration. `f_star` is the optimal value
    /// handed to Polyak-type methods.
    pub fn step(
        &self,
        state: &mut SolverState,
        p: &QuadraticProblem,
        f_star: f64,
    ) -> Result<StepParams> {
        match self {
            Method::GdConstant { gamma } => gd_constant_step(
                state,
                p,
                gamma.unwrap_or_else(|| gd_optimal_step(p.mu(), p.l())),
            ),
            Method::GdPolyak => gd_polyak_step(state, p, f_star, 1.0),
            Method::GdPolyak2x => gd_polyak_step(state, p, f_star, 2.0),
            Method::HbConstant { gamma, m } => {
                let (g0, m0) = hb_stationary_tuning(p.mu(), p.l());
                hb_constant_step(state, p, gamma.unwrap_or(g0), m.unwrap_or(m0))
            }
            Method::Chebyshev => chebyshev_step(state, p),
            Method::HbPolyak => adaptive_hb_step(state, p, f_star),
            Method::QMin(q) => q_min_hb_step(state, p, q),
            Method::Cg => cg_step(state, p),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "gd-constant" => Method::GdConstant { gamma: None },
            "gd-polyak" => Method::GdPolyak,
            "gd-polyak-2x" => Method::GdPolyak2x,
            "hb-constant" => Method::HbConstant {
                gamma: None,
                m: None,
            },
            "chebyshev" => Method::Chebyshev,
            "hb-polyak" => Method::HbPolyak,
            "cg" => Method::Cg,
            other => match other.strip_prefix("qmin:") {
                Some(q) => Method::QMin(q.parse()?),
                None => return Err(Error::Validation(format!("unknown method {other:?}"))),
            },
        })
    }
}

/// One row of a trajectory. `h`, `m` and `gamma` are the parameters of the
/// step taken from `x_t`; they are NaN on the last record, where no step
/// was taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub t: usize,
    pub dist_sq: f64,
    pub excess: f64,
    pub grad_norm_sq: f64,
    pub h: f64,
    pub m: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub method: String,
    pub records: Vec<Record>,
    /// Present when [`RunSettings::record_iterates`] is set.
    pub iterates: Option<Vec<DVector<f64>>>,
    pub converged: bool,
    pub wall_time: Duration,
}

impl Trajectory {
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn last(&self) -> &Record {
        self.records.last().expect("trajectory always holds t = 0")
    }

    /// `‖x_t − x⋆‖` with the final value held after the run stopped.
    pub fn dist_at(&self, t: usize) -> f64 {
        self.records
            .get(t)
            .unwrap_or_else(|| self.last())
            .dist_sq
            .sqrt()
    }

    /// `(h_t, m_t)` of every step taken.
    pub fn step_params(&self) -> Vec<(f64, f64)> {
        self.records[..self.records.len() - 1]
            .iter()
            .map(|r| (r.h, r.m))
            .collect()
    }

    /// Iterate `x_t`, held at its final value past the end of the run.
    pub fn iterate(&self, t: usize) -> Option<&DVector<f64>> {
        let it = self.iterates.as_ref()?;
        it.get(t).or_else(|| it.last())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunSettings {
    /// Absolute stopping tolerance on `‖∇f‖`; `None` means `1e−13 ‖∇f(x₀)‖`.
    pub grad_tol: Option<f64>,
    /// Optimal value given to Polyak-type methods instead of the problem's.
    pub f_star: Option<f64>,
    pub record_iterates: bool,
}

fn record(p: &QuadraticProblem, state: &SolverState) -> Record {
    Record {
        t: state.t,
        dist_sq: (&state.x_curr - p.x_star()).norm_squared(),
        excess: state.f_curr - p.f_star(),
        grad_norm_sq: state.grad_curr.norm_squared(),
        h: f64::NAN,
        m: f64::NAN,
        gamma: f64::NAN,
    }
}

/// Like [`run`], but keeps the trajectory recorded before a failing step.
pub fn run_partial(
    method: &Method,
    p: &QuadraticProblem,
    x0: &DVector<f64>,
    iters: usize,
    settings: &RunSettings,
) -> (Trajectory, Option<Error>) {
    let start = Instant::now();
    let f_star = settings.f_star.unwrap_or(p.f_star());
    let mut traj = Trajectory {
        method: method.name(),
        records: Vec::with_capacity(iters + 1),
        iterates: settings.record_iterates.then(Vec::new),
        converged: false,
        wall_time: Duration::ZERO,
    };
    let mut state = match SolverState::new(p, x0.clone(), settings.grad_tol) {
        Ok(s) => s,
        Err(e) => {
            // Only a dimension mismatch lands here; report an empty run.
            traj.records.push(Record {
                t: 0,
                dist_sq: f64::NAN,
                excess: f64::NAN,
                grad_norm_sq: f64::NAN,
                h: f64::NAN,
                m: f64::NAN,
                gamma: f64::NAN,
            });
            return (traj, Some(e.at(0)));
        }
    };
    let push = |traj: &mut Trajectory, state: &SolverState| {
        traj.records.push(record(p, state));
        if let Some(it) = traj.iterates.as_mut() {
            it.push(state.x_curr.clone());
        }
    };
    push(&mut traj, &state);

    let mut error = None;
    while state.t < iters && !state.converged {
        let t_before = state.t;
        match method.step(&mut state, p, f_star) {
            Ok(_) if state.t == t_before => {
                // Converged without moving (exhausted Q-metric).
                break;
            }
            Ok(params) => {
                let last = traj.records.last_mut().expect("nonempty");
                last.h = params.h;
                last.m = params.m;
                last.gamma = params.gamma;
                push(&mut traj, &state);
            }
            Err(e) => {
                // A step may commit x_{t+1} before failing on its follow-up
                // quantities; keep that iterate.
                if state.t > t_before {
                    let last = traj.records.last_mut().expect("nonempty");
                    last.h = state.h_curr;
                    last.m = state.m_curr;
                    last.gamma = state.gamma_curr;
                    push(&mut traj, &state);
                }
                error = Some(e.at(state.t));
                break;
            }
        }
    }
    traj.converged = state.converged;
    traj.wall_time = start.elapsed();
    (traj, error)
}

/// Runs `method` for `iters` steps or until `‖∇f(x_t)‖ ≤ grad_tol`.
pub fn run(
    method: &Method,
    p: &QuadraticProblem,
    x0: &DVector<f64>,
    iters: usize,
    settings: &RunSettings,
) -> Result<Trajectory> {
    match run_partial(method, p, x0, iters, settings) {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}
