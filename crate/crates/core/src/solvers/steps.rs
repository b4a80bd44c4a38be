use crate::error::{Error, Result};
use crate::quadratic_model::QuadraticProblem;

use super::{Memory, QPolynomial, RecursionCoeffs, SolverState, StepParams, DENOM_TOL};

/// `2/(L+μ)`.
pub fn gd_optimal_step(mu: f64, l: f64) -> f64 {
    2.0 / (l + mu)
}

/// Stationary Heavy-ball tuning `γ = (2/(√L+√μ))²`, `m = ((√L−√μ)/(√L+√μ))²`.
pub fn hb_stationary_tuning(mu: f64, l: f64) -> (f64, f64) {
    let (sl, sm) = (l.sqrt(), mu.sqrt());
    let gamma = (2.0 / (sl + sm)).powi(2);
    let rho = (sl - sm) / (sl + sm);
    (gamma, rho * rho)
}

/// Chebyshev parameters `(γ_t, m_t)`. Step 0 is the gradient step `2/(L+μ)`.
pub fn chebyshev_params(mu: f64, l: f64, t: usize) -> (f64, f64) {
    let h = gd_optimal_step(mu, l);
    if t == 0 {
        return (h, 0.0);
    }
    let (sl, sm) = (l.sqrt(), mu.sqrt());
    let rho = (sl - sm) / (sl + sm);
    let r2 = rho * rho;
    let m = r2 * (1.0 + r2.powi(t as i32 - 1)) / (1.0 + r2.powi(t as i32 + 1));
    (h * (1.0 + m), m)
}

/// `factor · (f − f⋆)/‖∇f‖²`.
pub fn polyak_stepsize(
    f_val: f64,
    f_star: f64,
    grad: &nalgebra::DVector<f64>,
    factor: f64,
) -> Result<f64> {
    if f_val < f_star {
        return Err(Error::InvalidFStar { f_val, f_star });
    }
    let g2 = grad.norm_squared();
    debug_assert!(g2 > 0.0, "Polyak step requested at a stationary point");
    Ok(factor * (f_val - f_star) / g2)
}

pub fn gd_constant_step(
    state: &mut SolverState,
    p: &QuadraticProblem,
    gamma: f64,
) -> Result<StepParams> {
    let params = StepParams::gradient_step(gamma);
    state.advance(p, params);
    Ok(params)
}

pub fn gd_polyak_step(
    state: &mut SolverState,
    p: &QuadraticProblem,
    f_star: f64,
    factor: f64,
) -> Result<StepParams> {
    let gamma = polyak_stepsize(state.f_curr, f_star, &state.grad_curr, factor)?;
    gd_constant_step(state, p, gamma)
}

/// `x_{t+1} = x_t − γ∇f(x_t) + m(x_t − x_{t−1})`.
pub fn hb_constant_step(
    state: &mut SolverState,
    p: &QuadraticProblem,
    gamma: f64,
    m: f64,
) -> Result<StepParams> {
    let params = StepParams::from_effective(gamma, m);
    state.advance(p, params);
    Ok(params)
}

pub fn chebyshev_step(state: &mut SolverState, p: &QuadraticProblem) -> Result<StepParams> {
    let (gamma, m) = chebyshev_params(p.mu(), p.l(), state.t);
    hb_constant_step(state, p, gamma, m)
}

/// Adaptive Heavy-ball with Polyak steps.
///
/// Uses `h_t = 2(f(x_t) − f⋆)/‖∇f(x_t)‖²` and the momentum `m_t` carried
/// from the previous step (`m_0 = 0`), then prepares
///
/// ```text
/// m_{t+1} = −(f_{t+1} − f⋆)⟨g_{t+1}, g_t⟩ / [(f_t − f⋆)‖g_{t+1}‖² + (f_{t+1} − f⋆)⟨g_{t+1}, g_t⟩]
/// ```
///
/// If the new point is already converged no momentum is computed. A
/// negligible denominator is reported as [`Error::DegenerateMomentum`] after
/// `x_{t+1}` has been committed.
pub fn adaptive_hb_step(
    state: &mut SolverState,
    p: &QuadraticProblem,
    f_star: f64,
) -> Result<StepParams> {
    let m = match state.memory {
        Memory::Adaptive { next_m } => next_m,
        _ => 0.0,
    };
    let excess = state.f_curr - f_star;
    let h = polyak_stepsize(state.f_curr, f_star, &state.grad_curr, 2.0)?;
    let params = StepParams::from_natural(h, m);
    let grad_prev = state.grad_curr.clone();
    state.advance(p, params);
    state.memory = Memory::Adaptive { next_m: 0.0 };
    if state.converged {
        return Ok(params);
    }

    let excess_next = state.f_curr - f_star;
    if excess_next < 0.0 {
        return Err(Error::InvalidFStar {
            f_val: state.f_curr,
            f_star,
        });
    }
    let inner = state.grad_curr.dot(&grad_prev);
    let scale = excess * state.grad_curr.norm_squared();
    let numerator = -excess_next * inner;
    let denominator = scale + excess_next * inner;
    if !(denominator.abs() > DENOM_TOL * scale) {
        return Err(Error::DegenerateMomentum {
            numerator,
            denominator,
            scale,
        });
    }
    state.memory = Memory::Adaptive {
        next_m: numerator / denominator,
    };
    Ok(params)
}

/// Heavy-ball step minimizing `⟨x − x⋆, Q(H)(x − x⋆)⟩` over the span of past
/// gradients. Reads `x⋆` and `H` directly; only `Q = 1` has an `f⋆`-based
/// form ([`adaptive_hb_step`]).
///
/// With `e_t = x_t − x⋆` and `u_t = Q(H) e_t`:
/// `h_t = ⟨e_t, H u_t⟩ / ⟨e_t, H² u_t⟩`,
/// `b_t = ⟨e_t, H² Q(H) e_{t−1}⟩ / ⟨e_{t−1}, H Q(H) e_{t−1}⟩` (`b_0 = 0`),
/// `m_t = −b_t h_t / (1 + b_t h_t)`.
///
/// When `⟨e_t, H² u_t⟩ ≤ 0` the weighted error is exhausted: the state is
/// marked converged and left where it is.
pub fn q_min_hb_step(
    state: &mut SolverState,
    p: &QuadraticProblem,
    q: &QPolynomial,
) -> Result<StepParams> {
    let e = &state.x_curr - p.x_star();
    let u = p.apply_poly(q.coeffs(), &e);
    let hu = p.apply_h(&u);
    let weighted = e.dot(&hu);
    let curvature = state.grad_curr.dot(&hu);
    if !(curvature > 0.0 && weighted > 0.0) {
        state.converged = true;
        return Ok(StepParams::from_natural(f64::NAN, f64::NAN));
    }

    let b = match &state.memory {
        Memory::QMin {
            prev_weighted,
            prev_grad,
        } if state.t > 0 => hu.dot(prev_grad) / prev_weighted,
        _ => 0.0,
    };
    let coeffs = RecursionCoeffs {
        b_ratio: b,
        ..RecursionCoeffs::new(curvature / weighted, b)
    };
    let (h, m) = coeffs.parametrized();
    let one_plus_bh = 1.0 + b * h;
    if !(one_plus_bh.abs() > DENOM_TOL * (1.0 + (b * h).abs())) {
        return Err(Error::DegenerateMomentum {
            numerator: -b * h,
            denominator: one_plus_bh,
            scale: 1.0 + (b * h).abs(),
        });
    }
    debug_assert!(
        (h - weighted / curvature).abs() <= 1e-10 * h.abs()
            && (m - coeffs.momentum()).abs() <= 1e-10 * (m.abs() + 1e-300).max(1e-12),
        "recursion coefficients and ratio parametrization disagree"
    );

    let params = StepParams::from_natural(h, m);
    let grad_t = state.grad_curr.clone();
    state.advance(p, params);
    state.memory = Memory::QMin {
        prev_weighted: weighted,
        prev_grad: grad_t,
    };
    Ok(params)
}
