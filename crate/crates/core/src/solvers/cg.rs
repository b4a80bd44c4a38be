use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::quadratic_model::QuadraticProblem;

use super::{run, Memory, Method, RunSettings, SolverState, StepParams, Trajectory};

/// One Hestenes–Stiefel conjugate gradient step with a recursively updated
/// residual. The step is reported in Heavy-ball form: with
/// `p_t = r_t + β_{t−1} p_{t−1}` and `x_t − x_{t−1} = α_{t−1} p_{t−1}`,
/// `γ_t = α_t` and `m_t = α_t β_{t−1} / α_{t−1}`.
pub fn cg_step(state: &mut SolverState, p: &QuadraticProblem) -> Result<StepParams> {
    let (residual, direction, residual_sq, prev_alpha, prev_beta) =
        match std::mem::take(&mut state.memory) {
            Memory::Cg {
                residual,
                direction,
                residual_sq,
                prev_alpha,
                prev_beta,
            } => (residual, direction, residual_sq, prev_alpha, prev_beta),
            _ => {
                let r = -&state.grad_curr;
                let rr = r.norm_squared();
                (r.clone(), r, rr, f64::NAN, 0.0)
            }
        };

    let hp = p.apply_h(&direction);
    let curvature = direction.dot(&hp);
    if !(curvature > 0.0) {
        return Err(Error::Breakdown { curvature });
    }
    let alpha = residual_sq / curvature;
    let m = if state.t == 0 {
        0.0
    } else {
        alpha * prev_beta / prev_alpha
    };
    let params = StepParams::from_effective(alpha, m);

    let next = &state.x_curr + &direction * alpha;
    let mut residual = residual;
    residual.axpy(-alpha, &hp, 1.0);
    let rr_next = residual.norm_squared();
    let beta = rr_next / residual_sq;
    let mut direction = direction * beta;
    direction += &residual;

    state.move_to(p, next, params);
    state.memory = Memory::Cg {
        residual,
        direction,
        residual_sq: rr_next,
        prev_alpha: alpha,
        prev_beta: beta,
    };
    Ok(params)
}

/// Classical conjugate gradient for `T` iterations with the default stopping
/// rule.
pub fn cg_classic(p: &QuadraticProblem, x0: &DVector<f64>, iters: usize) -> Result<Trajectory> {
    run(&Method::Cg, p, x0, iters, &RunSettings::default())
}
