//! Brute-force Q-optimal iterates.
//!
//! The reference point after `t + 1` steps is
//!
//! ```text
//! argmin { ⟨x − x⋆, Q(H)(x − x⋆)⟩ : x ∈ x₀ + span{H e₀, …, H^{t+1} e₀} },   e₀ = x₀ − x⋆,
//! ```
//!
//! computed by orthonormalizing the subspace in the `Q(H)` inner product and
//! projecting `e₀`. Nothing here shares code with the solver recursions.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::quadratic_model::QuadraticProblem;
use crate::solvers::{QPolynomial, Trajectory};

/// Drop tolerance relative to the largest weighted candidate norm.
pub const RANK_TOL: f64 = 1e-12;

/// Q(H)-orthonormal basis of `span{H e₀, …, H^order e₀}`.
///
/// Each new direction is `H` applied to the previous basis vector, which
/// spans the same nested spaces as the raw powers but stays well
/// conditioned. Candidates are orthogonalized twice; a candidate whose
/// weighted norm collapses below `rank_tol` is discarded and the expansion
/// stops, since the Krylov space is then invariant.
#[derive(Debug, Clone)]
pub struct KrylovBasis {
    columns: Vec<DVector<f64>>,
    weighted: Vec<DVector<f64>>,
    order: usize,
    rank_tol: f64,
}

impl KrylovBasis {
    pub fn build(
        p: &QuadraticProblem,
        e0: &DVector<f64>,
        order: usize,
        q: &QPolynomial,
    ) -> Result<Self> {
        let comps = p.spectral_components(e0);
        let scale = comps.iter().sum::<f64>();
        q.validate_on(
            p.eigenvalues()
                .iter()
                .zip(&comps)
                .map(|(&l, &c)| (l, if c > 1e-28 * scale { c } else { 0.0 })),
        )?;

        let mut basis = Self {
            columns: Vec::with_capacity(order),
            weighted: Vec::with_capacity(order),
            order,
            rank_tol: RANK_TOL,
        };
        let mut max_norm: f64 = 0.0;
        for k in 0..order.min(p.dim()) {
            let seed = if k == 0 { e0 } else { &basis.columns[k - 1] };
            let mut cand = p.apply_h(seed);
            let n = cand.norm();
            if !(n > 0.0) {
                break;
            }
            cand /= n;
            let n0 = weighted_norm(p, q, &cand);
            max_norm = max_norm.max(n0);
            if !(n0 > 0.0) {
                break;
            }
            for _ in 0..2 {
                for (col, wcol) in basis.columns.iter().zip(&basis.weighted) {
                    let c = wcol.dot(&cand);
                    cand.axpy(-c, col, 1.0);
                }
            }
            let wcand = p.apply_poly(q.coeffs(), &cand);
            let n1 = cand.dot(&wcand);
            if !(n1 > 0.0) || n1.sqrt() <= basis.rank_tol * max_norm {
                break;
            }
            let n1 = n1.sqrt();
            basis.columns.push(cand / n1);
            basis.weighted.push(wcand / n1);
        }
        Ok(basis)
    }

    pub fn columns(&self) -> &[DVector<f64>] {
        &self.columns
    }

    pub fn effective_rank(&self) -> usize {
        self.columns.len()
    }

    /// Requested Krylov order (number of candidate directions).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Q-projection of `e` onto the orthogonal complement of the basis.
    fn project_out(&self, e: &DVector<f64>) -> DVector<f64> {
        let mut r = e.clone();
        for _ in 0..2 {
            for (col, wcol) in self.columns.iter().zip(&self.weighted) {
                let c = wcol.dot(&r);
                r.axpy(-c, col, 1.0);
            }
        }
        r
    }
}

fn weighted_norm(p: &QuadraticProblem, q: &QPolynomial, v: &DVector<f64>) -> f64 {
    v.dot(&p.apply_poly(q.coeffs(), v)).max(0.0).sqrt()
}

/// `⟨x − x⋆, Q(H)(x − x⋆)⟩`.
pub fn q_metric(p: &QuadraticProblem, q: &QPolynomial, x: &DVector<f64>) -> f64 {
    let e = x - p.x_star();
    e.dot(&p.apply_poly(q.coeffs(), &e))
}

/// Q-optimal iterate after `t + 1` steps from `x0`. Past the effective
/// rank this is the minimizer over the whole reachable space.
pub fn krylov_project(
    p: &QuadraticProblem,
    x0: &DVector<f64>,
    t: usize,
    q: &QPolynomial,
) -> Result<DVector<f64>> {
    if x0.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: x0.len(),
        });
    }
    let e0 = x0 - p.x_star();
    let basis = KrylovBasis::build(p, &e0, t + 1, q)?;
    Ok(p.x_star() + basis.project_out(&e0))
}

/// Oracle point for iteration `t` (`x₀` itself at `t = 0`).
pub fn oracle_iterate(
    p: &QuadraticProblem,
    x0: &DVector<f64>,
    t: usize,
    q: &QPolynomial,
) -> Result<DVector<f64>> {
    match t.checked_sub(1) {
        None => Ok(x0.clone()),
        Some(s) => krylov_project(p, x0, s, q),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    pub t: usize,
    /// `‖x_t − x_t^oracle‖ / ‖x₀ − x⋆‖`.
    pub deviation: f64,
    /// `(M(x_t) − M(x_t^oracle)) / M(x₀)` with `M` the Q-metric.
    pub q_gap: f64,
}

/// Compares a recorded trajectory (with iterates) against the oracle for
/// `t = 0..=T`; iterates past the end of the run are held at their final
/// value.
pub fn instance_optimality_report(
    p: &QuadraticProblem,
    x0: &DVector<f64>,
    iters: usize,
    q: &QPolynomial,
    traj: &Trajectory,
) -> Result<Vec<Deviation>> {
    if traj.iterates.is_none() {
        return Err(Error::InvalidTrajectory(
            "the instance-optimality report needs recorded iterates".into(),
        ));
    }
    let e0_norm = (x0 - p.x_star()).norm();
    let m0 = q_metric(p, q, x0);
    let ts: Vec<usize> = (0..=iters).collect();
    par::map(Execution::Auto, &ts, |&t| {
        let x = traj.iterate(t).expect("checked above");
        let oracle = oracle_iterate(p, x0, t, q)?;
        let norm = |v: f64, by: f64| if by > 0.0 { v / by } else { v };
        Ok(Deviation {
            t,
            deviation: norm((x - &oracle).norm(), e0_norm),
            q_gap: norm(q_metric(p, q, x) - q_metric(p, q, &oracle), m0),
        })
    })
    .into_iter()
    .collect()
}
