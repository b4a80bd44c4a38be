//! Residual polynomials of first-order methods and the spectral measures
//! they are measured against.
//!
//! Any method whose steps stay in the span of observed gradients satisfies
//! `x_t − x⋆ = P_t(H)(x₀ − x⋆)` with `deg P_t ≤ t` and `P_t(0) = 1`. Given
//! the discrete measure `λ_Q = Σ Q(λ)⟨x₀ − x⋆, v_λ⟩² δ_λ`, the Q-metric of
//! the iterate is `∫ P_t² dλ_Q`, and the Q-optimal polynomials are
//! orthogonal for `dλ_XQ = λ dλ_Q`. This module builds those objects so the
//! solvers can be checked against them.
//!
//! Polynomials use the monomial basis, which is only trustworthy at low
//! degree; comparisons should evaluate at the atoms, never compare
//! coefficients.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::quadratic_model::QuadraticProblem;
use crate::solvers::{QPolynomial, RecursionCoeffs};

pub const MAX_DEGREE: usize = 60;

/// Squared XQ-norms below this fraction of the total mass count as zero.
const EXHAUSTED_REL: f64 = 1e-24;

/// Eigenvalues closer than this (relative to the largest) share an atom.
const MERGE_REL: f64 = 1e-12;

/// Polynomial with `P(0) = 1`, constant term first.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPolynomial {
    coeffs: Vec<f64>,
}

impl ResidualPolynomial {
    pub fn one() -> Self {
        Self { coeffs: vec![1.0] }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.first() != Some(&1.0) {
            return Err(Error::Validation(
                "residual polynomial must have constant term 1".into(),
            ));
        }
        if coeffs.len() > MAX_DEGREE + 1 {
            return Err(Error::Validation(format!(
                "degree {} exceeds the monomial-basis cap {MAX_DEGREE}",
                coeffs.len() - 1
            )));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// `P_{t+1} = ((ã − X) P_t + b̃ P_{t−1}) / c̃`. The constant term is set
    /// to exactly 1, which is what `c̃ = ã + b̃` guarantees algebraically.
    pub fn next(&self, prev: &ResidualPolynomial, rc: &RecursionCoeffs) -> Result<Self> {
        let deg = self.degree() + 1;
        if deg > MAX_DEGREE {
            return Err(Error::Validation(format!(
                "degree {deg} exceeds the monomial-basis cap {MAX_DEGREE}"
            )));
        }
        let mut out = vec![0.0; deg + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[k] += rc.a_tilde * c;
            out[k + 1] -= c;
        }
        for (k, &c) in prev.coeffs.iter().enumerate() {
            out[k] += rc.b_tilde * c;
        }
        for c in &mut out {
            *c /= rc.c_tilde;
        }
        out[0] = 1.0;
        Ok(Self { coeffs: out })
    }
}

/// Discrete measure `Σ w δ_λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
}

impl SpectralMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(l, w)) = atoms.iter().find(|(l, w)| !(*l >= 0.0 && *w >= 0.0)) {
            return Err(Error::Validation(format!(
                "measure atom ({l}, {w}) has a negative location or weight"
            )));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Number of atoms with positive weight.
    pub fn support_size(&self) -> usize {
        self.atoms.iter().filter(|a| a.1 > 0.0).count()
    }

    /// `dλ_XQ = λ dλ_Q`.
    pub fn times_x(&self) -> Self {
        Self {
            atoms: self.atoms.iter().map(|&(l, w)| (l, l * w)).collect(),
        }
    }
}

/// Atoms at the distinct eigenvalues of `H` with weights
/// `Q(λ) ‖Π_λ(x₀ − x⋆)‖²`.
pub fn measure_from_problem(
    p: &QuadraticProblem,
    x0: &DVector<f64>,
    q: &QPolynomial,
) -> Result<SpectralMeasure> {
    if x0.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: x0.len(),
        });
    }
    let comps = p.spectral_components(&(x0 - p.x_star()));
    let eigs = p.eigenvalues();
    let merge = MERGE_REL * p.l();
    let mut grouped: Vec<(f64, f64)> = Vec::new();
    for (&lambda, &c) in eigs.iter().zip(&comps) {
        match grouped.last_mut() {
            Some((l0, w)) if (lambda - *l0).abs() <= merge => *w += c,
            _ => grouped.push((lambda, c)),
        }
    }
    q.validate_on(grouped.iter().copied())?;
    SpectralMeasure::new(
        grouped
            .into_iter()
            .map(|(l, w)| (l, q.eval(l).max(0.0) * w))
            .collect(),
    )
}

/// `Σ w P(λ) R(λ)`.
pub fn inner_product(p: &ResidualPolynomial, r: &ResidualPolynomial, m: &SpectralMeasure) -> f64 {
    m.atoms
        .iter()
        .map(|&(l, w)| w * p.eval(l) * r.eval(l))
        .sum()
}

fn moment_x(p: &ResidualPolynomial, r: &ResidualPolynomial, m: &SpectralMeasure) -> f64 {
    m.atoms
        .iter()
        .map(|&(l, w)| w * l * p.eval(l) * r.eval(l))
        .sum()
}

pub fn norm_sq(p: &ResidualPolynomial, m: &SpectralMeasure) -> f64 {
    inner_product(p, p, m)
}

/// Coefficients producing the next XQ-orthogonal residual polynomial.
/// `p_prev = None` means `t = 0` (`b̃_0 = 0`).
pub fn recursion_coeffs(
    p_t: &ResidualPolynomial,
    p_prev: Option<&ResidualPolynomial>,
    m_xq: &SpectralMeasure,
) -> Result<RecursionCoeffs> {
    let floor = EXHAUSTED_REL * m_xq.total_weight();
    let n_t = norm_sq(p_t, m_xq);
    if !(n_t > floor) {
        return Err(Error::MeasureExhausted);
    }
    let a = moment_x(p_t, p_t, m_xq) / n_t;
    let b = match p_prev {
        None => 0.0,
        Some(prev) => {
            let n_prev = norm_sq(prev, m_xq);
            if !(n_prev > floor) {
                return Err(Error::MeasureExhausted);
            }
            moment_x(p_t, prev, m_xq) / n_prev
        }
    };
    Ok(RecursionCoeffs::new(a, b))
}

/// `P_0, P_1, …` minimizing `‖P_t‖_Q` under `P_t(0) = 1`, generated by the
/// three-term recursion on `λ_XQ`. Stops at `max_t` or when the measure is
/// exhausted.
pub fn optimal_polynomials(m_q: &SpectralMeasure, max_t: usize) -> Result<Vec<ResidualPolynomial>> {
    let m_xq = m_q.times_x();
    let mut polys = vec![ResidualPolynomial::one()];
    while polys.len() <= max_t.min(MAX_DEGREE) {
        let t = polys.len() - 1;
        let prev = t.checked_sub(1).map(|i| &polys[i]);
        let rc = match recursion_coeffs(&polys[t], prev, &m_xq) {
            Ok(rc) => rc,
            Err(Error::MeasureExhausted) => break,
            Err(e) => return Err(e),
        };
        let next = polys[t].next(prev.unwrap_or(&polys[t]), &rc)?;
        polys.push(next);
    }
    Ok(polys)
}

/// Rebuilds `P_0, …, P_T` from the `(h_t, m_t)` of a Heavy-ball-type run,
/// using `ã_t = 1/h_t`, `c̃_t = 1/γ_t`, `b̃_t = −m_t/γ_t` with
/// `γ_t = (1 + m_t) h_t` and `P_{−1} = P_0`.
pub fn polys_from_trajectory(params: &[(f64, f64)]) -> Result<Vec<ResidualPolynomial>> {
    if params.len() > MAX_DEGREE {
        return Err(Error::Validation(format!(
            "{} steps exceed the monomial-basis cap {MAX_DEGREE}",
            params.len()
        )));
    }
    let mut polys = vec![ResidualPolynomial::one()];
    for (t, &(h, m)) in params.iter().enumerate() {
        let gamma = (1.0 + m) * h;
        if !(h != 0.0 && h.is_finite() && gamma != 0.0 && m.is_finite()) {
            return Err(Error::InvalidTrajectory(format!(
                "step {t} has h = {h}, m = {m}"
            )));
        }
        let rc = RecursionCoeffs {
            a_tilde: 1.0 / h,
            b_tilde: -m / gamma,
            c_tilde: 1.0 / gamma,
            b_ratio: -m / gamma,
        };
        let prev = if t == 0 { &polys[0] } else { &polys[t - 1] };
        let next = polys[t].next(prev, &rc)?;
        polys.push(next);
    }
    Ok(polys)
}

/// `max_i |P(λ_i)⟨e₀, v_i⟩ − ⟨x − x⋆, v_i⟩|` in the eigenbasis of `H`.
pub fn residual_deviation(
    p: &QuadraticProblem,
    x0: &DVector<f64>,
    poly: &ResidualPolynomial,
    x: &DVector<f64>,
) -> f64 {
    let v = p.eigenvectors();
    let c0 = v.tr_mul(&(x0 - p.x_star()));
    let ct = v.tr_mul(&(x - p.x_star()));
    p.eigenvalues()
        .iter()
        .enumerate()
        .map(|(i, &l)| (poly.eval(l) * c0[i] - ct[i]).abs())
        .fold(0.0, f64::max)
}
