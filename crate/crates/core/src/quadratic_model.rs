//! Convex quadratic instances `f(x) = ½⟨x−x⋆, H(x−x⋆)⟩ + f⋆` with a
//! prescribed spectrum hidden behind a Haar-random rotation.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::par::{self, Execution};

// Independent RNG streams drawn from one user seed.
const STREAM_ROTATION: u64 = 0;
const STREAM_X_STAR: u64 = 1;
const STREAM_START: u64 = 2;

/// Euclidean norm of the default starting offset `x₀ − x⋆`.
pub const DEFAULT_START_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// `λ_i = μ (L/μ)^{i/(d−1)}`.
    Geometric,
    /// Evenly spaced on `[μ, L]`.
    Uniform,
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub kind: SpectrumKind,
    pub d: usize,
    pub mu: f64,
    pub l: f64,
    pub values: Option<Vec<f64>>,
    pub seed: u64,
}

impl SpectrumSpec {
    pub fn geometric(d: usize, mu: f64, l: f64, seed: u64) -> Self {
        Self {
            kind: SpectrumKind::Geometric,
            d,
            mu,
            l,
            values: None,
            seed,
        }
    }

    pub fn uniform(d: usize, mu: f64, l: f64, seed: u64) -> Self {
        Self {
            kind: SpectrumKind::Uniform,
            ..Self::geometric(d, mu, l, seed)
        }
    }

    /// `d`, `mu` and `l` are filled in from the list.
    pub fn explicit(values: Vec<f64>, seed: u64) -> Self {
        let positive = values.iter().copied().filter(|&v| v > 0.0);
        let mu = positive.clone().fold(f64::INFINITY, f64::min);
        let l = values.iter().copied().fold(0.0, f64::max);
        Self {
            kind: SpectrumKind::Explicit,
            d: values.len(),
            mu,
            l,
            values: Some(values),
            seed,
        }
    }

    /// Sorted eigenvalue list described by the spec.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.d < 1 {
            return Err(Error::Validation("dimension must be at least 1".into()));
        }
        let mut eigs = match self.kind {
            SpectrumKind::Explicit => {
                let values = self
                    .values
                    .as_ref()
                    .ok_or_else(|| Error::Validation("explicit spectrum without values".into()))?;
                if values.len() != self.d {
                    return Err(Error::Validation(format!(
                        "explicit spectrum has {} values but d = {}",
                        values.len(),
                        self.d
                    )));
                }
                if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "eigenvalue {bad} is negative or not finite"
                    )));
                }
                if values.iter().all(|&v| v == 0.0) {
                    return Err(Error::Validation(
                        "spectrum has no positive eigenvalue".into(),
                    ));
                }
                values.clone()
            }
            SpectrumKind::Geometric | SpectrumKind::Uniform => {
                if !(self.mu > 0.0) || !self.mu.is_finite() {
                    return Err(Error::Validation(format!(
                        "mu must be > 0, got {}",
                        self.mu
                    )));
                }
                if !(self.l >= self.mu) || !self.l.is_finite() {
                    return Err(Error::Validation(format!(
                        "L must satisfy L >= mu, got L = {} and mu = {}",
                        self.l, self.mu
                    )));
                }
                if self.d == 1 {
                    if self.l != self.mu {
                        return Err(Error::Validation(
                            "a one-dimensional spectrum needs mu = L".into(),
                        ));
                    }
                    return Ok(vec![self.mu]);
                }
                let last = (self.d - 1) as f64;
                let ratio = self.l / self.mu;
                (0..self.d)
                    .map(|i| {
                        if i == 0 {
                            self.mu
                        } else if i == self.d - 1 {
                            self.l
                        } else if self.kind == SpectrumKind::Geometric {
                            self.mu * ratio.powf(i as f64 / last)
                        } else {
                            self.mu + (self.l - self.mu) * (i as f64 / last)
                        }
                    })
                    .collect()
            }
        };
        eigs.sort_by(f64::total_cmp);
        Ok(eigs)
    }
}

/// Parses a spectrum file: one nonnegative value per line, `#` comments and
/// blank lines ignored.
pub fn parse_spectrum(text: &str) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            Error::Validation(format!(
                "line {}: cannot parse {line:?} as a number",
                lineno + 1
            ))
        })?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Validation(format!(
                "line {}: eigenvalue {v} is negative or not finite",
                lineno + 1
            )));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Validation(
            "spectrum file contains no eigenvalues".into(),
        ));
    }
    Ok(values)
}

pub fn read_spectrum_file(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_spectrum(&std::fs::read_to_string(path)?)
}

/// How the minimizer is chosen.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum XStar {
    #[default]
    Zero,
    /// Standard Gaussian draw from the problem seed.
    Random,
    Given(DVector<f64>),
}

/// Immutable problem instance; safe to share across concurrent runs.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    h: DMatrix<f64>,
    eigenvectors: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    x_star: DVector<f64>,
    f_star: f64,
    mu: f64,
    l: f64,
    seed: u64,
    exec: Execution,
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// column signs chosen so that `R` has a positive diagonal.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn make_problem(spec: &SpectrumSpec, x_star: XStar, f_star: f64) -> Result<QuadraticProblem> {
    let eigenvalues = spec.eigenvalues()?;
    let d = eigenvalues.len();
    if !f_star.is_finite() {
        return Err(Error::Validation(format!(
            "f* must be finite, got {f_star}"
        )));
    }
    let x_star = match x_star {
        XStar::Zero => DVector::zeros(d),
        XStar::Random => {
            let mut rng = rng_stream(spec.seed, STREAM_X_STAR);
            DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
        }
        XStar::Given(v) => {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            v
        }
    };

    let v = haar_orthogonal(d, &mut rng_stream(spec.seed, STREAM_ROTATION));
    let mut scaled = v.clone();
    for (j, &lambda) in eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(lambda);
    }
    let h = scaled * v.transpose();
    let h = (&h + h.transpose()) * 0.5;

    let mu = eigenvalues
        .iter()
        .copied()
        .find(|&x| x > 0.0)
        .ok_or_else(|| Error::Validation("spectrum has no positive eigenvalue".into()))?;
    let l = *eigenvalues.last().expect("d >= 1");

    Ok(QuadraticProblem {
        h,
        eigenvectors: v,
        eigenvalues,
        x_star,
        f_star,
        mu,
        l,
        seed: spec.seed,
        exec: Execution::Auto,
    })
}

impl QuadraticProblem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Columns are unit eigenvectors, ordered like [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn condition_number(&self) -> f64 {
        self.l / self.mu
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// `h = −H x⋆`, the linear term of the expanded form `½⟨x, Hx⟩ + ⟨h, x⟩ + c`.
    pub fn linear_term(&self) -> DVector<f64> {
        -self.apply_h(&self.x_star)
    }

    pub fn apply_h(&self, v: &DVector<f64>) -> DVector<f64> {
        par::symv(self.exec, &self.h, v)
    }

    /// `Q(H) v` by Horner's rule; `coeffs` lowest degree first.
    pub fn apply_poly(&self, coeffs: &[f64], v: &DVector<f64>) -> DVector<f64> {
        let Some((&top, rest)) = coeffs.split_last() else {
            return DVector::zeros(v.len());
        };
        let mut acc = v * top;
        for &c in rest.iter().rev() {
            acc = self.apply_h(&acc);
            acc.axpy(c, v, 1.0);
        }
        acc
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval_f(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.f_and_grad(x).0)
    }

    pub fn grad_f(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(self.apply_h(&(x - &self.x_star)))
    }

    /// Value and gradient from a single product with `H`. Unchecked.
    pub fn f_and_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let e = x - &self.x_star;
        let g = self.apply_h(&e);
        (0.5 * e.dot(&g) + self.f_star, g)
    }

    /// `⟨x₀ − x⋆, v_i⟩²` for every eigenvector `v_i`.
    pub fn spectral_components(&self, e: &DVector<f64>) -> Vec<f64> {
        (self.eigenvectors.tr_mul(e))
            .iter()
            .map(|c| c * c)
            .collect()
    }

    /// Seeded starting point at distance `radius` from `x⋆`.
    pub fn random_start(&self, seed: u64, radius: f64) -> DVector<f64> {
        let mut rng = rng_stream(seed, STREAM_START);
        let mut dir = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = dir.norm();
        if n > 0.0 {
            dir /= n;
        } else {
            dir[0] = 1.0;
        }
        &self.x_star + dir * radius
    }

    pub fn default_start(&self) -> DVector<f64> {
        self.random_start(self.seed, DEFAULT_START_RADIUS)
    }
}
