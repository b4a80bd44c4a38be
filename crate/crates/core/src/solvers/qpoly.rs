use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight polynomial `Q` of the metric `⟨x − x⋆, Q(H)(x − x⋆)⟩`, lowest
/// degree first. `Q = 1` measures distance, `Q = X` excess value and
/// `Q = X²` squared gradient norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPolynomial {
    coeffs: Vec<f64>,
}

impl QPolynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() || coeffs.iter().all(|&c| c == 0.0) {
            return Err(Error::Validation("Q must be a nonzero polynomial".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("Q coefficients must be finite".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn one() -> Self {
        Self { coeffs: vec![1.0] }
    }

    /// `Q(X) = X^k`.
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
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

    /// Checks `Q(λ) > 0` at every strictly positive eigenvalue that carries
    /// weight, and `Q(λ) ≥ 0` everywhere that carries weight.
    pub fn validate_on(&self, atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
        for (lambda, weight) in atoms {
            if weight <= 0.0 {
                continue;
            }
            let value = self.eval(lambda);
            let bad = if lambda > 0.0 {
                !(value > 0.0)
            } else {
                !(value >= 0.0)
            };
            if bad {
                return Err(Error::InvalidQ { lambda, value });
            }
        }
        Ok(())
    }
}

impl fmt::Display for QPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nonzero: Vec<usize> = (0..self.coeffs.len())
            .filter(|&k| self.coeffs[k] != 0.0)
            .collect();
        if let [k] = nonzero[..] {
            if self.coeffs[k] == 1.0 {
                return match k {
                    0 => write!(f, "1"),
                    1 => write!(f, "X"),
                    k => write!(f, "X^{k}"),
                };
            }
        }
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join("/"))
    }
}

/// Accepts `1`, `X`, `X^k` or a `/`-separated coefficient list, lowest
/// degree first (`1/0/2` is `1 + 2X²`).
impl FromStr for QPolynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Validation(format!("cannot parse Q polynomial {s:?}"));
        let lower = s.to_ascii_lowercase();
        if lower == "x" {
            return Ok(Self::monomial(1));
        }
        if let Some(k) = lower.strip_prefix("x^") {
            return Ok(Self::monomial(k.parse().map_err(|_| bad())?));
        }
        let coeffs = s
            .split('/')
            .map(|c| c.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(coeffs)
    }
}

/// Coefficients of `P_{t+1} = ((ã − X) P_t + b̃ P_{t−1}) / c̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionCoeffs {
    pub a_tilde: f64,
    pub b_tilde: f64,
    /// Always `a_tilde + b_tilde`, which pins `P_{t+1}(0) = 1`.
    pub c_tilde: f64,
    /// The ratio `b_t` of the Heavy-ball parametrization. It coincides with
    /// `b̃_t`; kept separately because it is computed from vector moments
    /// in the solver and from the measure in the polynomial view.
    pub b_ratio: f64,
}

impl RecursionCoeffs {
    pub fn new(a_tilde: f64, b_tilde: f64) -> Self {
        Self {
            a_tilde,
            b_tilde,
            c_tilde: a_tilde + b_tilde,
            b_ratio: b_tilde,
        }
    }

    /// Natural step `h_t = 1/ã_t`.
    pub fn natural_step(&self) -> f64 {
        1.0 / self.a_tilde
    }

    /// `m_t = −b̃_t / c̃_t`.
    pub fn momentum(&self) -> f64 {
        -self.b_tilde / self.c_tilde
    }

    /// Gradient coefficient `γ_t = (1 + m_t) h_t = 1/c̃_t`.
    pub fn effective_step(&self) -> f64 {
        1.0 / self.c_tilde
    }

    /// `(h_t, m_t)` through the ratio form `m = −b h / (1 + b h)`.
    pub fn parametrized(&self) -> (f64, f64) {
        let h = self.natural_step();
        let bh = self.b_ratio * h;
        (h, -bh / (1.0 + bh))
    }
}
