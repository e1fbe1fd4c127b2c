//! Complex polynomials stored by ascending coefficients.
//!
//! Everything the root finder needs from a polynomial lives here: Horner
//! evaluation (with the derivative in the same pass), Taylor shifts,
//! synthetic division, Cauchy normalization and a multiplicity heuristic.

mod parse;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

pub use parse::{parse_complex, parse_polynomial};

/// Relative remainder allowed by [`deflate`] before the divisor is rejected.
pub const DEFLATION_TOLERANCE: f64 = 1e-8;

/// Relative size a Taylor coefficient must exceed to count as nonzero in
/// [`estimate_multiplicity`].
pub const MULTIPLICITY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolyError {
    #[error("polynomial has no nonzero coefficient")]
    Zero,
    #[error("polynomial is constant; degree >= 1 required")]
    Constant,
    #[error("coefficient {index} is not finite")]
    NonFinite { index: usize },
    #[error("deflation remainder {remainder:.3e} exceeds tolerance {tolerance:.3e}")]
    RemainderTooLarge { remainder: f64, tolerance: f64 },
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
}

/// A nonzero complex polynomial. `coeffs[k]` multiplies `z^k`.
///
/// The leading coefficient is always nonzero. Constants are representable so
/// that derivatives close under the type; operations that need a genuine
/// polynomial (normalization, root finding) reject degree 0.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl TryFrom<Vec<Complex64>> for Polynomial {
    type Error = PolyError;

    fn try_from(coeffs: Vec<Complex64>) -> Result<Self, PolyError> {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<Complex64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients, trimming trailing zeros.
    pub fn new(mut coeffs: Vec<Complex64>) -> Result<Self, PolyError> {
        if let Some(index) = coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(PolyError::NonFinite { index });
        }
        while coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(PolyError::Zero);
        }
        Ok(Self { coeffs })
    }

    /// Like [`Polynomial::new`] but additionally requires degree >= 1.
    pub fn non_constant(coeffs: Vec<Complex64>) -> Result<Self, PolyError> {
        let p = Self::new(coeffs)?;
        if p.degree() == 0 {
            return Err(PolyError::Constant);
        }
        Ok(p)
    }

    pub fn from_real(coeffs: &[f64]) -> Result<Self, PolyError> {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// Monic polynomial with the given roots (repeated entries give multiple roots).
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut coeffs = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            coeffs = mul_linear(&coeffs, r);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs[self.degree()]
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Returns `(p(z), p'(z))` from a single Horner sweep.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let mut p = zero;
        let mut dp = zero;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `p'`; the derivative of a constant is the zero polynomial, which is
    /// not representable, so degree 0 is an error.
    pub fn derivative(&self) -> Result<Polynomial, PolyError> {
        if self.degree() == 0 {
            return Err(PolyError::Constant);
        }
        let coeffs = self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect();
        Ok(Self { coeffs })
    }

    /// Σ |a_k| |z|^k, the natural scale of rounding errors in `eval(z)`.
    pub fn abs_eval(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    /// Backward error of `z` as a root: |p(z)| / Σ |a_k| |z|^k.
    pub fn backward_error(&self, z: Complex64) -> f64 {
        let denom = self.abs_eval(z);
        if denom == 0.0 {
            return 0.0;
        }
        self.eval(z).norm() / denom
    }

    /// Sum of coefficient moduli.
    pub fn coeff_norm1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Cauchy root bound 1 + max_k |a_k / a_n|.
    pub fn cauchy_bound(&self) -> f64 {
        let lead = self.leading().norm();
        1.0 + self.coeffs[..self.degree()].iter().map(|c| c.norm() / lead).fold(0.0, f64::max)
    }

    /// Coefficients of `e ↦ p(x + e)`, i.e. the Taylor coefficients `p^(k)(x) / k!`.
    pub fn taylor_shift(&self, x: Complex64) -> Vec<Complex64> {
        let mut b = self.coeffs.clone();
        let n = b.len();
        for i in 0..n {
            for k in (i..n - 1).rev() {
                let carry = b[k + 1] * x;
                b[k] += carry;
            }
        }
        b
    }

    /// `p^(m)(x)` via the Taylor shift.
    pub fn nth_derivative_at(&self, x: Complex64, m: usize) -> Complex64 {
        let b = self.taylor_shift(x);
        match b.get(m) {
            Some(&c) => c * factorial(m),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// The polynomial `z ↦ p(a z)`.
    pub fn scale_argument(&self, a: f64) -> Polynomial {
        let mut pow = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|&c| {
                let v = c * pow;
                pow *= a;
                v
            })
            .collect();
        Self { coeffs }
    }

    /// Divides through by the leading coefficient.
    pub fn monic(&self) -> Polynomial {
        let lead = self.leading();
        Self { coeffs: self.coeffs.iter().map(|&c| c / lead).collect() }
    }

    /// `p(z) · (z − x)`.
    pub fn times_linear(&self, x: Complex64) -> Polynomial {
        Self { coeffs: mul_linear(&self.coeffs, x) }
    }
}

fn mul_linear(coeffs: &[Complex64], x: Complex64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
    for (k, &c) in coeffs.iter().enumerate() {
        out[k + 1] += c;
        out[k] -= c * x;
    }
    out
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.im == 0.0 {
                write!(f, "{}", c.re)?;
            } else {
                write!(f, "({}{:+}i)", c.re, c.im)?;
            }
            match k {
                0 => {}
                1 => write!(f, "z")?,
                _ => write!(f, "z^{k}")?,
            }
        }
        Ok(())
    }
}

/// Quotient and remainder of synthetic division by `(z − x)`.
#[derive(Debug, Clone)]
pub struct Deflation {
    pub quotient: Polynomial,
    pub remainder: Complex64,
}

/// Divides `p` by `(z − x)` and discards the remainder.
///
/// Fails with [`PolyError::RemainderTooLarge`] when `|p(x)|` is larger than
/// `tolerance · Σ|a_k||x|^k`, meaning `x` is not an acceptable root.
pub fn deflate(p: &Polynomial, x: Complex64, tolerance: f64) -> Result<Deflation, PolyError> {
    if p.degree() == 0 {
        return Err(PolyError::Constant);
    }
    let n = p.degree();
    let mut q = vec![Complex64::new(0.0, 0.0); n];
    let mut acc = p.coeffs[n];
    for k in (0..n).rev() {
        q[k] = acc;
        acc = p.coeffs[k] + acc * x;
    }
    let remainder = acc;
    let allowed = tolerance * p.abs_eval(x);
    if remainder.norm() > allowed {
        return Err(PolyError::RemainderTooLarge { remainder: remainder.norm(), tolerance: allowed });
    }
    let quotient = Polynomial::new(q)?;
    Ok(Deflation { quotient, remainder })
}

/// A rescaled polynomial `h(z) = p(scale · z)` whose roots lie in the open unit disk.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub poly: Polynomial,
    pub scale: f64,
}

impl Normalized {
    pub fn unscale(&self, root: Complex64) -> Complex64 {
        root * self.scale
    }
}

/// Rescales by the Cauchy bound so every root of the result is in 𝔻.
pub fn normalize(p: &Polynomial) -> Result<Normalized, PolyError> {
    if p.degree() == 0 {
        return Err(PolyError::Constant);
    }
    let scale = p.cauchy_bound();
    Ok(Normalized { poly: p.scale_argument(scale), scale })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Multiplicity {
    pub order: usize,
    /// False when no Taylor coefficient cleared the threshold, when `x` is not
    /// close to a root, or when the deciding coefficient was within a factor of
    /// ten of the threshold.
    pub confident: bool,
}

/// Smallest `m >= 1` with `|p^(m)(x)|` above `1e-6 · m! · Σ|a_k| max(1,|x|)^k`.
pub fn estimate_multiplicity(p: &Polynomial, x: Complex64) -> Multiplicity {
    let n = p.degree();
    if n == 0 {
        return Multiplicity { order: 1, confident: false };
    }
    let rho = x.norm().max(1.0);
    let scale = p.abs_eval(Complex64::new(rho, 0.0));
    let threshold = MULTIPLICITY_THRESHOLD * scale;
    let taylor = p.taylor_shift(x);
    let near_root = taylor[0].norm() <= threshold;
    for (m, b) in taylor.iter().enumerate().skip(1) {
        let size = b.norm();
        if size > threshold {
            let confident = near_root && size > 10.0 * threshold;
            return Multiplicity { order: m.min(n), confident };
        }
    }
    Multiplicity { order: 1, confident: false }
}
