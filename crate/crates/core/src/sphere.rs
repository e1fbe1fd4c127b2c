//! Points of the Riemann sphere and the chordal metric.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Modulus past which a finite orbit point is treated as ∞.
pub const INFINITY_THRESHOLD: f64 = 1e150;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphericalPoint {
    Finite(Complex64),
    Infinity,
}

impl SphericalPoint {
    /// Non-finite and overflowing values map to ∞.
    pub fn from_complex(z: Complex64) -> Self {
        if z.re.is_finite() && z.im.is_finite() && z.norm() < INFINITY_THRESHOLD {
            SphericalPoint::Finite(z)
        } else {
            SphericalPoint::Infinity
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, SphericalPoint::Infinity)
    }

    pub fn finite(&self) -> Option<Complex64> {
        match *self {
            SphericalPoint::Finite(z) => Some(z),
            SphericalPoint::Infinity => None,
        }
    }

    pub fn chordal_distance(&self, other: &SphericalPoint) -> f64 {
        match (*self, *other) {
            (SphericalPoint::Finite(z), SphericalPoint::Finite(w)) => chordal(z, w),
            (SphericalPoint::Finite(z), SphericalPoint::Infinity) | (SphericalPoint::Infinity, SphericalPoint::Finite(z)) => {
                2.0 / 1f64.hypot(z.norm())
            }
            (SphericalPoint::Infinity, SphericalPoint::Infinity) => 0.0,
        }
    }
}

impl From<Complex64> for SphericalPoint {
    fn from(z: Complex64) -> Self {
        SphericalPoint::from_complex(z)
    }
}

impl fmt::Display for SphericalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SphericalPoint::Finite(z) => write!(f, "{z}"),
            SphericalPoint::Infinity => write!(f, "inf"),
        }
    }
}

/// Chordal distance `2|z − w| / sqrt((1 + |z|²)(1 + |w|²))`, at most 2.
pub fn chordal(z: Complex64, w: Complex64) -> f64 {
    2.0 * ((z - w).norm() / 1f64.hypot(z.norm())) / 1f64.hypot(w.norm())
}

/// Operator norm of `Df_z` with respect to the spherical metric.
///
/// `deriv` is the derivative of `f` written in the charts at `z` and at
/// `image`: the plain coordinate for finite points and `u = 1/w` at ∞. For a
/// finite point mapped to a finite point this is
/// `|f'(z)| (1 + |z|²) / (1 + |f(z)|²)`; at a fixed point ∞ it is `|deriv|`.
pub fn spherical_deriv_norm(deriv: Complex64, z: SphericalPoint, image: SphericalPoint) -> f64 {
    let weight = |p: SphericalPoint| match p {
        SphericalPoint::Finite(w) => 1.0 + w.norm_sqr(),
        SphericalPoint::Infinity => 1.0,
    };
    deriv.norm() * weight(z) / weight(image)
}
