use super::DynamicsError;
use crate::engine::{newton_map, EngineConfig, RootRecord};
use crate::measure::Generator;
use crate::poly::Polynomial;
use crate::sphere::{spherical_deriv_norm, SphericalPoint};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// A one-parameter (or labelled multi-parameter) family of maps of the sphere
/// together with its finite invariant set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorFamily {
    /// `N_{g,λ}(z) = z − λ g(z)/g'(z)`; `roots` are the distinct roots with orders.
    RelaxedNewton { poly: Polynomial, roots: Vec<(Complex64, usize)> },
    /// `λ z (1 − z)`.
    Quadratic,
    /// `w^i (z + λ (z^n − 1))` with `w = e^{2πi/n}` and `i` the generator label.
    Rotation { n: usize },
    /// `P_j(z + λ g(z))` with `g = ∏ (z − x_k)` over `points` and `j` the label.
    EmbeddedMarkov { points: Vec<Complex64>, maps: Vec<Polynomial> },
}

/// `ln ‖Df_λ(z)‖_s = offset + sign · ln|a + b λ|`, or identically −∞.
///
/// Every family here has this shape on its invariant set, which gives closed
/// forms for integrals against disk measures and for extremes over supports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogNormForm {
    Affine { offset: f64, sign: f64, a: Complex64, b: Complex64 },
    Superattracting,
}

impl LogNormForm {
    pub fn eval(&self, lambda: Complex64) -> f64 {
        match *self {
            LogNormForm::Affine { offset, sign, a, b } => offset + sign * (a + b * lambda).norm().ln(),
            LogNormForm::Superattracting => f64::NEG_INFINITY,
        }
    }

    pub fn norm(&self, lambda: Complex64) -> f64 {
        self.eval(lambda).exp()
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl GeneratorFamily {
    /// Relaxed Newton family from engine output; near-equal roots are merged
    /// into one point whose order is the cluster size.
    pub fn relaxed_newton(poly: Polynomial, found: &[RootRecord]) -> Self {
        let mut roots: Vec<(Complex64, usize)> = Vec::new();
        for r in found {
            let radius = 1e-5 * r.value.norm().max(1.0);
            match roots.iter_mut().find(|(x, _)| (x - r.value).norm() <= radius) {
                Some(entry) => entry.1 += 1,
                None => roots.push((r.value, 1)),
            }
        }
        GeneratorFamily::RelaxedNewton { poly, roots }
    }

    /// Embedded Markov family realizing the given self-maps of `points`.
    ///
    /// `maps[j][k]` is the index of the image of `points[k]` under generator
    /// `j`. Each `P_j` is the Lagrange interpolant, with `g` added when the
    /// interpolant is constant so that every generator is non-constant.
    pub fn embedded_markov(points: Vec<Complex64>, maps: &[Vec<usize>]) -> Result<Self, DynamicsError> {
        if points.len() < 2 {
            return Err(DynamicsError::NoFiniteInvariantSet);
        }
        let g = Polynomial::from_roots(&points);
        let mut polys = Vec::with_capacity(maps.len());
        for map in maps {
            if map.len() != points.len() || map.iter().any(|&t| t >= points.len()) {
                return Err(DynamicsError::InvalidFamily("map must send every point into the set".into()));
            }
            let mut coeffs = vec![c(0.0); points.len()];
            for (i, &xi) in points.iter().enumerate() {
                let others: Vec<_> = points.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &x)| x).collect();
                let basis = Polynomial::from_roots(&others);
                let denom: Complex64 = others.iter().map(|&x| xi - x).product();
                let weight = points[map[i]] / denom;
                for (k, &b) in basis.coeffs().iter().enumerate() {
                    coeffs[k] += b * weight;
                }
            }
            let mut p = Polynomial::new(coeffs.clone()).unwrap_or_else(|_| g.clone());
            if p.degree() == 0 {
                let mut sum = g.coeffs().to_vec();
                sum[0] += p.coeffs()[0];
                p = Polynomial::new(sum).map_err(|e| DynamicsError::InvalidFamily(e.to_string()))?;
            }
            polys.push(p);
        }
        Ok(GeneratorFamily::EmbeddedMarkov { points, maps: polys })
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeneratorFamily::RelaxedNewton { .. } => "relaxed-newton",
            GeneratorFamily::Quadratic => "quadratic",
            GeneratorFamily::Rotation { .. } => "rotation",
            GeneratorFamily::EmbeddedMarkov { .. } => "embedded-markov",
        }
    }

    fn root_of_unity(n: usize, k: usize) -> Complex64 {
        let w = Complex64::from_polar(1.0, TAU * (k % n) as f64 / n as f64);
        let clean = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
        Complex64::new(clean(w.re), clean(w.im))
    }

    fn embedded_g(points: &[Complex64]) -> Polynomial {
        Polynomial::from_roots(points)
    }

    /// The finite invariant set Q ∪ {∞}, known in closed form per family.
    pub fn invariant_set(&self) -> Result<Vec<SphericalPoint>, DynamicsError> {
        let mut pts: Vec<SphericalPoint> = match self {
            GeneratorFamily::RelaxedNewton { roots, .. } => {
                if roots.is_empty() {
                    return Err(DynamicsError::NoFiniteInvariantSet);
                }
                roots.iter().map(|&(x, _)| SphericalPoint::Finite(x)).collect()
            }
            GeneratorFamily::Quadratic => vec![SphericalPoint::Finite(c(0.0)), SphericalPoint::Finite(c(1.0))],
            GeneratorFamily::Rotation { n } => {
                if *n < 2 {
                    return Err(DynamicsError::InvalidFamily("rotation family needs n >= 2".into()));
                }
                (0..*n).map(|k| SphericalPoint::Finite(Self::root_of_unity(*n, k))).collect()
            }
            GeneratorFamily::EmbeddedMarkov { points, .. } => points.iter().map(|&x| SphericalPoint::Finite(x)).collect(),
        };
        pts.push(SphericalPoint::Infinity);
        Ok(pts)
    }

    /// `f_gen(z)` on the sphere. A relaxed Newton map sends critical non-root
    /// points to its pole at ∞.
    pub fn apply(&self, gen: Generator, z: SphericalPoint) -> SphericalPoint {
        let SphericalPoint::Finite(z) = z else {
            return SphericalPoint::Infinity;
        };
        match self {
            GeneratorFamily::RelaxedNewton { poly, .. } => match newton_map(poly, gen.lambda, z, &EngineConfig::default()) {
                Ok(w) => SphericalPoint::from_complex(w),
                Err(_) => SphericalPoint::Infinity,
            },
            _ => SphericalPoint::from_complex(self.eval_polynomial_map(gen, z)),
        }
    }

    fn eval_polynomial_map(&self, gen: Generator, z: Complex64) -> Complex64 {
        match self {
            GeneratorFamily::Quadratic => gen.lambda * z * (c(1.0) - z),
            GeneratorFamily::Rotation { n } => Self::root_of_unity(*n, gen.label) * (z + gen.lambda * (z.powu(*n as u32) - c(1.0))),
            GeneratorFamily::EmbeddedMarkov { points, maps } => {
                let g = Self::embedded_g(points);
                maps[gen.label % maps.len()].eval(z + gen.lambda * g.eval(z))
            }
            GeneratorFamily::RelaxedNewton { .. } => unreachable!("handled by apply"),
        }
    }

    /// `f_gen'(z)` at a finite point (for relaxed Newton, away from roots of
    /// order > 1 where the quotient is removable).
    pub fn derivative(&self, gen: Generator, z: Complex64) -> Complex64 {
        let l = gen.lambda;
        match self {
            GeneratorFamily::RelaxedNewton { poly, .. } => {
                // N' = 1 − λ (1 − g g'' / g'^2)
                let d1 = poly.derivative().expect("non-constant");
                let (p, dp) = poly.eval_with_derivative(z);
                let ddp = d1.derivative().map(|d2| d2.eval(z)).unwrap_or(c(0.0));
                c(1.0) - l * (c(1.0) - p * ddp / (dp * dp))
            }
            GeneratorFamily::Quadratic => l * (c(1.0) - z * 2.0),
            GeneratorFamily::Rotation { n } => Self::root_of_unity(*n, gen.label) * (c(1.0) + l * (*n as f64) * z.powu(*n as u32 - 1)),
            GeneratorFamily::EmbeddedMarkov { points, maps } => {
                let g = Self::embedded_g(points);
                let (gv, dg) = g.eval_with_derivative(z);
                let p = &maps[gen.label % maps.len()];
                let (_, dp) = p.eval_with_derivative(z + l * gv);
                dp * (c(1.0) + l * dg)
            }
        }
    }

    fn degree_at_infinity(&self, label: usize) -> usize {
        match self {
            GeneratorFamily::RelaxedNewton { .. } => 1,
            GeneratorFamily::Quadratic => 2,
            GeneratorFamily::Rotation { n } => *n,
            GeneratorFamily::EmbeddedMarkov { points, maps } => maps[label % maps.len()].degree() * points.len(),
        }
    }

    /// The shape of `ln ‖Df_λ‖_s` at a point of the invariant set, as a
    /// function of λ for a fixed label.
    ///
    /// `order` is the multiplicity used at roots of the relaxed Newton family
    /// (the multiplier there is `1 − λ/m`).
    pub fn log_norm_form(&self, label: usize, point: SphericalPoint, order: Option<usize>) -> Result<LogNormForm, DynamicsError> {
        let probe = Generator { label, lambda: c(0.5) };
        match (self, point) {
            (GeneratorFamily::RelaxedNewton { poly, .. }, SphericalPoint::Infinity) => {
                let d = poly.degree() as f64;
                Ok(LogNormForm::Affine { offset: 0.0, sign: -1.0, a: c(1.0), b: c(-1.0 / d) })
            }
            (GeneratorFamily::RelaxedNewton { roots, .. }, SphericalPoint::Finite(x)) => {
                let m = match order {
                    Some(m) => m,
                    None => roots
                        .iter()
                        .find(|(r, _)| (r - x).norm() <= 1e-8 * r.norm().max(1.0))
                        .map(|&(_, m)| m)
                        .ok_or(DynamicsError::NotFixedPoint { point })?,
                };
                Ok(LogNormForm::Affine { offset: 0.0, sign: 1.0, a: c(1.0), b: c(-1.0 / m as f64) })
            }
            (_, SphericalPoint::Infinity) => {
                if self.degree_at_infinity(label) >= 2 {
                    Ok(LogNormForm::Superattracting)
                } else {
                    Err(DynamicsError::InvalidFamily("affine generator at infinity".into()))
                }
            }
            (_, SphericalPoint::Finite(z)) => {
                let image = self.eval_polynomial_map(probe, z);
                let spherical = (1.0 + z.norm_sqr()).ln() - (1.0 + image.norm_sqr()).ln();
                let (scale, a, b) = match self {
                    GeneratorFamily::Quadratic => (c(1.0) - z * 2.0, c(0.0), c(1.0)),
                    GeneratorFamily::Rotation { n } => (Self::root_of_unity(*n, label), c(1.0), z.powu(*n as u32 - 1) * (*n as f64)),
                    GeneratorFamily::EmbeddedMarkov { points, maps } => {
                        let g = Self::embedded_g(points);
                        let p = &maps[label % maps.len()];
                        let dp = p.derivative().map(|d| d.eval(z)).unwrap_or(c(0.0));
                        (dp, c(1.0), g.derivative().expect("non-constant").eval(z))
                    }
                    GeneratorFamily::RelaxedNewton { .. } => unreachable!(),
                };
                if scale.norm() == 0.0 {
                    return Ok(LogNormForm::Superattracting);
                }
                Ok(LogNormForm::Affine { offset: scale.norm().ln() + spherical, sign: 1.0, a, b })
            }
        }
    }

    /// `‖D(f_gen)_z‖_s` at a point of the invariant set.
    pub fn deriv_norm(&self, gen: Generator, point: SphericalPoint) -> Result<f64, DynamicsError> {
        Ok(self.log_norm_form(gen.label, point, None)?.norm(gen.lambda))
    }

    /// `‖D(f_gen)_z‖_s` at an arbitrary finite point whose image is finite.
    pub fn deriv_norm_at(&self, gen: Generator, z: Complex64) -> f64 {
        let image = self.apply(gen, SphericalPoint::Finite(z));
        if image.is_infinite() {
            return f64::INFINITY;
        }
        spherical_deriv_norm(self.derivative(gen, z), SphericalPoint::Finite(z), image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(label: usize, l: f64) -> Generator {
        Generator { label, lambda: c(l) }
    }

    #[test]
    fn newton_multipliers() {
        let g = Polynomial::from_real(&[2.0, -2.0, 0.0, 1.0]).unwrap();
        let fam = GeneratorFamily::RelaxedNewton { poly: g, roots: vec![(c(-1.7692923542386314), 1)] };
        let at_inf = fam.deriv_norm(gen(0, 1.0), SphericalPoint::Infinity).unwrap();
        assert!((at_inf - 1.5).abs() < 1e-15);
        let at_root = fam.deriv_norm(gen(0, 0.5), SphericalPoint::Finite(c(-1.7692923542386314))).unwrap();
        assert!((at_root - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rotation_maps_roots_of_unity() {
        let fam = GeneratorFamily::Rotation { n: 3 };
        let q = fam.invariant_set().unwrap();
        let image = fam.apply(gen(1, 0.7), q[0]);
        assert!(image.chordal_distance(&q[1]) < 1e-12);
        let d = fam.derivative(gen(1, 0.7), q[0].finite().unwrap()).norm();
        assert!((fam.deriv_norm(gen(1, 0.7), q[0]).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn log_norm_form_agrees_with_direct_derivative() {
        let pts = vec![c(0.0), c(1.0), Complex64::new(-0.5, 0.8)];
        let fam = GeneratorFamily::embedded_markov(pts.clone(), &[vec![1, 2, 0], vec![0, 0, 1]]).unwrap();
        for label in 0..2 {
            for &x in &pts {
                let g = Generator { label, lambda: Complex64::new(0.3, -0.2) };
                let direct = fam.deriv_norm_at(g, x);
                let form = fam.deriv_norm(g, SphericalPoint::Finite(x)).unwrap();
                assert!((direct - form).abs() < 1e-10 * direct.max(1.0), "{direct} vs {form}");
            }
        }
        for fam in [GeneratorFamily::Quadratic, GeneratorFamily::Rotation { n: 4 }] {
            for p in fam.invariant_set().unwrap().into_iter().filter_map(|p| p.finite()) {
                let g = gen(3, 1.3);
                let direct = fam.deriv_norm_at(g, p);
                let form = fam.deriv_norm(g, SphericalPoint::Finite(p)).unwrap();
                assert!((direct - form).abs() < 1e-10 * direct.max(1.0));
            }
        }
    }

    #[test]
    fn embedded_markov_realizes_maps() {
        let pts = vec![c(-1.0), c(0.0), c(2.0)];
        let maps = vec![vec![1, 2, 0], vec![0, 0, 0]];
        let fam = GeneratorFamily::embedded_markov(pts.clone(), &maps).unwrap();
        for (j, map) in maps.iter().enumerate() {
            for (k, &x) in pts.iter().enumerate() {
                let y = fam.apply(gen(j, 0.8), SphericalPoint::Finite(x));
                assert!(y.chordal_distance(&SphericalPoint::Finite(pts[map[k]])) < 1e-10);
            }
        }
        // constant interpolant replaced by a non-constant one
        if let GeneratorFamily::EmbeddedMarkov { maps, .. } = &fam {
            assert!(maps[1].degree() >= 2);
        }
    }

    #[test]
    fn chart_consistency_of_spherical_norm() {
        let fam = GeneratorFamily::Quadratic;
        let g = Generator { label: 0, lambda: Complex64::new(0.7, 0.4) };
        for k in 0..32 {
            let r = 0.5 + 1.5 * k as f64 / 31.0;
            let z = Complex64::from_polar(r, 0.37 * k as f64);
            let fz = g.lambda * z * (c(1.0) - z);
            let direct = fam.deriv_norm_at(g, z);
            // u = 1/z chart on both sides: F(u) = 1/f(1/u), F'(u) = f'(z) z² / f(z)²
            let u = c(1.0) / z;
            let fu = c(1.0) / fz;
            let dfu = fam.derivative(g, z) * z * z / (fz * fz);
            let charted = spherical_deriv_norm(dfu, SphericalPoint::Finite(u), SphericalPoint::Finite(fu));
            assert!((direct - charted).abs() <= 1e-10 * direct, "{direct} vs {charted}");
        }
    }
}
