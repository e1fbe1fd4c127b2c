use super::{MonteCarloError, TEstimate};
use crate::dynamics::GeneratorFamily;
use crate::engine::RootRecord;
use crate::measure::LambdaMeasure;
use crate::par::{map_indices, Execution};
use crate::sphere::SphericalPoint;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Bounded continuous observables on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant {
        value: Complex64,
    },
    /// `w / (1 + |w|²)`, zero at ∞.
    Coordinate,
    /// `1 / (1 + |w|²)`, zero at ∞.
    SphericalWeight,
    /// Tent of height 1 and chordal radius `radius` around `center`.
    Bump {
        center: Complex64,
        radius: f64,
    },
}

impl TestFunction {
    pub fn eval(&self, p: SphericalPoint) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        match (*self, p) {
            (TestFunction::Constant { value }, _) => value,
            (TestFunction::Coordinate | TestFunction::SphericalWeight, SphericalPoint::Infinity) => zero,
            (TestFunction::Coordinate, SphericalPoint::Finite(w)) => w / (1.0 + w.norm_sqr()),
            (TestFunction::SphericalWeight, SphericalPoint::Finite(w)) => Complex64::new(1.0 / (1.0 + w.norm_sqr()), 0.0),
            (TestFunction::Bump { center, radius }, p) => {
                let d = SphericalPoint::Finite(center).chordal_distance(&p);
                Complex64::new((1.0 - d / radius).max(0.0), 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionEstimate {
    pub mean: Complex64,
    /// Standard error of the mean, from the sample variance of `|φ − mean|`.
    pub std_error: f64,
    pub runs: u64,
    pub n_steps: usize,
}

/// Monte Carlo estimate of `(M_τⁿ φ)(z) = E φ(γ_{n,1}(z))`.
///
/// Orbits take exactly `n_steps` steps; a relaxed Newton step from a
/// critical non-root point lands on the pole at ∞.
pub fn estimate_transition_operator(
    family: &GeneratorFamily,
    measure: &LambdaMeasure,
    phi: &TestFunction,
    z: SphericalPoint,
    n_steps: usize,
    runs: u64,
    execution: Execution,
) -> Result<TransitionEstimate, MonteCarloError> {
    if runs < 2 {
        return Err(MonteCarloError::InvalidArgument("runs must be at least 2".into()));
    }
    let values = map_indices(runs, execution, |k| {
        let mut stream = measure.stream(k);
        let mut w = z;
        for _ in 0..n_steps {
            w = family.apply(stream.next_generator(), w);
        }
        phi.eval(w)
    });
    let n = runs as f64;
    let mean: Complex64 = values.iter().sum::<Complex64>() / n;
    let var = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    Ok(TransitionEstimate { mean, std_error: (var / n).sqrt(), runs, n_steps })
}

/// `Σ_x T_x(z) φ(x) + T_∞(z) φ(∞)`, the limit the transition operator approaches.
pub fn predicted_limit(t: &TEstimate, roots: &[RootRecord], phi: &TestFunction) -> Complex64 {
    let roots_part: Complex64 = t.per_root.iter().zip(roots).map(|(p, r)| phi.eval(SphericalPoint::Finite(r.value)) * p.p).sum();
    roots_part + phi.eval(SphericalPoint::Infinity) * t.escape.p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;
    use crate::montecarlo::estimate_t;
    use crate::poly::Polynomial;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn newton_z2m1() -> (Polynomial, Vec<RootRecord>, GeneratorFamily) {
        let g = Polynomial::from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let roots = vec![RootRecord::on(&g, c(1.0), 1e-10), RootRecord::on(&g, c(-1.0), 1e-10)];
        let fam = GeneratorFamily::relaxed_newton(g.clone(), &roots);
        (g, roots, fam)
    }

    #[test]
    fn constant_is_preserved_exactly() {
        let (_, _, fam) = newton_z2m1();
        let tau = LambdaMeasure::uniform_disk(0.75, 1).unwrap();
        let phi = TestFunction::Constant { value: c(1.0) };
        for n in [0, 1, 7, 50] {
            let e = estimate_transition_operator(
                &fam,
                &tau,
                &phi,
                SphericalPoint::Finite(Complex64::new(0.3, 0.4)),
                n,
                100,
                Execution::Parallel,
            )
            .unwrap();
            assert_eq!(e.mean, c(1.0));
            assert_eq!(e.std_error, 0.0);
        }
    }

    #[test]
    fn bump_matches_convergence_probability() {
        let (g, roots, fam) = newton_z2m1();
        let tau = LambdaMeasure::uniform_disk(0.75, 2).unwrap();
        let z = Complex64::new(0.05, 1.0);
        let t = estimate_t(&g, &tau, z, &roots, 2000, &EngineConfig::default()).unwrap();
        let phi = TestFunction::Bump { center: c(1.0), radius: 0.1 };
        let e = estimate_transition_operator(&fam, &tau, &phi, SphericalPoint::Finite(z), 300, 2000, Execution::Parallel).unwrap();
        let p = t.per_root[0].p;
        let se = (p * (1.0 - p) / 2000.0).sqrt();
        assert!((e.mean.re - p).abs() <= 2.0 * se, "{} vs {p}", e.mean.re);
        assert!((predicted_limit(&t, &roots, &phi).re - p).abs() < 1e-15);
    }

    #[test]
    fn escaping_quadratic_orbits_kill_spherical_weight() {
        let tau = LambdaMeasure::finite_real(&[(0.5, 0.5), (6.0, 0.5)], 3).unwrap();
        let e = estimate_transition_operator(
            &GeneratorFamily::Quadratic,
            &tau,
            &TestFunction::SphericalWeight,
            SphericalPoint::Finite(Complex64::new(0.3, 0.2)),
            500,
            2000,
            Execution::Parallel,
        )
        .unwrap();
        assert!(e.mean.re < 0.02, "{}", e.mean.re);
    }
}
