//! Lyapunov exponents, Markov structure of finite minimal sets, and their
//! classification for the relaxed Newton family and a few model families.

mod classify;
mod family;
mod lyapunov;
mod markov;

pub use classify::{
    attractor_probe, classify_minimal_set, classify_quadratic_measure, Classification, ClassificationReport, ProbeConfig, ProbeSummary,
    QuadraticReport, QuadraticType, MAX_CYCLES, MAX_CYCLE_STATES,
};
pub use family::{GeneratorFamily, LogNormForm};
pub use lyapunov::{check_fixed_point, lyapunov_fixed_point, mean_log_norm, EstimateMethod, Lyapunov, LyapunovEstimate, MC_SAMPLES};
pub use markov::{closed_classes, ChainClass, LabeledChain, LabeledMap};

use crate::measure::{Generator, LambdaMeasure, MeasureError};
use crate::sphere::SphericalPoint;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error("point {point} is not fixed by every generator")]
    NotFixedPoint { point: SphericalPoint },
    #[error("family has no known finite invariant set")]
    NoFiniteInvariantSet,
    #[error("image of {point} leaves the invariant set")]
    NotInvariant { point: SphericalPoint },
    #[error("Lyapunov exponent {chi} is indistinguishable from zero (standard error {std_error})")]
    ZeroLyapunov { chi: f64, std_error: f64 },
    #[error("stationary distribution is not unique")]
    SingularChain,
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// A finite minimal set with its cyclic decomposition, exponent and type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalSetReport {
    pub points: Vec<SphericalPoint>,
    pub period: usize,
    /// Indices into `points`.
    pub cyclic_classes: Vec<Vec<usize>>,
    /// One probability vector per cyclic class, aligned with `cyclic_classes`.
    pub stationary_measures: Vec<Vec<f64>>,
    /// Stationary law on `points`.
    pub stationary: Vec<f64>,
    pub lyapunov: LyapunovEstimate,
    pub classification: ClassificationReport,
}

/// The chain a measure induces on the family's invariant set, with the set itself.
pub fn invariant_chain(family: &GeneratorFamily, measure: &LambdaMeasure) -> Result<(Vec<SphericalPoint>, LabeledChain), DynamicsError> {
    let points = family.invariant_set()?;
    let mut maps = Vec::new();
    for atom in lyapunov::chain_generators(measure) {
        let gen = Generator { label: atom.label, lambda: atom.lambda };
        let mut targets = Vec::with_capacity(points.len());
        for &p in &points {
            let image = family.apply(gen, p);
            let (idx, dist) = points
                .iter()
                .enumerate()
                .map(|(i, q)| (i, q.chordal_distance(&image)))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            if dist > 1e-8 {
                return Err(DynamicsError::NotInvariant { point: p });
            }
            targets.push(idx);
        }
        maps.push(LabeledMap { label: atom.label, prob: atom.prob, targets });
    }
    Ok((points.clone(), LabeledChain { n_states: points.len(), maps }))
}

/// Minimal sets of the family inside its finite invariant set.
pub fn markov_decompose(family: &GeneratorFamily, measure: &LambdaMeasure) -> Result<Vec<MinimalSetReport>, DynamicsError> {
    let (points, chain) = invariant_chain(family, measure)?;
    let mut reports = Vec::new();
    for class in closed_classes(&chain)? {
        let local = |s: usize| class.states.iter().position(|&t| t == s).unwrap();
        let mut chi = 0.0;
        let mut var = 0.0;
        let mut method = EstimateMethod::ClosedForm;
        for (i, &s) in class.states.iter().enumerate() {
            let est = mean_log_norm(family, measure, points[s], None)?;
            method = est.method;
            let w = class.stationary[i];
            if w > 0.0 {
                chi += w * est.value.as_f64();
                var += (w * est.std_error).powi(2);
            }
        }
        let mut report = MinimalSetReport {
            points: class.states.iter().map(|&s| points[s]).collect(),
            period: class.period,
            cyclic_classes: class.cyclic_classes.iter().map(|k| k.iter().map(|&s| local(s)).collect()).collect(),
            stationary_measures: class.cyclic_measures.clone(),
            stationary: class.stationary.clone(),
            lyapunov: LyapunovEstimate { value: Lyapunov::from_f64(chi), std_error: var.sqrt(), method },
            classification: ClassificationReport {
                classification: Classification::Mixed,
                log_sup_multiplier: 0.0,
                log_inf_multiplier: 0.0,
                cycles_examined: 0,
                exhaustive: true,
            },
        };
        report.classification = classify_minimal_set(&report, family, measure)?;
        reports.push(report);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use nalgebra::DVector;
    use num_complex::Complex64;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn rotation_period_two_example() {
        let lambda = Complex64::new(0.3, 0.1);
        let tau = LambdaMeasure::finite(vec![Atom { lambda, prob: 1.0, label: 1 }], 0).unwrap();
        let reports = markov_decompose(&GeneratorFamily::Rotation { n: 2 }, &tau).unwrap();
        let r = reports.iter().find(|r| !r.points[0].is_infinite()).unwrap();
        assert_eq!(r.period, 2);
        assert_eq!(r.points.len(), 2);
        for w in &r.stationary {
            assert!((w - 0.5).abs() < 1e-14);
        }
        let expected = 0.5 * ((c(1.0) + lambda * 2.0).norm().ln() + (c(1.0) - lambda * 2.0).norm().ln());
        assert!((r.lyapunov.value.as_f64() - expected).abs() < 1e-12);
    }

    #[test]
    fn quadratic_minimal_sets() {
        let tau = LambdaMeasure::finite_real(&[(0.5, 0.3), (6.0, 0.7)], 0).unwrap();
        let reports = markov_decompose(&GeneratorFamily::Quadratic, &tau).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].points, vec![SphericalPoint::Finite(c(0.0))]);
        assert_eq!(reports[1].points, vec![SphericalPoint::Infinity]);
        assert!(reports.iter().all(|r| r.period == 1));
    }

    #[test]
    fn newton_minimal_sets_are_roots_and_infinity() {
        let g = crate::poly::Polynomial::from_real(&[-1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let tau = LambdaMeasure::finite_real(&[(0.6, 0.5), (1.3, 0.5)], 0).unwrap();
        let roots = crate::engine::find_all_roots(&g, &LambdaMeasure::uniform_disk(0.75, 0).unwrap(), &Default::default()).unwrap();
        let fam = GeneratorFamily::relaxed_newton(g, &roots);
        let reports = markov_decompose(&fam, &tau).unwrap();
        assert_eq!(reports.len(), 5);
        assert!(reports.iter().all(|r| r.period == 1 && r.points.len() == 1));
    }

    #[test]
    fn stationary_measures_rotate_under_one_step() {
        // embedded Markov chain with period 3 on six points
        let pts: Vec<Complex64> = (0..6).map(|k| Complex64::from_polar(1.0 + 0.1 * k as f64, k as f64)).collect();
        let maps = vec![vec![2, 3, 4, 5, 0, 1], vec![3, 2, 5, 4, 1, 0]];
        let fam = GeneratorFamily::embedded_markov(pts, &maps).unwrap();
        let tau =
            LambdaMeasure::finite(vec![Atom { lambda: c(0.5), prob: 0.4, label: 0 }, Atom { lambda: c(0.7), prob: 0.6, label: 1 }], 0)
                .unwrap();
        let (points, chain) = invariant_chain(&fam, &tau).unwrap();
        let p = chain.transition_matrix();
        let reports = markov_decompose(&fam, &tau).unwrap();
        let r = reports.iter().find(|r| r.points.len() == 6).unwrap();
        assert_eq!(r.period, 3);
        let state = |local: usize| points.iter().position(|q| *q == r.points[local]).unwrap();
        let lift = |k: usize| {
            let mut v = DVector::zeros(points.len());
            for (i, &local) in r.cyclic_classes[k].iter().enumerate() {
                v[state(local)] = r.stationary_measures[k][i];
            }
            v
        };
        for k in 0..r.period {
            let next = p.transpose() * lift(k);
            assert!((next.clone() - lift((k + 1) % r.period)).amax() < 1e-12);
            let mut cycled = lift(k);
            for _ in 0..r.period {
                cycled = p.transpose() * cycled;
            }
            assert!((cycled - lift(k)).amax() < 1e-12);
        }
    }
}
