use num_complex::Complex64;
use stochnewton::dynamics::{markov_decompose, Classification, GeneratorFamily, MinimalSetReport};
use stochnewton::measure::{Atom, LambdaMeasure};
use stochnewton::{find_all_roots, Polynomial, SphericalPoint};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Mean over words of `(1/n) log ‖D(f_{λ_n} ∘ … ∘ f_{λ_1})_x‖_s`, with its standard error.
fn birkhoff(family: &GeneratorFamily, tau: &LambdaMeasure, x: Complex64, words: u64, n: usize) -> (f64, f64) {
    let avgs: Vec<f64> = (0..words)
        .map(|w| {
            let mut s = tau.stream(w);
            // x is fixed, so the chain rule multiplies derivatives at x
            (0..n).map(|_| family.deriv_norm_at(s.next_generator(), x).ln()).sum::<f64>() / n as f64
        })
        .collect();
    let mean = avgs.iter().sum::<f64>() / words as f64;
    let var = avgs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (words - 1) as f64;
    (mean, (var / words as f64).sqrt())
}

fn find(reports: &[MinimalSetReport], p: SphericalPoint) -> &MinimalSetReport {
    reports.iter().find(|r| r.points.iter().any(|q| q.chordal_distance(&p) < 1e-9)).unwrap()
}

#[test]
fn lyapunov_matches_birkhoff_averages() {
    let tau = LambdaMeasure::finite_real(&[(0.5, 0.3), (6.0, 0.7)], 11).unwrap();
    let fam = GeneratorFamily::Quadratic;
    let reports = markov_decompose(&fam, &tau).unwrap();
    let chi = find(&reports, SphericalPoint::Finite(c(0.0))).lyapunov.value.as_f64();
    let (mean, se) = birkhoff(&fam, &tau, c(0.0), 200, 10_000);
    assert!((chi - mean).abs() < 3.0 * se, "{chi} vs {mean} ± {se}");

    let g = Polynomial::from_real(&[2.0, -2.0, 0.0, 1.0]).unwrap();
    let roots = find_all_roots(&g, &LambdaMeasure::uniform_disk(0.75, 0).unwrap(), &Default::default()).unwrap();
    let fam = GeneratorFamily::relaxed_newton(g, &roots);
    let tau = LambdaMeasure::finite(
        vec![Atom { lambda: Complex64::new(0.4, 0.3), prob: 0.25, label: 0 }, Atom { lambda: c(1.6), prob: 0.75, label: 0 }],
        12,
    )
    .unwrap();
    let reports = markov_decompose(&fam, &tau).unwrap();
    for r in roots.iter().map(|r| r.value) {
        let chi = find(&reports, SphericalPoint::Finite(r)).lyapunov.value.as_f64();
        let (mean, se) = birkhoff(&fam, &tau, r, 200, 10_000);
        assert!((chi - mean).abs() < 3.0 * se.max(1e-9), "{chi} vs {mean} ± {se}");
    }
}

fn perturbed_starts(p: SphericalPoint, count: usize) -> Vec<SphericalPoint> {
    (0..count)
        .map(|k| {
            let angle = 0.7 + k as f64 * 2.399963229728653;
            match p {
                // chordal distance ≈ 2|δ|/(1+|z|²) ≤ 1e-3
                SphericalPoint::Finite(z) => {
                    let scale = 0.9e-3 * (1.0 + z.norm_sqr()) / 2.0;
                    SphericalPoint::Finite(z + Complex64::from_polar(scale, angle))
                }
                SphericalPoint::Infinity => SphericalPoint::Finite(Complex64::from_polar(2.5e3, angle)),
            }
        })
        .collect()
}

fn distance_to_set(z: SphericalPoint, set: &[SphericalPoint]) -> f64 {
    set.iter().map(|q| q.chordal_distance(&z)).fold(f64::INFINITY, f64::min)
}

/// Attracting sets pull every nearby start back; expanding sets push every one out.
fn check_soundness(family: &GeneratorFamily, tau: &LambdaMeasure) -> usize {
    let mut checked = 0;
    for report in markov_decompose(family, tau).unwrap() {
        let starts: Vec<_> = report.points.iter().flat_map(|&p| perturbed_starts(p, 100 / report.points.len())).collect();
        match report.classification.classification {
            Classification::Attracting => {
                for (k, &z0) in starts.iter().enumerate() {
                    let mut s = tau.stream(k as u64);
                    let mut z = z0;
                    for _ in 0..2000 {
                        z = family.apply(s.next_generator(), z);
                    }
                    assert!(distance_to_set(z, &report.points) < 1e-8, "{z0} did not return to {:?}", report.points);
                }
                checked += 1;
            }
            Classification::Expanding => {
                for (k, &z0) in starts.iter().enumerate() {
                    let mut s = tau.stream(k as u64);
                    let mut z = z0;
                    let left = (0..2000).any(|_| {
                        z = family.apply(s.next_generator(), z);
                        distance_to_set(z, &report.points) > 1e-2
                    });
                    assert!(left, "{z0} stayed near {:?}", report.points);
                }
                checked += 1;
            }
            _ => {}
        }
    }
    checked
}

#[test]
fn cycle_classification_is_sound() {
    let g = Polynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]).unwrap();
    let roots = find_all_roots(&g, &LambdaMeasure::uniform_disk(0.75, 0).unwrap(), &Default::default()).unwrap();
    let newton = GeneratorFamily::relaxed_newton(g, &roots);
    let tau = LambdaMeasure::finite_real(&[(0.5, 0.5), (1.5, 0.5)], 1).unwrap();
    assert_eq!(check_soundness(&newton, &tau), 4);

    let rotation = GeneratorFamily::Rotation { n: 2 };
    let tau = LambdaMeasure::finite(vec![Atom { lambda: c(0.2), prob: 1.0, label: 1 }], 2).unwrap();
    assert_eq!(check_soundness(&rotation, &tau), 2);

    let tau = LambdaMeasure::finite_real(&[(0.5, 0.5), (0.9, 0.5)], 3).unwrap();
    assert_eq!(check_soundness(&GeneratorFamily::Quadratic, &tau), 2);
}
