use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stochnewton::dynamics::{lyapunov_fixed_point, GeneratorFamily};
use stochnewton::montecarlo::{estimate_t, rate_check};
use stochnewton::{EngineConfig, LambdaMeasure, Polynomial, RootRecord, SphericalPoint, TraceOptions};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn records(g: &Polynomial, roots: &[Complex64]) -> Vec<RootRecord> {
    roots.iter().map(|&x| RootRecord::on(g, x, 1e-10)).collect()
}

#[test]
fn sum_rule_holds_across_radii() {
    let roots = [c(1.0, 0.0), c(-0.5, 0.8), c(-0.3, -0.6)];
    let g = Polynomial::from_roots(&roots);
    let recs = records(&g, &roots);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let starts: Vec<Complex64> = (0..25).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
    for r in [0.6, 0.75, 0.9] {
        let tau = LambdaMeasure::uniform_disk(r, 17).unwrap();
        for &z in &starts {
            let t = estimate_t(&g, &tau, z, &recs, 400, &EngineConfig::default()).unwrap();
            assert!(t.escape.p + t.unresolved.p <= 0.01, "r = {r}, z = {z}: {t:?}");
        }
    }
}

#[test]
fn odd_symmetry_exchanges_labels() {
    // g(−z) = −g(z): T_x(z) = T_{−x}(−z)
    let roots = [c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)];
    let g = Polynomial::from_roots(&roots);
    let recs = records(&g, &roots);
    let tau = LambdaMeasure::uniform_disk(0.75, 8).unwrap();
    let runs = 2000;
    for z in [c(0.4, 0.9), c(-1.3, 0.2), c(0.7, -0.45)] {
        let a = estimate_t(&g, &tau, z, &recs, runs, &EngineConfig::default()).unwrap();
        let b = estimate_t(&g, &tau, -z, &recs, runs, &EngineConfig::default()).unwrap();
        for (i, j) in [(0, 0), (1, 2), (2, 1)] {
            let (p, q) = (a.per_root[i].p, b.per_root[j].p);
            let pooled = (p + q) / 2.0;
            let se = (2.0 * pooled * (1.0 - pooled) / runs as f64).sqrt();
            assert!((p - q).abs() <= 3.0 * se + 1e-12, "z = {z}: {p} vs {q}");
        }
    }
}

#[test]
fn tail_slope_matches_lyapunov_exponent() {
    let g = Polynomial::from_real(&[-1.0, 0.0, 1.0]).unwrap();
    let recs = records(&g, &[c(1.0, 0.0), c(-1.0, 0.0)]);
    let tau = LambdaMeasure::uniform_disk(0.75, 3).unwrap();
    let fam = GeneratorFamily::relaxed_newton(g.clone(), &recs);
    let chi = lyapunov_fixed_point(&tau, &fam, SphericalPoint::Finite(c(1.0, 0.0)), None).unwrap().value.as_f64();
    let summary =
        rate_check(&g, &tau, c(2.0, 0.3), &recs, 200, &EngineConfig::default(), TraceOptions { lock_radius: 0.1, floor: 1e-200 }).unwrap();
    assert!(summary.fitted >= 195);
    assert!((summary.mean_slope - chi).abs() < 0.1, "{} vs {chi}", summary.mean_slope);
}

#[test]
fn estimates_are_seed_deterministic() {
    let g = Polynomial::from_real(&[2.0, -2.0, 0.0, 1.0]).unwrap();
    let recs = stochnewton::find_all_roots(&g, &LambdaMeasure::uniform_disk(0.75, 0).unwrap(), &EngineConfig::default()).unwrap();
    let run = |seed| {
        let tau = LambdaMeasure::uniform_disk(0.75, seed).unwrap();
        serde_json::to_string(&estimate_t(&g, &tau, c(0.0, 0.0), &recs, 300, &EngineConfig::default()).unwrap()).unwrap()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}
