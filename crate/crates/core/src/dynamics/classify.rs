use super::family::{GeneratorFamily, LogNormForm};
use super::lyapunov::{mean_log_norm, Lyapunov, LyapunovEstimate};
use super::{DynamicsError, MinimalSetReport};
use crate::measure::{Generator, LambdaMeasure, MeasureKind};
use crate::par::{map_indices, Execution};
use crate::sphere::SphericalPoint;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Exhaustive cycle enumeration limits.
pub const MAX_CYCLE_STATES: usize = 24;
pub const MAX_CYCLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Attracting,
    Expanding,
    Mixed,
    SuperattractingPresent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classification: Classification,
    /// Supremum over cycles and labels of the multiplier product, in log scale.
    pub log_sup_multiplier: f64,
    pub log_inf_multiplier: f64,
    pub cycles_examined: usize,
    /// False when the cycle enumeration hit its caps and per-edge bounds were used.
    pub exhaustive: bool,
}

/// Extremes of `‖Df_λ‖_s` over the support of a continuous measure.
fn support_extremes(form: LogNormForm, measure: &LambdaMeasure) -> (f64, f64) {
    let LogNormForm::Affine { offset, sign, a, b } = form else {
        return (f64::NEG_INFINITY, f64::NEG_INFINITY);
    };
    let (center, inner, outer) = match measure.kind {
        MeasureKind::UniformDisk { center, radius } => (center, 0.0, radius),
        MeasureKind::UniformAnnulus { center, inner, outer } => (center, inner, outer),
        MeasureKind::FiniteSupport { .. } => unreachable!("finite supports are enumerated"),
    };
    // |a + bλ| = |b| |λ − q|
    let (lo, hi) = if b.norm() == 0.0 {
        (a.norm(), a.norm())
    } else {
        let q = -a / b;
        let dist = (q - center).norm();
        let lo = (dist - outer).max(inner - dist).max(0.0);
        (b.norm() * lo, b.norm() * (dist + outer))
    };
    let (lo, hi) = (offset + sign * lo.ln(), offset + sign * hi.ln());
    (lo.max(hi), lo.min(hi))
}

#[derive(Debug, Clone, Copy)]
struct EdgeBound {
    log_max: f64,
    log_min: f64,
}

/// Cycle-multiplier classification of a finite minimal set.
pub fn classify_minimal_set(
    report: &MinimalSetReport,
    family: &GeneratorFamily,
    measure: &LambdaMeasure,
) -> Result<ClassificationReport, DynamicsError> {
    let k = report.points.len();
    let index_of = |p: &SphericalPoint| report.points.iter().position(|q| q.chordal_distance(p) < 1e-8);
    let mut edges: BTreeMap<(usize, usize), EdgeBound> = BTreeMap::new();
    let mut zero = false;
    let mut add = |u: usize, v: usize, log_max: f64, log_min: f64| {
        let e = edges.entry((u, v)).or_insert(EdgeBound { log_max: f64::NEG_INFINITY, log_min: f64::INFINITY });
        e.log_max = e.log_max.max(log_max);
        e.log_min = e.log_min.min(log_min);
    };

    for (u, &p) in report.points.iter().enumerate() {
        match measure.atoms() {
            Some(atoms) => {
                for a in atoms.iter().filter(|a| a.prob > 0.0) {
                    let image = family.apply(Generator { label: a.label, lambda: a.lambda }, p);
                    let v = index_of(&image).ok_or(DynamicsError::NotInvariant { point: p })?;
                    let log_norm = family.log_norm_form(a.label, p, None)?.eval(a.lambda);
                    zero |= log_norm == f64::NEG_INFINITY;
                    add(u, v, log_norm, log_norm);
                }
            }
            None => {
                let image = family.apply(Generator { label: 0, lambda: measure.mean() }, p);
                let v = index_of(&image).ok_or(DynamicsError::NotInvariant { point: p })?;
                let (hi, lo) = support_extremes(family.log_norm_form(0, p, None)?, measure);
                zero |= lo == f64::NEG_INFINITY;
                add(u, v, hi, lo);
            }
        }
    }

    let (log_sup, log_inf, cycles, exhaustive) = match enumerate_cycles(k, &edges) {
        Some((sup, inf, count)) => (sup, inf, count, true),
        None => {
            // every closed walk is bounded by its worst and best edges
            let sup = edges.values().map(|e| e.log_max).fold(f64::NEG_INFINITY, f64::max);
            let inf = edges.values().map(|e| e.log_min).fold(f64::INFINITY, f64::min);
            (sup, inf, 0, false)
        }
    };
    let classification = if log_sup < 0.0 {
        Classification::Attracting
    } else if log_inf > 0.0 {
        Classification::Expanding
    } else if zero {
        Classification::SuperattractingPresent
    } else {
        Classification::Mixed
    };
    Ok(ClassificationReport {
        classification,
        log_sup_multiplier: log_sup,
        log_inf_multiplier: log_inf,
        cycles_examined: cycles,
        exhaustive,
    })
}

/// Extremes of the multiplier product over all simple cycles, or `None`
/// past the enumeration caps. A simple cycle is listed once, from its
/// smallest state.
fn enumerate_cycles(k: usize, edges: &BTreeMap<(usize, usize), EdgeBound>) -> Option<(f64, f64, usize)> {
    if k > MAX_CYCLE_STATES {
        return None;
    }
    let mut out: Vec<Vec<(usize, EdgeBound)>> = vec![Vec::new(); k];
    for (&(u, v), &e) in edges {
        out[u].push((v, e));
    }
    struct Search<'a> {
        out: &'a [Vec<(usize, EdgeBound)>],
        on_path: Vec<bool>,
        sup: f64,
        inf: f64,
        count: usize,
    }
    impl Search<'_> {
        fn dfs(&mut self, start: usize, u: usize, log_max: f64, log_min: f64) -> bool {
            for &(v, e) in &self.out[u] {
                if v == start {
                    self.count += 1;
                    self.sup = self.sup.max(log_max + e.log_max);
                    self.inf = self.inf.min(log_min + e.log_min);
                    if self.count > MAX_CYCLES {
                        return false;
                    }
                } else if v > start && !self.on_path[v] {
                    self.on_path[v] = true;
                    let ok = self.dfs(start, v, log_max + e.log_max, log_min + e.log_min);
                    self.on_path[v] = false;
                    if !ok {
                        return false;
                    }
                }
            }
            true
        }
    }
    let mut s = Search { out: &out, on_path: vec![false; k], sup: f64::NEG_INFINITY, inf: f64::INFINITY, count: 0 };
    for start in 0..k {
        s.on_path[start] = true;
        if !s.dfs(start, start, 0.0, 0.0) {
            return None;
        }
        s.on_path[start] = false;
    }
    Some((s.sup, s.inf, s.count))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadraticType {
    Ia,
    Ib,
    Ic,
    #[serde(rename = "II-candidate")]
    IiCandidate,
}

impl std::fmt::Display for QuadraticType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QuadraticType::Ia => "Ia",
            QuadraticType::Ib => "Ib",
            QuadraticType::Ic => "Ic",
            QuadraticType::IiCandidate => "II-candidate",
        })
    }
}

/// Attractor probe settings for [`classify_quadratic_measure`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub starts: usize,
    pub orbits_per_start: usize,
    pub steps: usize,
    /// Tail over which an orbit must stay away from 0 and ∞.
    pub tail: usize,
    pub separation: f64,
    /// Fraction of orbits that must qualify.
    pub min_fraction: f64,
    pub execution: Execution,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            starts: 50,
            orbits_per_start: 20,
            steps: 500,
            tail: 50,
            separation: 0.05,
            min_fraction: 0.01,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub orbits: usize,
    pub separated_orbits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticReport {
    pub kind: QuadraticType,
    pub sup_abs_lambda: f64,
    pub chi: Option<LyapunovEstimate>,
    pub probe: Option<ProbeSummary>,
}

/// Type of `λ z (1 − z)` under a random choice of λ.
pub fn classify_quadratic_measure(measure: &LambdaMeasure, probe: &ProbeConfig) -> Result<QuadraticReport, DynamicsError> {
    let sup_abs_lambda = measure.support_radius_about(Complex64::new(0.0, 0.0));
    if sup_abs_lambda < 1.0 {
        return Ok(QuadraticReport { kind: QuadraticType::Ia, sup_abs_lambda, chi: None, probe: None });
    }
    let family = GeneratorFamily::Quadratic;
    let chi = mean_log_norm(&family, measure, SphericalPoint::Finite(Complex64::new(0.0, 0.0)), None)?;
    let value = match chi.value {
        Lyapunov::Finite(x) => x,
        Lyapunov::NegInfinity => f64::NEG_INFINITY,
    };
    if value.abs() < (3.0 * chi.std_error).max(1e-12) {
        return Err(DynamicsError::ZeroLyapunov { chi: value, std_error: chi.std_error });
    }
    if value < 0.0 {
        return Ok(QuadraticReport { kind: QuadraticType::Ib, sup_abs_lambda, chi: Some(chi), probe: None });
    }
    let summary = attractor_probe(&family, measure, probe);
    let flagged = summary.separated_orbits as f64 >= probe.min_fraction * summary.orbits as f64 && summary.separated_orbits > 0;
    let kind = if flagged { QuadraticType::IiCandidate } else { QuadraticType::Ic };
    Ok(QuadraticReport { kind, sup_abs_lambda, chi: Some(chi), probe: Some(summary) })
}

/// Counts random orbits whose tail stays bounded and away from 0 and ∞.
pub fn attractor_probe(family: &GeneratorFamily, measure: &LambdaMeasure, cfg: &ProbeConfig) -> ProbeSummary {
    let per = cfg.orbits_per_start as u64;
    let total = cfg.starts as u64 * per;
    let zero = SphericalPoint::Finite(Complex64::new(0.0, 0.0));
    let hits = map_indices(total, cfg.execution, |run| {
        // starts on a golden-angle spiral inside |z| < 1.5, avoiding 0 and 1
        let s = (run / per) as f64;
        let radius = 1.5 * ((s + 0.5) / cfg.starts as f64).sqrt();
        let mut z = SphericalPoint::Finite(Complex64::from_polar(radius, 2.399963229728653 * s + 0.1));
        let mut stream = measure.stream(run);
        let mut separated = true;
        for step in 0..cfg.steps {
            z = family.apply(stream.next_generator(), z);
            if z.is_infinite() {
                return false;
            }
            if step + cfg.tail >= cfg.steps
                && (z.chordal_distance(&zero) <= cfg.separation || z.chordal_distance(&SphericalPoint::Infinity) <= cfg.separation)
            {
                separated = false;
            }
        }
        separated
    });
    ProbeSummary { orbits: total as usize, separated_orbits: hits.into_iter().filter(|&h| h).count() }
}
