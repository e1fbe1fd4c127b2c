//! Monte Carlo estimators over independent random orbits.
//!
//! Every orbit draws its parameters from the stream keyed by its run index,
//! so estimates are identical whether runs execute in parallel or not.

mod basin;
mod rate;
mod transition;

pub use basin::{render_basin, BasinCell, BasinGrid, BasinSpec, MAX_RESOLUTION};
pub use rate::{empirical_rate, rate_check, windowed_slopes, RateFit, RateSummary, MIN_TRACE_LEN};
pub use transition::{estimate_transition_operator, predicted_limit, TestFunction, TransitionEstimate};

use crate::engine::{run_random_orbit, EngineConfig, EngineError, OrbitStatus, RootRecord};
use crate::measure::LambdaMeasure;
use crate::par::map_indices;
use crate::poly::Polynomial;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum MonteCarloError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("trace has {len} usable entries, need at least {min}")]
    TraceTooShort { len: usize, min: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

const Z95: f64 = 1.959963984540054;

/// A count out of `runs` with its Wilson score interval at 95%.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub count: u64,
    pub p: f64,
    pub wilson95: [f64; 2],
}

impl Proportion {
    pub fn new(count: u64, runs: u64) -> Self {
        let n = runs as f64;
        let p = count as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self { count, p, wilson95: [(center - half).max(0.0), (center + half).min(1.0)] }
    }

    /// Binomial standard error `sqrt(p(1 − p)/n)`.
    pub fn std_error(&self, runs: u64) -> f64 {
        (self.p * (1.0 - self.p) / runs as f64).sqrt()
    }
}

/// Outcome frequencies of random orbits from one starting point.
///
/// Every run lands in exactly one of `per_root`, `escape`, `critical_hit` or
/// `unresolved`; the last splits into out-of-iterations, detected cycles and
/// convergence to a root outside the supplied list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TEstimate {
    pub z: Complex64,
    pub runs: u64,
    pub per_root: Vec<Proportion>,
    pub escape: Proportion,
    pub critical_hit: Proportion,
    pub unresolved: Proportion,
    pub max_iterations: u64,
    pub detected_cycle: u64,
    pub unmatched_root: u64,
}

impl TEstimate {
    fn from_statuses(z: Complex64, n_roots: usize, statuses: &[OrbitStatus]) -> Self {
        let runs = statuses.len() as u64;
        let mut per_root = vec![0u64; n_roots];
        let (mut escape, mut critical, mut max_it, mut cycle, mut unmatched) = (0, 0, 0, 0, 0);
        for s in statuses {
            match *s {
                OrbitStatus::ConvergedToRoot(Some(i)) => per_root[i] += 1,
                OrbitStatus::ConvergedToRoot(None) => unmatched += 1,
                OrbitStatus::EscapedToInfinity => escape += 1,
                OrbitStatus::HitCriticalPoint => critical += 1,
                OrbitStatus::MaxIterations => max_it += 1,
                OrbitStatus::DetectedCycle(_) => cycle += 1,
            }
        }
        TEstimate {
            z,
            runs,
            per_root: per_root.into_iter().map(|c| Proportion::new(c, runs)).collect(),
            escape: Proportion::new(escape, runs),
            critical_hit: Proportion::new(critical, runs),
            unresolved: Proportion::new(max_it + cycle + unmatched, runs),
            max_iterations: max_it,
            detected_cycle: cycle,
            unmatched_root: unmatched,
        }
    }

    /// Total converged mass `Σ_x T_x(z)`.
    pub fn root_mass(&self) -> f64 {
        self.per_root.iter().map(|p| p.count).sum::<u64>() as f64 / self.runs as f64
    }

    /// Most likely root and its probability; `None` when no run converged.
    pub fn argmax_root(&self) -> Option<(usize, f64)> {
        self.per_root
            .iter()
            .enumerate()
            .filter(|(_, p)| p.count > 0)
            .max_by(|a, b| a.1.count.cmp(&b.1.count).then(b.0.cmp(&a.0)))
            .map(|(i, p)| (i, p.p))
    }
}

/// Estimates `T_{x,τ}(z)` for each supplied root from `runs` orbits with
/// run indices `0..runs`.
pub fn estimate_t(
    g: &Polynomial,
    measure: &LambdaMeasure,
    z: Complex64,
    roots: &[RootRecord],
    runs: u64,
    cfg: &EngineConfig,
) -> Result<TEstimate, MonteCarloError> {
    estimate_t_from(g, measure, z, roots, 0, runs, cfg)
}

/// [`estimate_t`] with run indices `first_run..first_run + runs`.
pub fn estimate_t_from(
    g: &Polynomial,
    measure: &LambdaMeasure,
    z: Complex64,
    roots: &[RootRecord],
    first_run: u64,
    runs: u64,
    cfg: &EngineConfig,
) -> Result<TEstimate, MonteCarloError> {
    if runs == 0 {
        return Err(MonteCarloError::InvalidArgument("runs must be at least 1".into()));
    }
    cfg.validate_for(g)?;
    measure.require_relaxation_disk().map_err(EngineError::from)?;
    let statuses = map_indices(runs, cfg.execution, |k| run_random_orbit(g, measure, z, roots, cfg, first_run + k).map(|o| o.status))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TEstimate::from_statuses(z, roots.len(), &statuses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Execution;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn z2m1() -> (Polynomial, Vec<RootRecord>) {
        let g = Polynomial::from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let roots = vec![RootRecord::on(&g, c(1.0, 0.0), 1e-10), RootRecord::on(&g, c(-1.0, 0.0), 1e-10)];
        (g, roots)
    }

    fn accounted(t: &TEstimate) -> bool {
        let counts: u64 = t.per_root.iter().map(|p| p.count).sum::<u64>() + t.escape.count + t.critical_hit.count + t.unresolved.count;
        let probs: f64 = t.per_root.iter().map(|p| p.p).sum::<f64>() + t.escape.p + t.critical_hit.p + t.unresolved.p;
        counts == t.runs && (probs - 1.0).abs() < 1e-12
    }

    #[test]
    fn start_at_root_converges_there() {
        let (g, roots) = z2m1();
        let tau = LambdaMeasure::uniform_disk(0.75, 1).unwrap();
        let t = estimate_t(&g, &tau, c(-1.0, 0.0), &roots, 200, &EngineConfig::default()).unwrap();
        assert_eq!(t.per_root[1].p, 1.0);
        assert_eq!(t.per_root[0].p + t.escape.p + t.critical_hit.p + t.unresolved.p, 0.0);
    }

    #[test]
    fn quadratic_sum_rule() {
        let (g, roots) = z2m1();
        let tau = LambdaMeasure::uniform_disk(0.75, 2).unwrap();
        let t = estimate_t(&g, &tau, c(2.0, 0.0), &roots, 2000, &EngineConfig::default()).unwrap();
        assert!(t.root_mass() >= 0.995);
        assert!(t.escape.p < 0.005);
        assert!(accounted(&t));
    }

    #[test]
    fn critical_start_hits_pole() {
        let g = Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap();
        let roots = vec![RootRecord::on(&g, c(0.0, 1.0), 1e-10), RootRecord::on(&g, c(0.0, -1.0), 1e-10)];
        let tau = LambdaMeasure::uniform_disk(0.75, 3).unwrap();
        let t = estimate_t(&g, &tau, c(0.0, 0.0), &roots, 100, &EngineConfig::default()).unwrap();
        assert_eq!(t.critical_hit.p, 1.0);
        assert!(accounted(&t));
    }

    #[test]
    fn execution_mode_does_not_change_results() {
        let g = Polynomial::from_real(&[2.0, -2.0, 0.0, 1.0]).unwrap();
        let tau = LambdaMeasure::uniform_disk(0.75, 4).unwrap();
        let roots = crate::engine::find_all_roots(&g, &tau, &EngineConfig::default()).unwrap();
        let seq = EngineConfig { execution: Execution::Sequential, ..Default::default() };
        let a = estimate_t(&g, &tau, c(0.3, 0.2), &roots, 500, &seq).unwrap();
        let b = estimate_t(&g, &tau, c(0.3, 0.2), &roots, 500, &EngineConfig::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(accounted(&a));
    }

    #[test]
    fn wilson_interval_covers_edges() {
        let p = Proportion::new(0, 20);
        assert_eq!(p.wilson95[0], 0.0);
        assert!(p.wilson95[1] > 0.1 && p.wilson95[1] < 0.2);
        let q = Proportion::new(10, 20);
        assert!((q.wilson95[0] + q.wilson95[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_runs_rejected() {
        let (g, roots) = z2m1();
        let tau = LambdaMeasure::uniform_disk(0.75, 1).unwrap();
        assert!(estimate_t(&g, &tau, c(2.0, 0.0), &roots, 0, &EngineConfig::default()).is_err());
    }
}
