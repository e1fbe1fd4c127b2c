use super::MonteCarloError;
use crate::engine::{run_traced_orbit, EngineConfig, EngineError, RootRecord, TraceOptions};
use crate::measure::LambdaMeasure;
use crate::par::map_indices;
use crate::poly::Polynomial;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Fewest trace entries a slope is fitted to.
pub const MIN_TRACE_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

fn least_squares(ys: &[f64]) -> RateFit {
    let n = ys.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        let dy = y - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    RateFit { slope, intercept: mean_y - slope * mean_x, r_squared, points: ys.len() }
}

/// Least-squares slope of `log d(z_n, x)` against `n`.
///
/// The trace is cut at its first non-finite entry (a distance of exactly 0).
pub fn empirical_rate(trace: &[f64]) -> Result<RateFit, MonteCarloError> {
    let usable = trace.iter().take_while(|v| v.is_finite()).count();
    if usable < MIN_TRACE_LEN {
        return Err(MonteCarloError::TraceTooShort { len: usable, min: MIN_TRACE_LEN });
    }
    Ok(least_squares(&trace[..usable]))
}

/// Slopes over sliding windows of `window` entries.
pub fn windowed_slopes(trace: &[f64], window: usize) -> Vec<f64> {
    let usable = trace.iter().take_while(|v| v.is_finite()).count();
    trace[..usable].windows(window.max(2)).map(|w| least_squares(w).slope).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub traces: u64,
    /// Slope per run index; `None` when the orbit did not converge or its trace was too short.
    pub slopes: Vec<Option<f64>>,
    pub fitted: usize,
    pub mean_slope: f64,
    pub std_error: f64,
}

/// Fits the contraction rate of `traces` random orbits from `z0` into
/// whichever known root each converges to.
pub fn rate_check(
    g: &Polynomial,
    measure: &LambdaMeasure,
    z0: Complex64,
    roots: &[RootRecord],
    traces: u64,
    cfg: &EngineConfig,
    trace: TraceOptions,
) -> Result<RateSummary, MonteCarloError> {
    cfg.validate_for(g)?;
    measure.require_relaxation_disk().map_err(EngineError::from)?;
    let outcomes = map_indices(traces, cfg.execution, |k| run_traced_orbit(g, measure, z0, roots, cfg, k, trace))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let slopes: Vec<Option<f64>> = outcomes
        .iter()
        .map(|o| {
            if !o.converged() {
                return None;
            }
            o.log_distance_trace.as_deref().and_then(|t| empirical_rate(t).ok()).map(|f| f.slope)
        })
        .collect();
    let fitted: Vec<f64> = slopes.iter().flatten().copied().collect();
    if fitted.len() < 2 {
        return Err(MonteCarloError::InvalidArgument(format!("only {} of {traces} traces could be fitted", fitted.len())));
    }
    let n = fitted.len() as f64;
    let mean = fitted.iter().sum::<f64>() / n;
    let var = fitted.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(RateSummary { traces, fitted: fitted.len(), slopes, mean_slope: mean, std_error: (var / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn synthetic_linear_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trace: Vec<f64> = (0..200)
            .map(|n| {
                // Box-Muller normal with σ = 0.1
                let (u, v): (f64, f64) = (rng.random(), rng.random());
                -0.5 * n as f64 + 0.1 * (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
            })
            .collect();
        let fit = empirical_rate(&trace).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.02);
        assert!(fit.r_squared > 0.99);
    }

    #[test]
    fn short_trace_is_rejected() {
        let trace = vec![-1.0; 49];
        assert!(matches!(empirical_rate(&trace), Err(MonteCarloError::TraceTooShort { len: 49, .. })));
        let mut cut = vec![-1.0; 60];
        cut[30] = f64::NEG_INFINITY;
        assert!(empirical_rate(&cut).is_err());
    }

    #[test]
    fn deterministic_newton_is_superlinear() {
        let g = Polynomial::from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let roots = vec![RootRecord::on(&g, Complex64::new(1.0, 0.0), 1e-10)];
        let tau = LambdaMeasure::point_mass(Complex64::new(1.0, 0.0), 0);
        let out = run_traced_orbit(
            &g,
            &tau,
            Complex64::new(1.5, 0.0),
            &roots,
            &EngineConfig::default(),
            0,
            TraceOptions { lock_radius: 0.5, floor: 1e-300 },
        )
        .unwrap();
        let trace = out.log_distance_trace.unwrap();
        let slopes = windowed_slopes(&trace, 2);
        assert!(slopes.len() >= 3, "{trace:?}");
        assert!(slopes.windows(2).all(|w| w[1] < w[0]), "{slopes:?}");
    }
}
