//! The random relaxed Newton iteration.
//!
//! Each step applies `N_{g,λ}(z) = z − λ g(z)/g'(z)` with a fresh λ drawn from
//! the configured measure. Classical Newton (λ = 1) can be trapped in
//! attracting cycles that contain no root; drawing λ from a disk around 1
//! breaks those cycles, and for an absolutely continuous measure whose support
//! covers `|λ − 1| ≤ 1/2` almost every orbit converges to some root.
//!
//! [`find_all_roots`] runs one random orbit per root on successively deflated
//! quotients and polishes every root against the original polynomial.

use crate::measure::{LambdaMeasure, MeasureError};
use crate::par::Execution;
use crate::poly::{self, PolyError, Polynomial};
use crate::sphere::chordal;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("hit critical non-root point {z}")]
    HitCriticalPoint { z: Complex64 },
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("could not factor degree-{degree} polynomial: stage {stage} exhausted its retry budget")]
    IncompleteFactorization { degree: usize, stage: usize, found: Vec<RootRecord> },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub max_iterations: usize,
    pub escape_radius: f64,
    /// Consecutive steps beyond `escape_radius` before declaring escape.
    pub escape_patience: usize,
    pub root_capture_radius: f64,
    /// Backward-error bound `|g(z)| / Σ|a_k||z|^k` for an accepted root.
    pub residual_tolerance: f64,
    pub polish_steps: usize,
    /// `|g'(z)|` below this times `Σ k|a_k| max(1,|z|)^(k-1)` counts as a critical point.
    pub derivative_tolerance: f64,
    pub cycle_tolerance: f64,
    /// Orbit restarts per deflation stage.
    pub retry_budget: usize,
    pub start: Complex64,
    pub execution: Execution,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            escape_radius: 1e12,
            escape_patience: 32,
            root_capture_radius: 1e-7,
            residual_tolerance: 1e-10,
            polish_steps: 4,
            derivative_tolerance: 1e-13,
            cycle_tolerance: 1e-9,
            retry_budget: 16,
            start: Complex64::new(2.0, 0.0),
            execution: Execution::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate_for(&self, g: &Polynomial) -> Result<(), EngineError> {
        let positive = [
            ("escape_radius", self.escape_radius),
            ("root_capture_radius", self.root_capture_radius),
            ("residual_tolerance", self.residual_tolerance),
            ("derivative_tolerance", self.derivative_tolerance),
            ("cycle_tolerance", self.cycle_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EngineError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.escape_patience == 0 {
            return Err(EngineError::InvalidConfig("escape_patience must be at least 1".into()));
        }
        let bound = g.cauchy_bound();
        if self.escape_radius <= bound {
            return Err(EngineError::InvalidConfig(format!(
                "escape_radius {} must exceed the Cauchy root bound {bound}",
                self.escape_radius
            )));
        }
        Ok(())
    }
}

/// A root found by the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootRecord {
    pub value: Complex64,
    pub multiplicity_estimate: usize,
    /// `|g(value)|` on the original polynomial.
    pub residual: f64,
    /// `|g(value)| / Σ|a_k||value|^k`.
    pub backward_error: f64,
    /// Backward error is within the configured residual tolerance.
    pub polished: bool,
}

impl RootRecord {
    /// Record for a supplied root value, scored against `g`.
    pub fn on(g: &Polynomial, value: Complex64, tolerance: f64) -> Self {
        let backward_error = g.backward_error(value);
        Self { value, multiplicity_estimate: 1, residual: g.eval(value).norm(), backward_error, polished: backward_error <= tolerance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitStatus {
    /// Index into the known roots, or `None` for a root not among them
    /// (its polished value is the outcome's `final_z`).
    ConvergedToRoot(Option<usize>),
    EscapedToInfinity,
    HitCriticalPoint,
    MaxIterations,
    DetectedCycle(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitOutcome {
    pub status: OrbitStatus,
    pub iterations: usize,
    pub final_z: Complex64,
    /// `ln d(z_n, x)` in the chordal metric, one entry per step after lock-on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_distance_trace: Option<Vec<f64>>,
}

impl OrbitOutcome {
    fn new(status: OrbitStatus, iterations: usize, final_z: Complex64) -> Self {
        Self { status, iterations, final_z, log_distance_trace: None }
    }

    pub fn converged(&self) -> bool {
        matches!(self.status, OrbitStatus::ConvergedToRoot(_))
    }
}

/// Per-step distance recording once the orbit is within `lock_radius`
/// (chordal) of a known root.
///
/// After lock-on the orbit continues in root-centred coordinates
/// `e = z − x`, with the Taylor expansion of `g` at `x` as the working
/// polynomial, so distances keep full relative precision down to `floor`
/// instead of stalling at the rounding level of `x` itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub lock_radius: f64,
    pub floor: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { lock_radius: 0.1, floor: 1e-14 }
    }
}

fn derivative_scale(g: &Polynomial, z: Complex64) -> f64 {
    let rho = z.norm().max(1.0);
    g.coeffs().iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, c)| acc * rho + k as f64 * c.norm())
}

/// One relaxed Newton step `z − λ g(z)/g'(z)`.
///
/// At a root (`g` and `g'` both negligible) `z` is returned unchanged; at a
/// critical point that is not a root the map has a pole and
/// [`EngineError::HitCriticalPoint`] is returned.
pub fn newton_map(g: &Polynomial, lambda: Complex64, z: Complex64, cfg: &EngineConfig) -> Result<Complex64, EngineError> {
    let (p, dp) = g.eval_with_derivative(z);
    if dp.norm() < cfg.derivative_tolerance * derivative_scale(g, z) {
        if p.norm() <= cfg.residual_tolerance * g.abs_eval(z) {
            return Ok(z);
        }
        return Err(EngineError::HitCriticalPoint { z });
    }
    Ok(z - lambda * p / dp)
}

/// Newton polishing with λ = 1, switching to the Schröder step λ = m when
/// the point looks like an m-fold root and that step does better.
///
/// Returns the best iterate if its backward error is within tolerance.
pub fn polish(g: &Polynomial, z: Complex64, cfg: &EngineConfig) -> Option<Complex64> {
    let m = poly::estimate_multiplicity(g, z).order as f64;
    let mut best = z;
    let mut best_err = g.backward_error(z);
    let mut cur = z;
    for _ in 0..cfg.polish_steps {
        let (p, dp) = g.eval_with_derivative(cur);
        if p.norm() == 0.0 || dp.norm() == 0.0 {
            break;
        }
        let newton = cur - p / dp;
        let mut next = newton;
        if m > 1.0 {
            let schroeder = cur - p / dp * m;
            if g.backward_error(schroeder) < g.backward_error(newton) {
                next = schroeder;
            }
        }
        if !(next.re.is_finite() && next.im.is_finite()) {
            break;
        }
        cur = next;
        let err = g.backward_error(cur);
        if err < best_err {
            best = cur;
            best_err = err;
        }
    }
    (best_err <= cfg.residual_tolerance).then_some(best)
}

/// Capture radius around a known root of order `m`: an m-fold root is only
/// resolved to about `ε^(1/m)` in double precision, so the radius widens
/// accordingly.
fn capture_radius(cfg: &EngineConfig, root: &RootRecord) -> f64 {
    let m = root.multiplicity_estimate.max(1) as f64;
    cfg.root_capture_radius.powf(1.0 / m) * root.value.norm().max(1.0)
}

fn match_known(z: Complex64, known: &[RootRecord], cfg: &EngineConfig) -> Option<usize> {
    known
        .iter()
        .enumerate()
        .filter(|(_, r)| (z - r.value).norm() < capture_radius(cfg, r))
        .min_by(|a, b| (z - a.1.value).norm().total_cmp(&(z - b.1.value).norm()))
        .map(|(i, _)| i)
}

/// Whether a step looks converged enough to try polishing.
fn worth_polishing(g: &Polynomial, z: Complex64, step: f64, cfg: &EngineConfig) -> bool {
    step <= cfg.root_capture_radius * z.norm().max(1.0) || g.backward_error(z) <= cfg.residual_tolerance
}

/// Tortoise/hare bookkeeping for Brent's cycle detection.
struct Brent {
    tortoise: Complex64,
    power: usize,
    lam: usize,
}

impl Brent {
    fn new(z0: Complex64) -> Self {
        Self { tortoise: z0, power: 1, lam: 0 }
    }

    /// Feeds the next orbit point; returns a candidate cycle length.
    fn push(&mut self, z: Complex64, tol: f64) -> Option<usize> {
        self.lam += 1;
        if (z - self.tortoise).norm() < tol * z.norm().max(1.0) {
            return Some(self.lam);
        }
        if self.lam == self.power {
            self.tortoise = z;
            self.power *= 2;
            self.lam = 0;
        }
        None
    }
}

/// Smallest `k <= bound` with `map^k(z) ≈ z`.
fn minimal_period(
    mut map: impl FnMut(Complex64) -> Result<Complex64, EngineError>,
    z: Complex64,
    bound: usize,
    tol: f64,
) -> Result<usize, EngineError> {
    let mut w = z;
    for k in 1..=bound {
        w = map(w)?;
        if (w - z).norm() < tol * z.norm().max(1.0) {
            return Ok(k);
        }
    }
    Ok(bound)
}

/// One random orbit from `z0` with parameters drawn from stream `run_index`.
///
/// Classifies the orbit as converged (to a known root, or to a new root that
/// survives polishing), escaped, critical, cyclic (only for a point-mass
/// measure, where the dynamics are deterministic) or out of iterations.
pub fn run_random_orbit(
    g: &Polynomial,
    measure: &LambdaMeasure,
    z0: Complex64,
    known_roots: &[RootRecord],
    cfg: &EngineConfig,
    run_index: u64,
) -> Result<OrbitOutcome, EngineError> {
    run_orbit(g, measure, z0, known_roots, cfg, run_index, None)
}

/// [`run_random_orbit`] with a log-distance trace into whichever known root
/// the orbit locks onto.
pub fn run_traced_orbit(
    g: &Polynomial,
    measure: &LambdaMeasure,
    z0: Complex64,
    known_roots: &[RootRecord],
    cfg: &EngineConfig,
    run_index: u64,
    trace: TraceOptions,
) -> Result<OrbitOutcome, EngineError> {
    run_orbit(g, measure, z0, known_roots, cfg, run_index, Some(trace))
}

fn run_orbit(
    g: &Polynomial,
    measure: &LambdaMeasure,
    z0: Complex64,
    known_roots: &[RootRecord],
    cfg: &EngineConfig,
    run_index: u64,
    trace: Option<TraceOptions>,
) -> Result<OrbitOutcome, EngineError> {
    measure.require_relaxation_disk()?;
    cfg.validate_for(g)?;
    if g.degree() == 0 {
        return Err(PolyError::Constant.into());
    }

    if let Some(i) = match_known(z0, known_roots, cfg) {
        return Ok(OrbitOutcome::new(OrbitStatus::ConvergedToRoot(Some(i)), 0, z0));
    }
    if g.eval(z0).norm() == 0.0 {
        return Ok(OrbitOutcome::new(OrbitStatus::ConvergedToRoot(None), 0, z0));
    }

    let mut stream = measure.stream(run_index);
    let mut brent = measure.is_deterministic().then(|| Brent::new(z0));
    let mut z = z0;
    let mut far_steps = 0;
    for n in 0..cfg.max_iterations {
        let lambda = stream.next_lambda();
        let next = match newton_map(g, lambda, z, cfg) {
            Ok(w) => w,
            Err(EngineError::HitCriticalPoint { .. }) => {
                return Ok(OrbitOutcome::new(OrbitStatus::HitCriticalPoint, n, z));
            }
            Err(e) => return Err(e),
        };
        let step = (next - z).norm();
        z = next;
        let iterations = n + 1;

        if !(z.re.is_finite() && z.im.is_finite()) {
            return Ok(OrbitOutcome::new(OrbitStatus::EscapedToInfinity, iterations, z));
        }
        if z.norm() > cfg.escape_radius {
            far_steps += 1;
            if far_steps >= cfg.escape_patience {
                return Ok(OrbitOutcome::new(OrbitStatus::EscapedToInfinity, iterations, z));
            }
            continue;
        }
        far_steps = 0;

        if let Some(opts) = trace {
            let locked = known_roots.iter().enumerate().find(|(_, r)| chordal(z, r.value) < opts.lock_radius);
            if let Some((i, root)) = locked {
                let (extra, log_d) = trace_into_root(g, root.value, z, &mut stream, cfg, iterations, opts);
                let mut out = OrbitOutcome::new(OrbitStatus::ConvergedToRoot(Some(i)), iterations + extra, root.value);
                out.log_distance_trace = Some(log_d);
                return Ok(out);
            }
            continue;
        }

        if let Some(i) = match_known(z, known_roots, cfg) {
            return Ok(OrbitOutcome::new(OrbitStatus::ConvergedToRoot(Some(i)), iterations, z));
        }
        if worth_polishing(g, z, step, cfg) {
            if let Some(root) = polish(g, z, cfg) {
                let index = match_known(root, known_roots, cfg);
                return Ok(OrbitOutcome::new(OrbitStatus::ConvergedToRoot(index), iterations, root));
            }
        }
        if let Some(b) = brent.as_mut() {
            if let Some(bound) = b.push(z, cfg.cycle_tolerance) {
                let lambda = measure.mean();
                let period = minimal_period(|w| newton_map(g, lambda, w, cfg), z, bound, cfg.cycle_tolerance)?;
                return Ok(OrbitOutcome::new(OrbitStatus::DetectedCycle(period), iterations, z));
            }
        }
    }
    Ok(OrbitOutcome::new(OrbitStatus::MaxIterations, cfg.max_iterations, z))
}

/// Continues an orbit in root-centred coordinates, returning the number of
/// extra steps and the log-distance trace (starting with the lock-on point).
fn trace_into_root(
    g: &Polynomial,
    root: Complex64,
    z: Complex64,
    stream: &mut crate::measure::SampleStream<'_>,
    cfg: &EngineConfig,
    used: usize,
    opts: TraceOptions,
) -> (usize, Vec<f64>) {
    let mut taylor = g.taylor_shift(root);
    taylor[0] = Complex64::new(0.0, 0.0);
    let local = Polynomial::new(taylor).expect("non-constant polynomial has a nonzero Taylor tail");
    let mut e = z - root;
    let mut log_d = vec![local_distance(root, e).ln()];
    let mut steps = 0;
    while used + steps < cfg.max_iterations {
        let d = local_distance(root, e);
        if d <= opts.floor || e.norm() == 0.0 {
            break;
        }
        let lambda = stream.next_lambda();
        let (p, dp) = local.eval_with_derivative(e);
        if dp.norm() == 0.0 {
            break;
        }
        e -= lambda * p / dp;
        steps += 1;
        let d = local_distance(root, e);
        if d <= 0.0 {
            break;
        }
        log_d.push(d.ln());
    }
    (steps, log_d)
}

/// Chordal distance between `x + e` and `x` without cancellation in `e`.
fn local_distance(x: Complex64, e: Complex64) -> f64 {
    2.0 * e.norm() / (1f64.hypot((x + e).norm()) * 1f64.hypot(x.norm()))
}

/// Classical Newton (λ = 1) with Brent cycle detection.
pub fn deterministic_newton(g: &Polynomial, z0: Complex64, cfg: &EngineConfig) -> Result<OrbitOutcome, EngineError> {
    cfg.validate_for(g)?;
    if g.degree() == 0 {
        return Err(PolyError::Constant.into());
    }
    let one = Complex64::new(1.0, 0.0);
    if g.eval(z0).norm() == 0.0 {
        return Ok(OrbitOutcome::new(OrbitStatus::ConvergedToRoot(None), 0, z0));
    }
    let mut brent = Brent::new(z0);
    let mut z = z0;
    let mut far_steps = 0;
    for n in 0..cfg.max_iterations {
        let next = match newton_map(g, one, z, cfg) {
            Ok(w) => w,
            Err(EngineError::HitCriticalPoint { .. }) => {
                return Ok(OrbitOutcome::new(OrbitStatus::HitCriticalPoint, n, z));
            }
            Err(e) => return Err(e),
        };
        let step = (next - z).norm();
        z = next;
        let iterations = n + 1;
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Ok(OrbitOutcome::new(OrbitStatus::EscapedToInfinity, iterations, z));
        }
        if z.norm() > cfg.escape_radius {
            far_steps += 1;
            if far_steps >= cfg.escape_patience {
                return Ok(OrbitOutcome::new(OrbitStatus::EscapedToInfinity, iterations, z));
            }
            continue;
        }
        far_steps = 0;
        if worth_polishing(g, z, step, cfg) {
            if let Some(root) = polish(g, z, cfg) {
                return Ok(OrbitOutcome::new(OrbitStatus::ConvergedToRoot(None), iterations, root));
            }
        }
        if let Some(bound) = brent.push(z, cfg.cycle_tolerance) {
            let period = minimal_period(|w| newton_map(g, one, w, cfg), z, bound, cfg.cycle_tolerance)?;
            return Ok(OrbitOutcome::new(OrbitStatus::DetectedCycle(period), iterations, z));
        }
    }
    Ok(OrbitOutcome::new(OrbitStatus::MaxIterations, cfg.max_iterations, z))
}

/// All roots of `g`, counted with multiplicity, by random orbits on
/// successively deflated quotients.
///
/// Works on the Cauchy-normalized monic polynomial, starts every orbit at
/// `cfg.start` (outside the unit disk), and restarts a stage with a fresh run
/// index whenever the orbit fails to converge or the deflation remainder is
/// too large. The returned values are polished on the original `g`.
pub fn find_all_roots(g: &Polynomial, measure: &LambdaMeasure, cfg: &EngineConfig) -> Result<Vec<RootRecord>, EngineError> {
    measure.require_relaxation_disk()?;
    let degree = g.degree();
    if degree == 0 {
        return Err(PolyError::Constant.into());
    }
    if degree == 1 {
        let c = g.coeffs();
        let x = -c[0] / c[1];
        return Ok(vec![RootRecord::on(g, x, cfg.residual_tolerance)]);
    }

    let normalized = poly::normalize(g)?;
    let h = normalized.poly.monic();
    let mut working = h.clone();
    let mut values = Vec::with_capacity(degree);

    for stage in 0..degree {
        let mut accepted = None;
        for attempt in 0..cfg.retry_budget.max(1) {
            let candidate = if working.degree() == 1 {
                let c = working.coeffs();
                -c[0] / c[1]
            } else {
                let run_index = (stage * cfg.retry_budget.max(1) + attempt) as u64;
                let outcome = run_random_orbit(&working, measure, cfg.start, &[], cfg, run_index)?;
                match outcome.status {
                    OrbitStatus::ConvergedToRoot(_) => outcome.final_z,
                    _ => continue,
                }
            };
            let refined = polish(&h, candidate, cfg).unwrap_or(candidate);
            let deflated = poly::deflate(&working, refined, poly::DEFLATION_TOLERANCE)
                .or_else(|_| poly::deflate(&working, candidate, poly::DEFLATION_TOLERANCE));
            if let Ok(d) = deflated {
                accepted = Some((refined, d.quotient));
                break;
            }
        }
        let Some((root_h, quotient)) = accepted else {
            let found = finish_records(g, &values, cfg);
            return Err(EngineError::IncompleteFactorization { degree, stage, found });
        };
        let unscaled = normalized.unscale(root_h);
        values.push(polish(g, unscaled, cfg).unwrap_or(unscaled));
        if stage + 1 < degree {
            working = quotient;
        }
    }
    Ok(finish_records(g, &values, cfg))
}

/// Builds records and assigns multiplicities by clustering nearby values.
fn finish_records(g: &Polynomial, values: &[Complex64], cfg: &EngineConfig) -> Vec<RootRecord> {
    values
        .iter()
        .map(|&x| {
            let mut rec = RootRecord::on(g, x, cfg.residual_tolerance);
            let radius = 1e-5 * x.norm().max(1.0);
            let cluster = values.iter().filter(|&&y| (y - x).norm() <= radius).count();
            rec.multiplicity_estimate = cluster.max(1);
            rec
        })
        .collect()
}
