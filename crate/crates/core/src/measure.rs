//! Probability measures on the relaxation-parameter plane.
//!
//! A [`LambdaMeasure`] is the law of the damping factor λ drawn at every
//! step of the random iteration. Draws come from a [`SampleStream`] keyed by
//! `(seed_base, run_index)`: ChaCha is counter based, so stream `k` is the same
//! sequence no matter which worker thread replays it or in what order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Tolerance on Σ p_j = 1 for finite measures.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("atom {index} has non-positive probability {prob}")]
    NonPositiveProbability { index: usize, prob: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("finite measure needs at least one atom")]
    Empty,
    #[error("invalid radii: {0}")]
    InvalidRadius(String),
    #[error("support is not contained in the relaxation disk |λ − 1| < 1")]
    OutsideRelaxationDisk,
    #[error("operation requires a uniform disk measure")]
    UnsupportedKind,
    #[error("invalid measure JSON: {0}")]
    Json(String),
}

/// One generator of the random system: a family label and its parameter.
///
/// The label selects among several one-parameter families (e.g. the rotation
/// exponent); single-family schemes always use label 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub label: usize,
    pub lambda: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub lambda: Complex64,
    pub prob: f64,
    #[serde(default)]
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureKind {
    UniformDisk { center: Complex64, radius: f64 },
    FiniteSupport { atoms: Vec<Atom> },
    UniformAnnulus { center: Complex64, inner: f64, outer: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMeasure {
    pub kind: MeasureKind,
    pub seed_base: u64,
}

impl LambdaMeasure {
    /// Normalized area measure on `{|λ − 1| ≤ radius}`.
    pub fn uniform_disk(radius: f64, seed_base: u64) -> Result<Self, MeasureError> {
        Self::uniform_disk_at(Complex64::new(1.0, 0.0), radius, seed_base)
    }

    pub fn uniform_disk_at(center: Complex64, radius: f64, seed_base: u64) -> Result<Self, MeasureError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(MeasureError::InvalidRadius(format!("disk radius {radius} must be positive")));
        }
        Ok(Self { kind: MeasureKind::UniformDisk { center, radius }, seed_base })
    }

    pub fn uniform_annulus(center: Complex64, inner: f64, outer: f64, seed_base: u64) -> Result<Self, MeasureError> {
        if !(inner >= 0.0 && outer > inner && outer.is_finite()) {
            return Err(MeasureError::InvalidRadius(format!("annulus needs 0 <= inner < outer, got {inner}, {outer}")));
        }
        Ok(Self { kind: MeasureKind::UniformAnnulus { center, inner, outer }, seed_base })
    }

    pub fn finite(atoms: Vec<Atom>, seed_base: u64) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        for (index, a) in atoms.iter().enumerate() {
            if a.prob.is_nan() || a.prob <= 0.0 {
                return Err(MeasureError::NonPositiveProbability { index, prob: a.prob });
            }
        }
        let sum: f64 = atoms.iter().map(|a| a.prob).sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(MeasureError::NotNormalized { sum });
        }
        Ok(Self { kind: MeasureKind::FiniteSupport { atoms }, seed_base })
    }

    /// Finite measure on label-0 generators from `(λ, p)` pairs.
    pub fn finite_real(pairs: &[(f64, f64)], seed_base: u64) -> Result<Self, MeasureError> {
        let atoms = pairs.iter().map(|&(l, p)| Atom { lambda: Complex64::new(l, 0.0), prob: p, label: 0 }).collect();
        Self::finite(atoms, seed_base)
    }

    pub fn point_mass(lambda: Complex64, seed_base: u64) -> Self {
        Self { kind: MeasureKind::FiniteSupport { atoms: vec![Atom { lambda, prob: 1.0, label: 0 }] }, seed_base }
    }

    pub fn with_seed(mut self, seed_base: u64) -> Self {
        self.seed_base = seed_base;
        self
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.kind {
            MeasureKind::FiniteSupport { atoms } => Some(atoms),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.atoms().is_some()
    }

    /// A single atom: every draw is the same map.
    pub fn is_deterministic(&self) -> bool {
        self.atoms().is_some_and(|a| a.len() == 1)
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        !self.is_finite()
    }

    /// Largest `|λ − c|` over the support.
    pub fn support_radius_about(&self, c: Complex64) -> f64 {
        match &self.kind {
            MeasureKind::UniformDisk { center, radius } => (center - c).norm() + radius,
            MeasureKind::UniformAnnulus { center, outer, .. } => (center - c).norm() + outer,
            MeasureKind::FiniteSupport { atoms } => atoms.iter().map(|a| (a.lambda - c).norm()).fold(0.0, f64::max),
        }
    }

    /// True when the support lies in the open disk `|λ − 1| < 1`.
    pub fn in_relaxation_disk(&self) -> bool {
        self.support_radius_about(Complex64::new(1.0, 0.0)) < 1.0
    }

    pub fn require_relaxation_disk(&self) -> Result<(), MeasureError> {
        if self.in_relaxation_disk() {
            Ok(())
        } else {
            Err(MeasureError::OutsideRelaxationDisk)
        }
    }

    /// Whether the interior of the support contains the closed disk `|λ − 1| ≤ 1/2`.
    pub fn contains_half_disk(&self) -> bool {
        let one = Complex64::new(1.0, 0.0);
        match &self.kind {
            MeasureKind::UniformDisk { center, radius } => (center - one).norm() + 0.5 < *radius,
            MeasureKind::UniformAnnulus { center, inner, outer } => *inner == 0.0 && (center - one).norm() + 0.5 < *outer,
            MeasureKind::FiniteSupport { .. } => false,
        }
    }

    /// Both hypotheses under which the random scheme converges almost surely:
    /// absolutely continuous, with support interior covering `|λ − 1| ≤ 1/2`,
    /// and support inside the relaxation disk.
    pub fn convergence_hypotheses_met(&self) -> bool {
        self.is_absolutely_continuous() && self.contains_half_disk() && self.in_relaxation_disk()
    }

    pub fn mean(&self) -> Complex64 {
        match &self.kind {
            MeasureKind::UniformDisk { center, .. } | MeasureKind::UniformAnnulus { center, .. } => *center,
            MeasureKind::FiniteSupport { atoms } => atoms.iter().map(|a| a.lambda * a.prob).sum(),
        }
    }

    /// `∫ log|a − λ| dτ(λ)` for a uniform disk, in closed form.
    pub fn log_potential(&self, a: Complex64) -> Result<f64, MeasureError> {
        match &self.kind {
            MeasureKind::UniformDisk { center, radius } => Ok(disk_log_potential(*center, *radius, a)),
            _ => Err(MeasureError::UnsupportedKind),
        }
    }

    pub fn stream(&self, run_index: u64) -> SampleStream<'_> {
        SampleStream::new(self, run_index)
    }

    pub fn from_json(text: &str) -> Result<Self, MeasureError> {
        let spec: MeasureSpec = serde_json::from_str(text).map_err(|e| MeasureError::Json(e.to_string()))?;
        spec.build()
    }

    pub fn to_spec(&self) -> MeasureSpec {
        let seed = Some(self.seed_base);
        match &self.kind {
            MeasureKind::UniformDisk { center, radius } => {
                MeasureSpec::UniformDisk { radius: *radius, center: Some([center.re, center.im]), seed }
            }
            MeasureKind::UniformAnnulus { center, inner, outer } => {
                MeasureSpec::UniformAnnulus { inner: *inner, outer: *outer, center: Some([center.re, center.im]), seed }
            }
            MeasureKind::FiniteSupport { atoms } => MeasureSpec::Finite {
                atoms: atoms.iter().map(|a| JsonAtom::Labeled([a.lambda.re, a.lambda.im], a.prob, a.label)).collect(),
                seed,
            },
        }
    }
}

fn disk_log_potential(center: Complex64, radius: f64, a: Complex64) -> f64 {
    let d = (a - center).norm();
    if d >= radius {
        d.ln()
    } else {
        radius.ln() + (d * d - radius * radius) / (2.0 * radius * radius)
    }
}

/// JSON configuration form of a measure.
///
/// `{"kind":"uniform_disk","radius":0.75,"seed":42}` or
/// `{"kind":"finite","atoms":[[[0.5,0],0.3],[[1.5,0],0.7]]}`; finite atoms
/// may carry a third element, the generator label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    UniformDisk {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    UniformAnnulus {
        inner: f64,
        outer: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Finite {
        atoms: Vec<JsonAtom>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonAtom {
    Labeled([f64; 2], f64, usize),
    Plain([f64; 2], f64),
}

impl MeasureSpec {
    pub fn seed(&self) -> Option<u64> {
        match self {
            MeasureSpec::UniformDisk { seed, .. } | MeasureSpec::UniformAnnulus { seed, .. } | MeasureSpec::Finite { seed, .. } => *seed,
        }
    }

    pub fn build(&self) -> Result<LambdaMeasure, MeasureError> {
        let seed = self.seed().unwrap_or(0);
        let centre = |c: &Option<[f64; 2]>| c.map_or(Complex64::new(1.0, 0.0), |[re, im]| Complex64::new(re, im));
        match self {
            MeasureSpec::UniformDisk { radius, center, .. } => LambdaMeasure::uniform_disk_at(centre(center), *radius, seed),
            MeasureSpec::UniformAnnulus { inner, outer, center, .. } => {
                LambdaMeasure::uniform_annulus(centre(center), *inner, *outer, seed)
            }
            MeasureSpec::Finite { atoms, .. } => {
                let atoms = atoms
                    .iter()
                    .map(|a| match *a {
                        JsonAtom::Labeled([re, im], prob, label) => Atom { lambda: Complex64::new(re, im), prob, label },
                        JsonAtom::Plain([re, im], prob) => Atom { lambda: Complex64::new(re, im), prob, label: 0 },
                    })
                    .collect();
                LambdaMeasure::finite(atoms, seed)
            }
        }
    }
}

/// The i.i.d. parameter sequence of one random orbit.
///
/// Two streams built from the same `(seed_base, run_index)` yield identical
/// draws; distinct run indices select independent ChaCha streams.
pub struct SampleStream<'a> {
    measure: &'a LambdaMeasure,
    run_index: u64,
    position: u64,
    rng: ChaCha8Rng,
}

impl<'a> SampleStream<'a> {
    pub fn new(measure: &'a LambdaMeasure, run_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(measure.seed_base);
        rng.set_stream(run_index);
        Self { measure, run_index, position: 0, rng }
    }

    pub fn run_index(&self) -> u64 {
        self.run_index
    }

    /// Number of generators drawn so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn next_lambda(&mut self) -> Complex64 {
        self.next_generator().lambda
    }

    pub fn next_generator(&mut self) -> Generator {
        self.position += 1;
        match &self.measure.kind {
            MeasureKind::UniformDisk { center, radius } => {
                let rho = radius * self.rng.random::<f64>().sqrt();
                let theta = TAU * self.rng.random::<f64>();
                Generator { label: 0, lambda: center + Complex64::from_polar(rho, theta) }
            }
            MeasureKind::UniformAnnulus { center, inner, outer } => {
                let u: f64 = self.rng.random();
                let rho = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
                let theta = TAU * self.rng.random::<f64>();
                Generator { label: 0, lambda: center + Complex64::from_polar(rho, theta) }
            }
            MeasureKind::FiniteSupport { atoms } => {
                if atoms.len() == 1 {
                    return Generator { label: atoms[0].label, lambda: atoms[0].lambda };
                }
                let u: f64 = self.rng.random();
                let mut acc = 0.0;
                for a in atoms.iter() {
                    acc += a.prob;
                    if u < acc {
                        return Generator { label: a.label, lambda: a.lambda };
                    }
                }
                let last = atoms[atoms.len() - 1];
                Generator { label: last.label, lambda: last.lambda }
            }
        }
    }

    /// A uniform draw on `[0, 1)` from the same stream, for auxiliary randomness.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}
