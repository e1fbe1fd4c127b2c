use super::family::{GeneratorFamily, LogNormForm};
use super::DynamicsError;
use crate::measure::{Atom, Generator, LambdaMeasure, MeasureKind};
use crate::sphere::SphericalPoint;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Samples used when no closed form is available.
pub const MC_SAMPLES: u64 = 200_000;

/// A Lyapunov exponent, with −∞ kept distinct from every float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lyapunov {
    Finite(f64),
    NegInfinity,
}

impl Lyapunov {
    pub fn from_f64(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            Lyapunov::NegInfinity
        } else {
            Lyapunov::Finite(x)
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Lyapunov::Finite(x) => x,
            Lyapunov::NegInfinity => f64::NEG_INFINITY,
        }
    }
}

impl std::fmt::Display for Lyapunov {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lyapunov::Finite(x) => write!(f, "{x:.6}"),
            Lyapunov::NegInfinity => write!(f, "-inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    ClosedForm,
    ExactSum,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub value: Lyapunov,
    pub std_error: f64,
    pub method: EstimateMethod,
}

/// The generators a measure puts on the invariant set.
///
/// On Q every in-scope family acts independently of λ, so a continuous
/// measure is represented by a single generator at its mean.
pub(crate) fn chain_generators(measure: &LambdaMeasure) -> Vec<Atom> {
    match measure.atoms() {
        Some(atoms) => atoms.iter().copied().filter(|a| a.prob > 0.0).collect(),
        None => vec![Atom { lambda: measure.mean(), prob: 1.0, label: 0 }],
    }
}

fn disk_integral(form: LogNormForm, center: Complex64, radius: f64) -> f64 {
    match form {
        LogNormForm::Superattracting => f64::NEG_INFINITY,
        LogNormForm::Affine { offset, sign, a, b } => {
            if b.norm() == 0.0 {
                return offset + sign * a.norm().ln();
            }
            let m = LambdaMeasure { kind: MeasureKind::UniformDisk { center, radius }, seed_base: 0 };
            let potential = m.log_potential(-a / b).expect("disk");
            offset + sign * (b.norm().ln() + potential)
        }
    }
}

/// `∫ log‖D(f_λ)_z‖_s dτ(λ)` at one point of the invariant set.
pub fn mean_log_norm(
    family: &GeneratorFamily,
    measure: &LambdaMeasure,
    point: SphericalPoint,
    order: Option<usize>,
) -> Result<LyapunovEstimate, DynamicsError> {
    match &measure.kind {
        MeasureKind::FiniteSupport { atoms } => {
            let mut sum = 0.0;
            for a in atoms.iter().filter(|a| a.prob > 0.0) {
                sum += a.prob * family.log_norm_form(a.label, point, order)?.eval(a.lambda);
            }
            Ok(LyapunovEstimate { value: Lyapunov::from_f64(sum), std_error: 0.0, method: EstimateMethod::ExactSum })
        }
        MeasureKind::UniformDisk { center, radius } => {
            let value = disk_integral(family.log_norm_form(0, point, order)?, *center, *radius);
            Ok(LyapunovEstimate { value: Lyapunov::from_f64(value), std_error: 0.0, method: EstimateMethod::ClosedForm })
        }
        MeasureKind::UniformAnnulus { .. } => {
            let form = family.log_norm_form(0, point, order)?;
            if form == LogNormForm::Superattracting {
                return Ok(LyapunovEstimate { value: Lyapunov::NegInfinity, std_error: 0.0, method: EstimateMethod::ClosedForm });
            }
            let mut stream = measure.stream(0);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..MC_SAMPLES {
                let x = form.eval(stream.next_lambda());
                sum += x;
                sum_sq += x * x;
            }
            let n = MC_SAMPLES as f64;
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
            Ok(LyapunovEstimate { value: Lyapunov::from_f64(mean), std_error: (var / n).sqrt(), method: EstimateMethod::MonteCarlo })
        }
    }
}

/// Checks that `x` is fixed by every generator in the support of `measure`.
pub fn check_fixed_point(family: &GeneratorFamily, measure: &LambdaMeasure, x: SphericalPoint) -> Result<(), DynamicsError> {
    let mut gens: Vec<Generator> = chain_generators(measure).iter().map(|a| Generator { label: a.label, lambda: a.lambda }).collect();
    if !measure.is_finite() {
        let mut s = measure.stream(0);
        gens.extend((0..8).map(|_| s.next_generator()));
    }
    for g in gens {
        let image = family.apply(g, x);
        if image.chordal_distance(&x) > 1e-9 {
            return Err(DynamicsError::NotFixedPoint { point: x });
        }
    }
    Ok(())
}

/// `χ(τ, {x})` at a common fixed point `x`; `order` overrides the root
/// multiplicity recorded in a relaxed Newton family.
pub fn lyapunov_fixed_point(
    measure: &LambdaMeasure,
    family: &GeneratorFamily,
    x: SphericalPoint,
    order: Option<usize>,
) -> Result<LyapunovEstimate, DynamicsError> {
    check_fixed_point(family, measure, x)?;
    mean_log_norm(family, measure, x, order)
}
