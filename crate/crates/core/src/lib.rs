//! Random relaxed Newton root finding for complex polynomials.
//!
//! The engine iterates `z ↦ z − λ g(z)/g'(z)` with λ drawn afresh at every
//! step from a measure on the disk `|λ − 1| < 1`. The supporting modules
//! analyse the resulting random dynamical system: Lyapunov exponents at
//! fixed points and on finite minimal sets, the Markov-chain structure of
//! finite invariant sets, and Monte Carlo estimates of convergence
//! probabilities and basin maps.

pub mod cli;
pub mod dynamics;
pub mod engine;
pub mod measure;
pub mod montecarlo;
pub mod par;
pub mod poly;
pub mod sphere;

pub use engine::{
    deterministic_newton, find_all_roots, newton_map, run_random_orbit, run_traced_orbit, EngineConfig, EngineError, OrbitOutcome,
    OrbitStatus, RootRecord, TraceOptions,
};
pub use measure::{Atom, Generator, LambdaMeasure, MeasureError, MeasureKind, SampleStream};
pub use par::Execution;
pub use poly::{PolyError, Polynomial};
pub use sphere::{chordal, spherical_deriv_norm, SphericalPoint};
