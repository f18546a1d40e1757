//! Desk-scale numerics for wave-packet spread dynamics.
//!
//! Three layers share this crate:
//!
//! 1. **Moment dynamics** — split-step spectral evolution of a 1D
//!    wave-function and the closed-form evolution of its quadratic moments
//!    for free and harmonic potentials ([`evolve`], [`moments`]).
//! 2. **Effective packet dynamics** — Hamiltonian flow of the Gaussian and
//!    Hermite-extended packet parameters `(q, p, alpha, beta, gamma)`, with a
//!    conformal `1/alpha^2` potential whose coupling is the quantum
//!    uncertainty `c` ([`packets`], [`effective`]).
//! 3. **Second quantization** — moment observables promoted to operators on
//!    N-point correlation functionals, their sl(2, R) algebra, and the
//!    discrete Casimir spectrum ([`secondq`]).
//!
//! Everything is generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the `*64` aliases below fix `f64`, which is what the
//! CLI and the test suites use.

pub mod effective;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod moments;
pub mod packets;
pub mod sampling;
pub mod scalar;
pub mod secondq;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{build_grid, ComplexField, DecayDiagnostic, Grid1D, GridND, PhysicalParams, DECAY_TOL};
pub use scalar::{real, Real};

/// Double-precision aliases for the main domain types.
pub type Grid1D64 = Grid1D<f64>;
pub type GridND64 = GridND<f64>;
pub type Field64 = ComplexField<f64>;
pub type Params64 = PhysicalParams<f64>;
pub type Packet64 = packets::EffectivePacketState<f64>;
pub type Moments64 = moments::MomentSet<f64>;
pub type Uncertainty64 = moments::UncertaintySet<f64>;
pub type Trajectory64 = evolve::TrajectoryRecord<f64>;
pub type Correlation64 = secondq::CorrelationFunction<f64>;
