//! Steepest-entropy-ascent quantum dynamics.
//!
//! A library for integrating the nonlinear equation of motion
//!
//! ```text
//! dρ/dt = -i[H, ρ] + (1/2τ(ρ)) {ΔM(ρ), ρ}
//! ```
//!
//! for density ("state") operators, forward and backward in time. The
//! dissipative term points along the component of the entropy gradient
//! orthogonal to the span of the conserved observables, so trajectories
//! conserve the mean energy (and any extra commuting charges) exactly while
//! entropy rises monotonically toward the canonical state. The crate also
//! extracts generalized affinities and the Onsager conductivity matrix at
//! arbitrary nonequilibrium states, and handles composite systems built from
//! tensor-product subsystems with per-subsystem relaxation times.
//!
//! Units: ħ = 1 and k_B = 1 throughout.

pub mod bloch;
pub mod composite;
pub mod error;
pub mod generator;
pub mod model;
pub mod onsager;
pub mod operator;
pub mod propagator;
pub mod serialize;
pub mod testkit;

pub use error::{Result, SeaError};
pub use generator::{ConservedSet, GeneratorEvaluation, NondissipativeReport, StationaryClass};
pub use model::{Model, RelaxationSpec, SystemModel};
pub use operator::{CMatrix, HermitianOperator, StateOperator};
pub use propagator::{IntegratorConfig, RunStatus, SampleSpec, Trajectory};

