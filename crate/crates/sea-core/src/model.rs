//! System models: Hilbert-space structure, Hamiltonian, conserved charges,
//! and the relaxation-time specification, behind a common `Model` trait the
//! propagator integrates.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SeaError};
use crate::generator::{dissipative_term_projection, ConservedSet, GeneratorEvaluation};
use crate::operator::{HermitianOperator, StateOperator};

/// The intrinsic relaxation time τ(ρ): a constant, or a user-supplied
/// positive functional of the state. No built-in functional forms are
/// provided; the physics of τ(ρ) is an open problem and we do not invent it.
#[derive(Clone)]
pub enum RelaxationSpec {
    Constant(f64),
    Functional(Arc<dyn Fn(&StateOperator) -> f64 + Send + Sync>),
}

impl RelaxationSpec {
    pub fn constant(tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau <= 0.0 {
            return Err(SeaError::InvalidTau(tau));
        }
        Ok(Self::Constant(tau))
    }

    pub fn evaluate(&self, rho: &StateOperator) -> Result<f64> {
        let tau = match self {
            Self::Constant(t) => *t,
            Self::Functional(f) => f(rho),
        };
        if !tau.is_finite() || tau <= 0.0 {
            return Err(SeaError::InvalidTau(tau));
        }
        Ok(tau)
    }
}

impl fmt::Debug for RelaxationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(t) => write!(f, "RelaxationSpec::Constant({t})"),
            Self::Functional(_) => write!(f, "RelaxationSpec::Functional(..)"),
        }
    }
}

/// Anything the propagator can integrate: exposes the Hamiltonian, the
/// audited conserved observables, and one generator evaluation per state.
pub trait Model: Send + Sync {
    fn dim(&self) -> usize;
    fn hamiltonian(&self) -> &HermitianOperator;
    /// Observables whose means the trajectory audits track (H first).
    fn conserved_observables(&self) -> &[HermitianOperator];
    fn evaluate(&self, rho: &StateOperator) -> Result<GeneratorEvaluation>;
}

/// A single-constituent model: Hamiltonian, optional extra commuting
/// charges, and a relaxation-time spec.
#[derive(Debug, Clone)]
pub struct SystemModel {
    constraints: ConservedSet,
    relaxation: RelaxationSpec,
}

impl SystemModel {
    pub fn new(
        hamiltonian: HermitianOperator,
        extra_conserved: Vec<HermitianOperator>,
        relaxation: RelaxationSpec,
    ) -> Result<Self> {
        let constraints = ConservedSet::with_extras(hamiltonian, extra_conserved)?;
        Ok(Self {
            constraints,
            relaxation,
        })
    }

    pub fn with_constant_tau(hamiltonian: HermitianOperator, tau: f64) -> Result<Self> {
        Self::new(hamiltonian, Vec::new(), RelaxationSpec::constant(tau)?)
    }

    pub fn constraints(&self) -> &ConservedSet {
        &self.constraints
    }

    pub fn relaxation(&self) -> &RelaxationSpec {
        &self.relaxation
    }

    pub fn tau_at(&self, rho: &StateOperator) -> Result<f64> {
        self.relaxation.evaluate(rho)
    }
}

impl Model for SystemModel {
    fn dim(&self) -> usize {
        self.constraints.hamiltonian().dim()
    }

    fn hamiltonian(&self) -> &HermitianOperator {
        self.constraints.hamiltonian()
    }

    fn conserved_observables(&self) -> &[HermitianOperator] {
        self.constraints.observables()
    }

    fn evaluate(&self, rho: &StateOperator) -> Result<GeneratorEvaluation> {
        let tau = self.relaxation.evaluate(rho)?;
        dissipative_term_projection(rho, &self.constraints, tau)
    }
}
