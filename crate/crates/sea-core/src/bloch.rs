//! Two-level (Bloch vector) specialization.
//!
//! A qubit state maps to ρ = (I + r·σ)/2 with |r| ≤ 1 and eigenvalues
//! (1 ± |r|)/2; the Hamiltonian is H = ω(I + h·σ)/2 for a unit axis h, so
//! the mean energy is ω(1 + h·r)/2 ∈ [0, ω]. The dissipative motion lies in
//! the constant-energy plane (h·r is invariant) and drives the radius
//! inward; on the central plane h·r = 0 the radius obeys
//!
//! ```text
//! d/dt ln((1-r)/(1+r)) = -(1/τ) ln((1-r)/(1+r))
//! ```
//!
//! whose solution r(t) = tanh[e^{-t/τ} artanh r(0)] is the analytic oracle
//! for the general machinery.

use num_complex::Complex64;

use crate::error::{Result, SeaError};
use crate::generator::dissipative_term_projection;
use crate::generator::ConservedSet;
use crate::model::{RelaxationSpec, SystemModel};
use crate::operator::{CMatrix, HermitianOperator, StateOperator, DEFAULT_ZERO_TOL};

/// Switch distance to the singular sets (r = 0, |r| = 1, r ∥ h) below which
/// the closed-form limits replace the raw formula.
const SINGULAR_SWITCH: f64 = 1e-6;

/// A point in (or on) the Bloch ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub r: [f64; 3],
}

impl BlochState {
    pub fn new(r: [f64; 3]) -> Result<Self> {
        let n = norm(&r);
        if n > 1.0 + 1e-12 {
            return Err(SeaError::NotAState(format!("|r| = {n} exceeds 1")));
        }
        Ok(Self { r })
    }

    pub fn radius(&self) -> f64 {
        norm(&self.r)
    }
}

/// Qubit model: precession frequency ω, unit axis h, relaxation time τ.
#[derive(Debug, Clone)]
pub struct BlochModel {
    pub omega: f64,
    pub axis: [f64; 3],
    pub tau: f64,
}

impl BlochModel {
    pub fn new(omega: f64, axis: [f64; 3], tau: f64) -> Result<Self> {
        let n = norm(&axis);
        if (n - 1.0).abs() > 1e-12 {
            return Err(SeaError::DomainError(format!(
                "hamiltonian axis must be a unit vector (|h| = {n})"
            )));
        }
        if !omega.is_finite() || omega <= 0.0 {
            return Err(SeaError::DomainError(format!("omega must be > 0 ({omega})")));
        }
        if !tau.is_finite() || tau <= 0.0 {
            return Err(SeaError::InvalidTau(tau));
        }
        Ok(Self { omega, axis, tau })
    }

    /// H = ω(I + h·σ)/2, the single source of truth for the matrix form.
    pub fn hamiltonian(&self) -> HermitianOperator {
        let m = (pauli_identity() + dot_sigma(&self.axis)) * Complex64::new(self.omega / 2.0, 0.0);
        HermitianOperator::new_unchecked(m)
    }

    /// The equivalent general-machinery model.
    pub fn to_system_model(&self) -> SystemModel {
        SystemModel::new(
            self.hamiltonian(),
            Vec::new(),
            RelaxationSpec::Constant(self.tau),
        )
        .expect("qubit model is valid")
    }

    pub fn constraints(&self) -> ConservedSet {
        ConservedSet::energy_only(self.hamiltonian())
    }
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn pauli_identity() -> CMatrix {
    CMatrix::identity(2, 2)
}

fn dot_sigma(v: &[f64; 3]) -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = Complex64::new(v[2], 0.0);
    m[(1, 1)] = Complex64::new(-v[2], 0.0);
    m[(0, 1)] = Complex64::new(v[0], -v[1]);
    m[(1, 0)] = Complex64::new(v[0], v[1]);
    m
}

/// ρ = (I + r·σ)/2.
pub fn bloch_to_density(state: &BlochState) -> Result<StateOperator> {
    let m = (pauli_identity() + dot_sigma(&state.r)) * Complex64::new(0.5, 0.0);
    StateOperator::spectral_decompose(&HermitianOperator::new_unchecked(m), DEFAULT_ZERO_TOL)
}

/// r_k = Tr(ρ σ_k); inverse of [`bloch_to_density`].
pub fn density_to_bloch(rho: &StateOperator) -> Result<BlochState> {
    if rho.dim() != 2 {
        return Err(SeaError::DimensionMismatch {
            expected: 2,
            got: rho.dim(),
        });
    }
    let m = rho.matrix();
    let rx = (m[(0, 1)] + m[(1, 0)]).re;
    let ry = (m[(1, 0)] - m[(0, 1)]).im;
    let rz = (m[(0, 0)] - m[(1, 1)]).re;
    BlochState::new([rx, ry, rz])
}

/// The scalar dissipative coefficient (1-r²)·artanh(r)/r, continued through
/// its removable singularity at r = 0 by series.
fn radial_coefficient(r: f64) -> f64 {
    if r < SINGULAR_SWITCH {
        // artanh(r)/r = 1 + r²/3 + r⁴/5 + ...
        (1.0 - r * r) * (1.0 + r * r / 3.0 + r.powi(4) / 5.0)
    } else {
        (1.0 - r * r) * r.atanh() / r
    }
}

/// Full Bloch-vector velocity: precession ω h×r plus the dissipative part
///
/// ```text
/// -(1/τ) (1-r²) artanh(r)/r · (r - (h·r)h) / (1 - (h·r)²)
/// ```
///
/// which stays in the constant-energy plane (orthogonal to h×r and with
/// h·ṙ_D = 0) and points toward the h axis. The singular denominators at
/// r = 0, |r| = 1 and r ∥ h are handled by their finite limits (the
/// dissipative part vanishes continuously at pure and axis-aligned states).
pub fn bloch_rhs(r: &BlochState, model: &BlochModel) -> Result<[f64; 3]> {
    let h = &model.axis;
    let radius = r.radius();
    if radius > 1.0 + 1e-12 {
        return Err(SeaError::NotAState(format!("|r| = {radius} exceeds 1")));
    }
    let precession = cross(h, &r.r);
    let mut rhs = [
        model.omega * precession[0],
        model.omega * precession[1],
        model.omega * precession[2],
    ];

    let hr = dot(h, &r.r);
    let plane = 1.0 - hr * hr;
    // at pure aligned states (r → ±h) both the coefficient and the plane
    // factor vanish; the combined limit of the dissipative part is zero
    if plane > 1e-12 && radius < 1.0 - 1e-12 && radius > 0.0 {
        let coeff = radial_coefficient(radius) / (model.tau * plane);
        for (out, (rk, hk)) in rhs.iter_mut().zip(r.r.iter().zip(h)) {
            *out -= coeff * (rk - hr * hk);
        }
    }
    Ok(rhs)
}

/// The dissipative part of [`bloch_rhs`] alone (τ-dependent, ω-independent).
pub fn bloch_dissipative_part(r: &BlochState, model: &BlochModel) -> Result<[f64; 3]> {
    let full = bloch_rhs(r, model)?;
    let prec = cross(&model.axis, &r.r);
    Ok([
        full[0] - model.omega * prec[0],
        full[1] - model.omega * prec[1],
        full[2] - model.omega * prec[2],
    ])
}

/// Closed-form central-plane radius: r(t) = tanh[e^{-t/τ} artanh r(0)],
/// equivalently tanh[-½ e^{-t/τ} ln((1-r0)/(1+r0))].
///
/// Satisfies r(0) = r0 and d/dt ln((1-r)/(1+r)) = -(1/τ) ln((1-r)/(1+r));
/// r → 0 as t → +∞ and r → 1 as t → -∞.
pub fn central_plane_solution(r0: f64, tau: f64, t: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(SeaError::DomainError(format!(
            "central-plane radius must lie in (0, 1), got {r0}"
        )));
    }
    if !tau.is_finite() || tau <= 0.0 {
        return Err(SeaError::InvalidTau(tau));
    }
    Ok(((-t / tau).exp() * r0.atanh()).tanh())
}

/// Qubit entropy as a function of the Bloch radius:
/// s(r) = -[(1+r)/2 ln((1+r)/2) + (1-r)/2 ln((1-r)/2)].
pub fn qubit_entropy(r: f64) -> Result<f64> {
    if !(0.0..=1.0 + 1e-12).contains(&r) {
        return Err(SeaError::DomainError(format!("radius {r} outside [0, 1]")));
    }
    let p = ((1.0 + r) / 2.0).min(1.0);
    let q = (1.0 - p).max(0.0);
    let term = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    Ok(-(term(p) + term(q)))
}

/// Inverts the qubit entropy for the radius of the isoentropic sphere, by
/// bisection to 1e-12 (entropy is strictly decreasing in r).
pub fn isoentropic_radius(s_target: f64) -> Result<f64> {
    let s_max = 2.0_f64.ln();
    if !(0.0..=s_max + 1e-12).contains(&s_target) {
        return Err(SeaError::DomainError(format!(
            "entropy {s_target} outside [0, ln 2]"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64); // s(lo) = ln 2, s(hi) = 0
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if qubit_entropy(mid)? > s_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bloch velocity obtained from the general machinery: the full generator
/// at ρ(r), read back as ṙ_k = Tr((dρ/dt) σ_k). The specialization tests
/// pin `bloch_rhs` against this to 1e-10.
pub fn general_machinery_rhs(r: &BlochState, model: &BlochModel) -> Result<[f64; 3]> {
    let rho = bloch_to_density(r)?;
    let eval = dissipative_term_projection(&rho, &model.constraints(), model.tau)?;
    let total = eval.total();
    let sigmas = [
        dot_sigma(&[1.0, 0.0, 0.0]),
        dot_sigma(&[0.0, 1.0, 0.0]),
        dot_sigma(&[0.0, 0.0, 1.0]),
    ];
    let mut v = [0.0; 3];
    for (k, s) in sigmas.iter().enumerate() {
        v[k] = (&total * s).trace().re;
    }
    Ok(v)
}
