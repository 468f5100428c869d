//! The nonlinear generator: Hamiltonian term plus the
//! steepest-entropy-ascent dissipative term.
//!
//! The dissipative direction is the component of the entropy gradient
//! orthogonal to the span of {√ρ I, √ρ H (, √ρ N)}. Two independent
//! assemblies are provided: the orthogonal-projection form (normal equations
//! over centered covariances) and the Massieu-operator form (bordered
//! determinant ratio). They must agree elementwise; tests enforce 1e-8.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SeaError};
use crate::operator::{
    anticommutator, centered, commutator, covariance, covariance_matrix, hermitize,
    CMatrix, HermitianOperator, StateOperator, GRAM_PIVOT_TOL,
};

/// Tolerance for the strict-commutation check on extra conserved observables.
pub const TOL_COMMUTE: f64 = 1e-10;
/// Residual norm below which a state counts as nondissipative.
pub const TOL_NONDISSIPATIVE: f64 = 1e-9;

/// Ordered set of conserved observables entering the constraint span.
///
/// The identity is always implied (handled by centering). By convention the
/// Hamiltonian comes first, then any extra charges; dependent-constraint
/// dropping breaks ties in this order.
#[derive(Debug, Clone)]
pub struct ConservedSet {
    observables: Vec<HermitianOperator>,
}

impl ConservedSet {
    /// Constraint set {H} (plus the implicit identity).
    pub fn energy_only(hamiltonian: HermitianOperator) -> Self {
        Self {
            observables: vec![hamiltonian],
        }
    }

    /// Constraint set {H, N_1, ...}. Every extra observable must commute
    /// with H within [`TOL_COMMUTE`].
    pub fn with_extras(
        hamiltonian: HermitianOperator,
        extras: Vec<HermitianOperator>,
    ) -> Result<Self> {
        for (k, n) in extras.iter().enumerate() {
            if n.dim() != hamiltonian.dim() {
                return Err(SeaError::DimensionMismatch {
                    expected: hamiltonian.dim(),
                    got: n.dim(),
                });
            }
            if !n.commutes_with(&hamiltonian, TOL_COMMUTE) {
                return Err(SeaError::DomainError(format!(
                    "extra conserved observable {k} does not commute with H"
                )));
            }
        }
        let mut observables = vec![hamiltonian];
        observables.extend(extras);
        Ok(Self { observables })
    }

    /// Raw list used directly as a constraint span (no commutation check);
    /// for subsystem-level perceived operators, which need not commute.
    pub(crate) fn raw(observables: Vec<HermitianOperator>) -> Self {
        Self { observables }
    }

    pub fn observables(&self) -> &[HermitianOperator] {
        &self.observables
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.observables[0]
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }
}

/// One evaluation of the full generator at a state.
#[derive(Debug, Clone)]
pub struct GeneratorEvaluation {
    /// -i[H, ρ]; traceless and Hermitian.
    pub hamiltonian_term: HermitianOperator,
    /// The steepest-entropy-ascent term; traceless, Hermitian, orthogonal to
    /// every retained conserved observable.
    pub dissipative_term: HermitianOperator,
    /// One multiplier per retained constraint, in constraint order; at a
    /// canonical state the H multiplier is β (and the N multiplier is -ν).
    pub multipliers: Vec<f64>,
    /// k_B ds/dt ≥ 0 produced by the dissipative term.
    pub entropy_production: f64,
    /// Indices of constraints dropped as linearly dependent on the kept ones
    /// (e.g. H when the energy variance vanishes on the support).
    pub dropped_constraints: Vec<usize>,
}

impl GeneratorEvaluation {
    /// dρ/dt as a raw matrix.
    pub fn total(&self) -> CMatrix {
        self.hamiltonian_term.matrix() + self.dissipative_term.matrix()
    }
}

/// -i[H, ρ]: the unitary part of the motion. Traceless; leaves the spectrum
/// of ρ invariant.
pub fn hamiltonian_term(rho: &StateOperator, h: &HermitianOperator) -> Result<HermitianOperator> {
    if h.dim() != rho.dim() {
        return Err(SeaError::DimensionMismatch {
            expected: rho.dim(),
            got: h.dim(),
        });
    }
    let c = commutator(h.matrix(), rho.matrix()) * Complex64::new(0.0, -1.0);
    Ok(HermitianOperator::new_unchecked(hermitize(&c)))
}

/// Greedy selection of an independent constraint subset by incremental
/// Cholesky on the covariance matrix, thresholding pivots at `pivot_tol`.
/// Ties break in list order, so the identity-centering comes first
/// implicitly, then H, then the extras.
pub(crate) fn select_independent(c: &DMatrix<f64>, pivot_tol: f64) -> (Vec<usize>, Vec<usize>) {
    let n = c.nrows();
    let mut kept: Vec<usize> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped: Vec<usize> = Vec::new();
    for i in 0..n {
        let mut y = vec![0.0; kept.len()];
        for (k, &ki) in kept.iter().enumerate() {
            let mut s = c[(ki, i)];
            for (m, ym) in y.iter().enumerate().take(k) {
                s -= rows[k][m] * ym;
            }
            y[k] = s / rows[k][k];
        }
        let resid = c[(i, i)] - y.iter().map(|v| v * v).sum::<f64>();
        if resid > pivot_tol {
            kept.push(i);
            y.push(resid.sqrt());
            rows.push(y);
        } else {
            dropped.push(i);
        }
    }
    (kept, dropped)
}

fn cholesky_solve(rows: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for m in 0..i {
            s -= rows[i][m] * y[m];
        }
        y[i] = s / rows[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for m in (i + 1)..n {
            s -= rows[m][i] * x[m];
        }
        x[i] = s / rows[i][i];
    }
    x
}

/// Result of projecting a √ρ-weighted target operator orthogonal to the
/// constraint span.
#[derive(Debug, Clone)]
pub(crate) struct OrthogonalComponent {
    /// Y with [√ρ T]⊥ = √ρ Y; Y = ΔT - Σ μ_k ΔR_k, centered Hermitian.
    pub direction: HermitianOperator,
    /// μ solving the normal equations over the kept constraints.
    pub coefficients: Vec<f64>,
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    /// ([√ρ T]⊥ | [√ρ T]⊥) = Tr(ρ Y²).
    pub norm_sq: f64,
}

/// Projects √ρ T orthogonal to L{√ρ I, √ρ R_i} by solving the normal
/// equations G μ = c with G the centered covariance Gram of the constraints
/// and c_i = ⟨ΔT, ΔR_i⟩. Degenerate constraints are dropped, never fatal.
pub(crate) fn orthogonal_component(
    rho: &StateOperator,
    target: &HermitianOperator,
    constraints: &[HermitianOperator],
) -> Result<OrthogonalComponent> {
    let gram = covariance_matrix(constraints, rho)?;
    let (kept, dropped) = select_independent(&gram, GRAM_PIVOT_TOL);

    // re-factor the kept block (cheap at these sizes, keeps the solve exact)
    let kept_ops: Vec<HermitianOperator> =
        kept.iter().map(|&i| constraints[i].clone()).collect();
    let sub = covariance_matrix(&kept_ops, rho)?;
    let (all, none) = select_independent(&sub, GRAM_PIVOT_TOL);
    debug_assert!(none.is_empty());
    let rows: Vec<Vec<f64>> = {
        // rebuild Cholesky rows of the kept block
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for i in 0..all.len() {
            let mut y = vec![0.0; i];
            for k in 0..i {
                let mut s = sub[(k, i)];
                for (m, ym) in y.iter().enumerate().take(k) {
                    s -= rows[k][m] * ym;
                }
                y[k] = s / rows[k][k];
            }
            let resid = sub[(i, i)] - y.iter().map(|v| v * v).sum::<f64>();
            y.push(resid.max(GRAM_PIVOT_TOL).sqrt());
            rows.push(y);
        }
        rows
    };

    let c: Vec<f64> = kept_ops
        .iter()
        .map(|r| covariance(target, r, rho))
        .collect::<Result<_>>()?;
    let mu = if c.is_empty() {
        Vec::new()
    } else {
        cholesky_solve(&rows, &c)
    };

    let mut y = centered(target, rho)?;
    for (m, op) in mu.iter().zip(&kept_ops) {
        y = y.sub(&centered(op, rho)?.scale(*m));
    }
    let norm_sq = (rho.matrix() * y.matrix() * y.matrix()).trace().re;
    Ok(OrthogonalComponent {
        direction: y,
        coefficients: mu,
        kept,
        dropped,
        norm_sq: norm_sq.max(0.0),
    })
}

fn check_tau(tau: f64) -> Result<()> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(SeaError::InvalidTau(tau));
    }
    Ok(())
}

/// Dissipative term in the orthogonal-projection form.
///
/// √ρ E_D = -(1/2τ)[√ρ ln ρ]⊥, so dρ/dt|_D = -(1/2τ){X, ρ} with
/// X = Δln ρ + Σ λ_i ΔR_i, the multipliers solving the normal equations
/// G λ = b, b_i = ⟨Δ(-ln ρ), ΔR_i⟩. Conserves Tr ρ and every retained ⟨R_i⟩;
/// the entropy production 4τ(√ρE_D|√ρE_D) = Tr(ρX²)/τ is nonnegative.
pub fn dissipative_term_projection(
    rho: &StateOperator,
    constraints: &ConservedSet,
    tau: f64,
) -> Result<GeneratorEvaluation> {
    check_tau(tau)?;
    let log = rho.log_on_range();
    let proj = orthogonal_component(rho, &log, constraints.observables())?;
    let x = &proj.direction;
    let d = anticommutator(x.matrix(), rho.matrix()) * Complex64::new(-0.5 / tau, 0.0);
    let dissipative_term = HermitianOperator::new_unchecked(hermitize(&d));
    // multipliers in the canonical sign convention: lnρ ≈ -Σ λ_i R_i + const
    let multipliers = proj.coefficients.iter().map(|m| -m).collect();
    Ok(GeneratorEvaluation {
        hamiltonian_term: hamiltonian_term(rho, constraints.hamiltonian())?,
        dissipative_term,
        multipliers,
        entropy_production: proj.norm_sq / tau,
        dropped_constraints: proj.dropped,
    })
}

/// Dissipative term in the Massieu-operator form.
///
/// Builds M(ρ) as the bordered-determinant ratio over the entropy operator
/// S = -P_Ran ρ ln ρ and the retained constraints, then returns
/// (1/2τ){ΔM(ρ), ρ}. Degenerate constraint sets delegate to the projection
/// form's dropping rule before the determinants are formed.
pub fn dissipative_term_determinant(
    rho: &StateOperator,
    constraints: &ConservedSet,
    tau: f64,
) -> Result<GeneratorEvaluation> {
    check_tau(tau)?;
    let s_op = rho.log_on_range().scale(-1.0);

    let gram = covariance_matrix(constraints.observables(), rho)?;
    let (kept, dropped) = select_independent(&gram, GRAM_PIVOT_TOL);
    let kept_ops: Vec<HermitianOperator> = kept
        .iter()
        .map(|&i| constraints.observables()[i].clone())
        .collect();
    let n = kept_ops.len();

    // bordered matrix rows 1..=n: [⟨ΔS,ΔR_i⟩, ⟨ΔR_1,ΔR_i⟩, ..., ⟨ΔR_n,ΔR_i⟩]
    let mut border = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..n {
        border[(i + 1, 0)] = covariance(&s_op, &kept_ops[i], rho)?;
        for j in 0..n {
            border[(i + 1, j + 1)] = covariance(&kept_ops[j], &kept_ops[i], rho)?;
        }
    }
    let gamma = if n == 0 {
        1.0
    } else {
        border.view((1, 1), (n, n)).clone_owned().lu().determinant()
    };

    // expand the operator-valued first row: M = Σ_j (-1)^j det(minor_0j) Op_j / Γ
    let mut m_op = CMatrix::zeros(rho.dim(), rho.dim());
    for j in 0..=n {
        let minor = border.clone().remove_row(0).remove_column(j);
        let cof = if minor.nrows() == 0 {
            1.0
        } else {
            minor.lu().determinant()
        };
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let op = if j == 0 {
            s_op.matrix()
        } else {
            kept_ops[j - 1].matrix()
        };
        m_op += op * Complex64::new(sign * cof / gamma, 0.0);
    }
    let m_op = HermitianOperator::new_unchecked(hermitize(&m_op));
    let dm = centered(&m_op, rho)?;
    let d = anticommutator(dm.matrix(), rho.matrix()) * Complex64::new(0.5 / tau, 0.0);
    let entropy_production = (rho.matrix() * dm.matrix() * dm.matrix()).trace().re.max(0.0) / tau;

    // coefficient of R_j in M is -λ_j
    let multipliers: Vec<f64> = (0..n)
        .map(|j| {
            let minor = border.clone().remove_row(0).remove_column(j + 1);
            let cof = minor.lu().determinant();
            let sign = if (j + 1) % 2 == 0 { 1.0 } else { -1.0 };
            -(sign * cof / gamma)
        })
        .collect();

    Ok(GeneratorEvaluation {
        hamiltonian_term: hamiltonian_term(rho, constraints.hamiltonian())?,
        dissipative_term: HermitianOperator::new_unchecked(hermitize(&d)),
        multipliers,
        entropy_production,
        dropped_constraints: dropped,
    })
}

/// Explicit closed form for a fully degenerate Hamiltonian (H = eI):
/// dρ/dt|_D = -(1/τ)(ρ ln ρ - ρ Tr ρ ln ρ).
pub fn dissipative_degenerate_closed_form(rho: &StateOperator, tau: f64) -> Result<HermitianOperator> {
    check_tau(tau)?;
    let log = rho.log_on_range();
    let rho_log = rho.matrix() * log.matrix();
    let mean = rho_log.trace().re;
    let d = (rho_log - rho.matrix() * Complex64::new(mean, 0.0)) * Complex64::new(-1.0 / tau, 0.0);
    Ok(HermitianOperator::new_unchecked(hermitize(&d)))
}

/// Explicit closed form for a Hamiltonian with nonzero energy variance:
/// the 3x3 bordered-determinant expression with denominator
/// Tr ρH² - (Tr ρH)².
pub fn dissipative_nondegenerate_closed_form(
    rho: &StateOperator,
    h: &HermitianOperator,
    tau: f64,
) -> Result<HermitianOperator> {
    check_tau(tau)?;
    if h.dim() != rho.dim() {
        return Err(SeaError::DimensionMismatch {
            expected: rho.dim(),
            got: h.dim(),
        });
    }
    let log = rho.log_on_range();
    let rho_log = rho.matrix() * log.matrix();
    let mean_log = rho_log.trace().re;
    let mean_h = rho.expectation(h);
    let mean_h2 = (rho.matrix() * h.matrix() * h.matrix()).trace().re;
    let mean_h_log = (rho.matrix() * h.matrix() * log.matrix()).trace().re;
    let var_h = mean_h2 - mean_h * mean_h;
    if var_h <= GRAM_PIVOT_TOL {
        return Err(SeaError::DomainError(
            "zero energy variance on the support: use the degenerate form".into(),
        ));
    }
    let half_anti = anticommutator(h.matrix(), rho.matrix()) * Complex64::new(0.5, 0.0);
    let numerator = &rho_log * Complex64::new(var_h, 0.0)
        - rho.matrix() * Complex64::new(mean_log * mean_h2 - mean_h * mean_h_log, 0.0)
        + half_anti * Complex64::new(mean_log * mean_h - mean_h_log, 0.0);
    let d = numerator * Complex64::new(-1.0 / (tau * var_h), 0.0);
    Ok(HermitianOperator::new_unchecked(hermitize(&d)))
}

/// Entropy production rate through the Gram-determinant ratio
/// (1/τ) Γ(√ρ ln ρ, {√ρ R_i}) / Γ({√ρ R_i}), evaluated over the retained
/// constraints. Nonnegative; zero exactly at nondissipative states.
pub fn entropy_production_rate(
    rho: &StateOperator,
    constraints: &ConservedSet,
    tau: f64,
) -> Result<f64> {
    check_tau(tau)?;
    let gram = covariance_matrix(constraints.observables(), rho)?;
    let (kept, _) = select_independent(&gram, GRAM_PIVOT_TOL);
    let kept_ops: Vec<HermitianOperator> = kept
        .iter()
        .map(|&i| constraints.observables()[i].clone())
        .collect();

    let log = rho.log_on_range();
    let mut with_log = vec![log];
    with_log.extend(kept_ops.iter().cloned());
    let num = crate::operator::gram_determinant(&with_log, rho)?;
    let den = if kept_ops.is_empty() {
        1.0
    } else {
        crate::operator::gram_determinant(&kept_ops, rho)?
    };
    Ok((num / den).max(0.0) / tau)
}

/// Classification of a nondissipative state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryClass {
    /// [B, H] = 0: a genuine equilibrium state.
    Equilibrium,
    /// [B, H] ≠ 0: the state belongs to a unitary limit cycle.
    LimitCycle,
}

/// Outcome of the nondissipative-state test.
#[derive(Debug, Clone)]
pub struct NondissipativeReport {
    pub nondissipative: bool,
    /// ‖[√ρ ln ρ]⊥‖, the norm of the dissipative direction.
    pub residual: f64,
    /// Fitted β when nondissipative (H multiplier; 0 if H was dropped).
    pub beta: f64,
    /// Fitted ν per extra observable (ρ ∝ exp[-βH + Σ ν_k N_k] on Ran ρ).
    pub nus: Vec<f64>,
    /// B = projector onto Ran ρ.
    pub binary_projector: HermitianOperator,
    pub class: StationaryClass,
}

/// Tests whether ρ = B exp[-βH (+νN)] B / Tr(...) for the binary projector
/// B onto Ran ρ, by checking that the constraint-orthogonal component of
/// √ρ ln ρ vanishes. The multipliers of the fit come out of the projection.
pub fn is_nondissipative(
    rho: &StateOperator,
    constraints: &ConservedSet,
) -> Result<NondissipativeReport> {
    let log = rho.log_on_range();
    let proj = orthogonal_component(rho, &log, constraints.observables())?;
    let residual = proj.norm_sq.sqrt();
    let nondissipative = residual < TOL_NONDISSIPATIVE;

    let mut beta = 0.0;
    let mut nus = vec![0.0; constraints.len().saturating_sub(1)];
    for (slot, &idx) in proj.kept.iter().enumerate() {
        let lambda = -proj.coefficients[slot];
        if idx == 0 {
            beta = lambda;
        } else {
            nus[idx - 1] = -lambda;
        }
    }
    let b = rho.range_projector();
    let class = if b.commutes_with(constraints.hamiltonian(), 1e-9) {
        StationaryClass::Equilibrium
    } else {
        StationaryClass::LimitCycle
    };
    Ok(NondissipativeReport {
        nondissipative,
        residual,
        beta,
        nus,
        binary_projector: b,
        class,
    })
}

/// Entropy rate along an arbitrary √ρ-weighted direction √ρ Y (Y Hermitian,
/// centered, constraint-orthogonal): ds/dt = -2(√ρ Y | √ρ ln ρ).
/// Used by the variational (steepest-ascent) property test.
pub fn entropy_rate_of_direction(rho: &StateOperator, y: &HermitianOperator) -> f64 {
    let log = rho.log_on_range();
    -2.0 * (rho.matrix() * y.matrix() * log.matrix()).trace().re
}

/// Norm of a √ρ-weighted direction: ‖√ρ Y‖² = Tr(ρ Y²).
pub fn direction_norm_sq(rho: &StateOperator, y: &HermitianOperator) -> f64 {
    (rho.matrix() * y.matrix() * y.matrix()).trace().re
}

/// Builds a random constraint-respecting perturbation direction with the
/// same weighted norm as `reference`, for the variational test: the
/// orthogonal component of a trial Hermitian operator, rescaled.
pub fn constrained_direction_like(
    rho: &StateOperator,
    trial: &HermitianOperator,
    constraints: &ConservedSet,
    reference_norm_sq: f64,
) -> Result<Option<HermitianOperator>> {
    let proj = orthogonal_component(rho, trial, constraints.observables())?;
    if proj.norm_sq < 1e-24 {
        return Ok(None);
    }
    let scale = (reference_norm_sq / proj.norm_sq).sqrt();
    Ok(Some(proj.direction.scale(scale)))
}

/// Max-abs violation of the conservation contract: Tr D and Tr(D R_i) for
/// every retained constraint.
pub fn conservation_residual(eval: &GeneratorEvaluation, constraints: &ConservedSet) -> f64 {
    let d = eval.dissipative_term.matrix();
    let mut worst: f64 = d.trace().re.abs();
    for (i, r) in constraints.observables().iter().enumerate() {
        if eval.dropped_constraints.contains(&i) {
            continue;
        }
        worst = worst.max((d * r.matrix()).trace().re.abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{max_abs, DEFAULT_ZERO_TOL};
    use crate::testkit;
    use approx::assert_abs_diff_eq;

    fn diag_state(p: &[f64]) -> StateOperator {
        StateOperator::spectral_decompose(
            &HermitianOperator::from_real_diagonal(p),
            DEFAULT_ZERO_TOL,
        )
        .unwrap()
    }

    #[test]
    fn hamiltonian_term_vanishes_when_commuting() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let rho = diag_state(&[0.25, 0.75]);
        let t = hamiltonian_term(&rho, &h).unwrap();
        assert!(max_abs(t.matrix()) < 1e-15);
    }

    #[test]
    fn hamiltonian_term_is_traceless_on_random_pairs() {
        let mut rng = testkit::rng(7);
        for _ in 0..50 {
            let dim = 2 + (testkit::index(&mut rng, 4));
            let rho = testkit::random_state(&mut rng, dim);
            let h = testkit::random_hermitian(&mut rng, dim, 1.0);
            let t = hamiltonian_term(&rho, &h).unwrap();
            assert!(t.trace().abs() < 1e-12);
        }
    }

    #[test]
    fn gibbs_state_is_stationary() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 0.7, 1.3]);
        let rho = StateOperator::gibbs(&h, 0.9).unwrap();
        let set = ConservedSet::energy_only(h);
        let eval = dissipative_term_projection(&rho, &set, 1.0).unwrap();
        assert!(max_abs(eval.dissipative_term.matrix()) < 1e-12);
        assert!(eval.entropy_production < 1e-12);
    }

    #[test]
    fn pure_state_is_stationary() {
        let mut rng = testkit::rng(11);
        let dim = 3;
        let u = testkit::random_unitary(&mut rng, dim);
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[0] = Complex64::new(1.0, 0.0);
        let rho = StateOperator::pure(&amps).unwrap().conjugate_by(&u).unwrap();
        let h = testkit::random_hermitian(&mut rng, dim, 1.0);
        let set = ConservedSet::energy_only(h);
        let eval = dissipative_term_projection(&rho, &set, 1.0).unwrap();
        assert!(max_abs(eval.dissipative_term.matrix()) < 1e-10);
    }

    #[test]
    fn degenerate_hamiltonian_closed_form_value() {
        let rho = diag_state(&[0.25, 0.75]);
        let h = HermitianOperator::identity(2).scale(1.5);
        let set = ConservedSet::energy_only(h);
        let eval = dissipative_term_projection(&rho, &set, 1.0).unwrap();
        // H is a multiple of the identity: dropped, and the explicit
        // degenerate form -(1/τ)(ρlnρ - ρ Tr ρlnρ) applies.
        assert_eq!(eval.dropped_constraints, vec![0]);
        let d = eval.dissipative_term.matrix();
        assert_abs_diff_eq!(d[(0, 0)].re, 0.20598980412527056, epsilon = 1e-10);
        assert_abs_diff_eq!(d[(1, 1)].re, -0.20598980412527056, epsilon = 1e-10);
        let closed = dissipative_degenerate_closed_form(&rho, 1.0).unwrap();
        assert!(eval.dissipative_term.distance_max(&closed) < 1e-12);
    }

    #[test]
    fn entropy_production_examples() {
        let rho = diag_state(&[0.25, 0.75]);
        let h = HermitianOperator::identity(2).scale(2.0);
        let set = ConservedSet::energy_only(h);
        // two independent routes agree: Gram ratio and -Tr(D ln ρ)
        let rate = entropy_production_rate(&rho, &set, 1.0).unwrap();
        assert_abs_diff_eq!(rate, 0.2263029301523591, epsilon = 1e-10);
        let eval = dissipative_term_projection(&rho, &set, 1.0).unwrap();
        assert_abs_diff_eq!(eval.entropy_production, rate, epsilon = 1e-10);
        let minus_tr_d_log = -(eval.dissipative_term.matrix() * rho.log_on_range().matrix())
            .trace()
            .re;
        assert_abs_diff_eq!(minus_tr_d_log, rate, epsilon = 1e-10);
        // 1/τ scaling
        let rate2 = entropy_production_rate(&rho, &set, 2.0).unwrap();
        assert_abs_diff_eq!(rate2, rate / 2.0, epsilon = 1e-12);
        // canonical states produce zero
        let gibbs = StateOperator::gibbs(&set.hamiltonian().clone(), 0.4).unwrap();
        assert!(entropy_production_rate(&gibbs, &set, 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn projection_and_determinant_forms_agree() {
        let mut rng = testkit::rng(23);
        for _ in 0..40 {
            let dim = 2 + testkit::index(&mut rng, 5);
            let rho = testkit::random_state(&mut rng, dim);
            let h = testkit::random_hermitian(&mut rng, dim, 1.0);
            let set = ConservedSet::energy_only(h);
            let a = dissipative_term_projection(&rho, &set, 0.7).unwrap();
            let b = dissipative_term_determinant(&rho, &set, 0.7).unwrap();
            assert!(
                a.dissipative_term.distance_max(&b.dissipative_term) < 1e-8,
                "forms disagree: {}",
                a.dissipative_term.distance_max(&b.dissipative_term)
            );
            assert_abs_diff_eq!(a.entropy_production, b.entropy_production, epsilon = 1e-8);
        }
    }

    #[test]
    fn nondegenerate_closed_form_agrees() {
        let mut rng = testkit::rng(31);
        for _ in 0..25 {
            let dim = 2 + testkit::index(&mut rng, 3);
            let rho = testkit::random_state(&mut rng, dim);
            let h = testkit::random_hermitian(&mut rng, dim, 1.0);
            let set = ConservedSet::energy_only(h.clone());
            let a = dissipative_term_projection(&rho, &set, 1.3).unwrap();
            let c = dissipative_nondegenerate_closed_form(&rho, &h, 1.3).unwrap();
            assert!(a.dissipative_term.distance_max(&c) < 1e-8);
        }
    }

    #[test]
    fn conservation_of_trace_energy_and_charge() {
        let mut rng = testkit::rng(41);
        for _ in 0..30 {
            let dim = 2 + testkit::index(&mut rng, 7);
            let rho = testkit::random_state(&mut rng, dim);
            let h = testkit::random_hermitian(&mut rng, dim, 1.0);
            let n = testkit::random_commuting_observable(&mut rng, &h);
            let set = ConservedSet::with_extras(h, vec![n]).unwrap();
            let eval = dissipative_term_projection(&rho, &set, 1.0).unwrap();
            assert!(conservation_residual(&eval, &set) < 1e-9);
            assert!(eval.hamiltonian_term.trace().abs() < 1e-10);
            assert!(eval.entropy_production >= -1e-12);
        }
    }

    #[test]
    fn multiplier_recovers_beta_for_gibbs() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 0.5, 1.2, 2.0]);
        let rho = StateOperator::gibbs(&h, 0.7).unwrap();
        let set = ConservedSet::energy_only(h);
        let report = is_nondissipative(&rho, &set).unwrap();
        assert!(report.nondissipative);
        assert_abs_diff_eq!(report.beta, 0.7, epsilon = 1e-8);
        assert_eq!(report.class, StationaryClass::Equilibrium);
        assert!(report
            .binary_projector
            .distance_max(&HermitianOperator::identity(4))
            < 1e-10);
    }

    #[test]
    fn nondissipative_classification_cases() {
        // pure eigenstate of H: equilibrium with Tr B = 1
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let rho = diag_state(&[1.0, 0.0]);
        let set = ConservedSet::energy_only(h.clone());
        let rep = is_nondissipative(&rho, &set).unwrap();
        assert!(rep.nondissipative);
        assert_eq!(rep.class, StationaryClass::Equilibrium);
        assert_abs_diff_eq!(rep.binary_projector.trace(), 1.0, epsilon = 1e-12);

        // diag(0.25, 0.75) with H = diag(0, 1) is canonical on the full
        // range: ln(0.75/0.25) spacing matches β = -ln 3 over gap 1.
        let rho = diag_state(&[0.25, 0.75]);
        let rep = is_nondissipative(&rho, &set).unwrap();
        assert!(rep.nondissipative);
        assert_abs_diff_eq!(rep.beta, -(3.0_f64.ln()), epsilon = 1e-9);
        let rebuilt = StateOperator::gibbs(&h, rep.beta).unwrap();
        assert!(rebuilt.trace_distance(&rho) < 1e-10);

        // non-canonical spacing: not nondissipative
        let h3 = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0]);
        let rho3 = diag_state(&[0.5, 0.3, 0.2]);
        let set3 = ConservedSet::energy_only(h3);
        assert!(!is_nondissipative(&rho3, &set3).unwrap().nondissipative);

        // uniform on a support not aligned with the H eigenbasis: B/Tr B
        // with [B, H] ≠ 0 is the β = 0 member of the nondissipative family
        // and belongs to a unitary limit cycle
        let h3 = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0]);
        let s = 0.5_f64.sqrt();
        let rho_b = StateOperator::pure(&[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap()
        .operator()
        .scale(0.5)
        .add(
            &StateOperator::pure(&[
                Complex64::new(0.0, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(s, 0.0),
            ])
            .unwrap()
            .operator()
            .scale(0.5),
        );
        let rho_b = StateOperator::spectral_decompose(&rho_b, 1e-12).unwrap();
        let set3 = ConservedSet::energy_only(h3.clone());
        let rep = is_nondissipative(&rho_b, &set3).unwrap();
        assert!(rep.nondissipative);
        assert_eq!(rep.class, StationaryClass::LimitCycle);

        // but a β ≠ 0 sandwich B e^{-βH} B with [B, H] ≠ 0 skews the
        // spectrum off the canonical family and is dissipative
        let b = rho_b.range_projector();
        let gibbs = StateOperator::gibbs(&h3, 0.5).unwrap();
        let sandwich = b.matrix() * gibbs.matrix() * b.matrix();
        let tr = sandwich.trace().re;
        let sandwich = StateOperator::spectral_decompose(
            &HermitianOperator::new_unchecked(sandwich * Complex64::new(1.0 / tr, 0.0)),
            1e-12,
        )
        .unwrap();
        assert!(!is_nondissipative(&sandwich, &set3).unwrap().nondissipative);
    }

    #[test]
    fn noncommuting_extra_observable_is_rejected() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let mut sx = CMatrix::zeros(2, 2);
        sx[(0, 1)] = Complex64::new(1.0, 0.0);
        sx[(1, 0)] = Complex64::new(1.0, 0.0);
        let n = HermitianOperator::new(sx).unwrap();
        assert!(matches!(
            ConservedSet::with_extras(h, vec![n]),
            Err(SeaError::DomainError(_))
        ));
    }

    #[test]
    fn steepest_ascent_beats_random_directions() {
        let mut rng = testkit::rng(57);
        for _ in 0..5 {
            let dim = 2 + testkit::index(&mut rng, 3);
            let rho = testkit::random_state(&mut rng, dim);
            let h = testkit::random_hermitian(&mut rng, dim, 1.0);
            let set = ConservedSet::energy_only(h);
            let eval = dissipative_term_projection(&rho, &set, 1.0).unwrap();
            let log = rho.log_on_range();
            let best = orthogonal_component(&rho, &log, set.observables()).unwrap();
            let y_star = best.direction.scale(-0.5); // τ = 1
            let star_rate = entropy_rate_of_direction(&rho, &y_star);
            assert_abs_diff_eq!(star_rate, eval.entropy_production, epsilon = 1e-10);
            let norm_sq = direction_norm_sq(&rho, &y_star);
            for _ in 0..100 {
                let trial = testkit::random_hermitian(&mut rng, dim, 1.0);
                if let Some(dir) =
                    constrained_direction_like(&rho, &trial, &set, norm_sq).unwrap()
                {
                    let rate = entropy_rate_of_direction(&rho, &dir);
                    assert!(rate <= star_rate + 1e-9, "direction beats steepest ascent");
                }
            }
        }
    }

    #[test]
    fn generator_is_unitarily_covariant() {
        let mut rng = testkit::rng(71);
        for _ in 0..10 {
            let dim = 2 + testkit::index(&mut rng, 3);
            let rho = testkit::random_state(&mut rng, dim);
            let h = testkit::random_hermitian(&mut rng, dim, 1.0);
            let u = testkit::random_unitary(&mut rng, dim);
            let set = ConservedSet::energy_only(h.clone());
            let eval = dissipative_term_projection(&rho, &set, 1.0).unwrap();
            let rho_u = rho.conjugate_by(&u).unwrap();
            let set_u = ConservedSet::energy_only(h.conjugate_by(&u));
            let eval_u = dissipative_term_projection(&rho_u, &set_u, 1.0).unwrap();
            let rotated = eval.dissipative_term.conjugate_by(&u);
            assert!(rotated.distance_max(&eval_u.dissipative_term) < 1e-9);
            assert_abs_diff_eq!(
                eval.entropy_production,
                eval_u.entropy_production,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn entropy_production_zero_iff_nondissipative() {
        let mut rng = testkit::rng(83);
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.5]);
        let set = ConservedSet::energy_only(h.clone());
        // constructed canonical-on-subspace states: rate ~ 0
        for &beta in &[0.3, -0.8, 2.0] {
            let rho = StateOperator::gibbs(&h, beta).unwrap();
            assert!(entropy_production_rate(&rho, &set, 1.0).unwrap() < 1e-12);
            assert!(is_nondissipative(&rho, &set).unwrap().nondissipative);
        }
        // random non-canonical states: strictly positive rate
        for _ in 0..20 {
            let rho = testkit::random_state(&mut rng, 3);
            let rep = is_nondissipative(&rho, &set).unwrap();
            let rate = entropy_production_rate(&rho, &set, 1.0).unwrap();
            if !rep.nondissipative {
                assert!(rate > 1e-12);
            }
        }
    }
}
