//! Generalized affinities and the nonlinear Onsager conductivity matrix at
//! arbitrary nonequilibrium states.
//!
//! Any state can be written ρ = B exp(-Σ f_j X_j) B / Tr(...) over operators
//! X_j spanning (with the identity) the Hermitian operators on Ran ρ. The
//! coefficients f_j are generalized affinities (f_j = ∂s/∂x_j); the
//! dissipative rates of the x_j relate to the affinities through a
//! symmetric positive-semidefinite conductivity matrix
//!
//! ```text
//! L_ij = (1/τ) ([√ρ X_i]⊥ | [√ρ X_j]⊥),    Dx_i/Dt = Σ_j f_j L_ij
//! ```
//!
//! and the entropy production is the quadratic form f·L·f, or equivalently
//! the inverse form on the dissipative rates when L is invertible.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SeaError};
use crate::generator::{
    dissipative_term_projection, orthogonal_component, select_independent, ConservedSet,
};
use crate::operator::{
    covariance, covariance_matrix, hermitize, CMatrix, HermitianOperator, StateOperator,
    GRAM_PIVOT_TOL,
};

/// Observable basis for the affinity expansion: the range projector of ρ and
/// operators traceless on the range whose restrictions to Ran ρ, together
/// with the identity, span the Hermitian operators there.
#[derive(Debug, Clone)]
pub struct ObservableBasis {
    range_projector: HermitianOperator,
    ops: Vec<HermitianOperator>,
    descriptor: String,
}

impl ObservableBasis {
    /// Generalized Gell-Mann basis on Ran ρ, embedded into the full space
    /// with zero blocks on Ker ρ: (rank)² - 1 operators.
    pub fn default_basis(rho: &StateOperator) -> Self {
        let rank = rho.rank();
        let dim = rho.dim();
        // support eigenvector columns (eigenvalues are sorted descending, so
        // the support occupies the leading columns)
        let v = rho.eigenvectors().columns(0, rank).clone_owned();
        let mut ops = Vec::with_capacity(rank * rank - 1);
        for j in 0..rank {
            for k in (j + 1)..rank {
                let mut sym = CMatrix::zeros(rank, rank);
                sym[(j, k)] = Complex64::new(1.0, 0.0);
                sym[(k, j)] = Complex64::new(1.0, 0.0);
                ops.push(embed(&v, &sym));
                let mut asym = CMatrix::zeros(rank, rank);
                asym[(j, k)] = Complex64::new(0.0, -1.0);
                asym[(k, j)] = Complex64::new(0.0, 1.0);
                ops.push(embed(&v, &asym));
            }
        }
        for l in 1..rank {
            let norm = (2.0 / (l as f64 * (l as f64 + 1.0))).sqrt();
            let mut diag = CMatrix::zeros(rank, rank);
            for a in 0..l {
                diag[(a, a)] = Complex64::new(norm, 0.0);
            }
            diag[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
            ops.push(embed(&v, &diag));
        }
        Self {
            range_projector: rho.range_projector(),
            ops,
            descriptor: format!("gell-mann(rank={rank}, dim={dim})"),
        }
    }

    /// User-supplied basis; validates tracelessness on the range and linear
    /// independence of the restrictions (plain trace Gram, pivot 1e-10).
    pub fn custom(rho: &StateOperator, ops: Vec<HermitianOperator>) -> Result<Self> {
        let b = rho.range_projector();
        let mut restricted: Vec<CMatrix> = Vec::with_capacity(ops.len() + 1);
        restricted.push(b.matrix().clone());
        for (k, x) in ops.iter().enumerate() {
            if x.dim() != rho.dim() {
                return Err(SeaError::DimensionMismatch {
                    expected: rho.dim(),
                    got: x.dim(),
                });
            }
            let r = b.matrix() * x.matrix() * b.matrix();
            if r.trace().re.abs() > 1e-10 {
                return Err(SeaError::SingularBasis(format!(
                    "operator {k} is not traceless on Ran ρ"
                )));
            }
            restricted.push(r);
        }
        let n = restricted.len();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = (restricted[i].adjoint() * &restricted[j]).trace().re;
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let (_, dropped) = select_independent(&gram, 1e-10);
        if !dropped.is_empty() {
            return Err(SeaError::SingularBasis(format!(
                "restrictions to Ran ρ are linearly dependent (indices {dropped:?})"
            )));
        }
        Ok(Self {
            range_projector: b,
            ops,
            descriptor: "custom".into(),
        })
    }

    /// Rotates the default basis by a unitary acting on the support; used by
    /// the basis-covariance property tests.
    pub fn rotated_default(rho: &StateOperator, support_unitary: &CMatrix) -> Result<Self> {
        let rank = rho.rank();
        if support_unitary.nrows() != rank {
            return Err(SeaError::DimensionMismatch {
                expected: rank,
                got: support_unitary.nrows(),
            });
        }
        let base = Self::default_basis(rho);
        let v = rho.eigenvectors().columns(0, rank).clone_owned();
        let w = &v * support_unitary;
        let ops = base
            .ops
            .iter()
            .map(|x| {
                let small = v.adjoint() * x.matrix() * &v;
                HermitianOperator::new_unchecked(hermitize(&(&w * small * w.adjoint())))
            })
            .collect();
        Ok(Self {
            range_projector: base.range_projector,
            ops,
            descriptor: "rotated-gell-mann".into(),
        })
    }

    pub fn range_projector(&self) -> &HermitianOperator {
        &self.range_projector
    }

    pub fn ops(&self) -> &[HermitianOperator] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }
}

fn embed(v: &CMatrix, small: &CMatrix) -> HermitianOperator {
    HermitianOperator::new_unchecked(hermitize(&(v * small * v.adjoint())))
}

/// Affinities of the log-state expansion
/// √ρ ln ρ = -f0 √ρ - Σ_j f_j √ρ X_j, with s(ρ) = f0 + Σ f_j x_j.
#[derive(Debug, Clone)]
pub struct AffinityVector {
    pub f0: f64,
    pub f: Vec<f64>,
}

/// Least-squares solve for the affinities in the (F|G) inner product. For a
/// complete basis the expansion is exact (residual at roundoff).
pub fn affinities(rho: &StateOperator, basis: &ObservableBasis) -> Result<AffinityVector> {
    let k = basis.len();
    let log = rho.log_on_range();
    let sqrt = rho.sqrt_state();

    // Gram over {√ρ, √ρ X_j}: row 0 is the identity slot
    let mut gram = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k + 1);
    gram[(0, 0)] = 1.0;
    let rho_log = rho.matrix() * log.matrix();
    rhs[0] = rho_log.trace().re;
    for j in 0..k {
        let xj = basis.ops()[j].matrix();
        gram[(0, j + 1)] = rho.expectation(&basis.ops()[j]);
        gram[(j + 1, 0)] = gram[(0, j + 1)];
        rhs[j + 1] = (xj * &rho_log).trace().re;
        for i in j..k {
            let v = (basis.ops()[i].matrix() * rho.matrix() * xj).trace().re;
            gram[(i + 1, j + 1)] = v;
            gram[(j + 1, i + 1)] = v;
        }
    }
    let coeffs = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SeaError::SingularBasis("affinity Gram matrix is singular".into()))?;

    let f0 = -coeffs[0];
    let f: Vec<f64> = (0..k).map(|j| -coeffs[j + 1]).collect();

    // reconstruction audit: √ρ ln ρ + f0 √ρ + Σ f_j √ρ X_j ≈ 0
    let mut resid = sqrt.matrix() * log.matrix() + sqrt.matrix() * Complex64::new(f0, 0.0);
    for (j, fj) in f.iter().enumerate() {
        resid += sqrt.matrix() * basis.ops()[j].matrix() * Complex64::new(*fj, 0.0);
    }
    let norm = crate::operator::real_scalar_product(&resid, &resid)?.max(0.0).sqrt();
    if norm > 1e-7 {
        return Err(SeaError::SingularBasis(format!(
            "affinity expansion residual {norm:.3e}: the basis does not span Ran ρ"
        )));
    }
    Ok(AffinityVector { f0, f })
}

/// Symmetric PSD matrix of generalized conductivities (units 1/τ).
#[derive(Debug, Clone)]
pub struct ConductivityMatrix {
    pub entries: DMatrix<f64>,
}

impl ConductivityMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

fn constraint_directions(
    rho: &StateOperator,
    basis: &ObservableBasis,
    constraints: &ConservedSet,
) -> Result<Vec<HermitianOperator>> {
    basis
        .ops()
        .iter()
        .map(|x| Ok(orthogonal_component(rho, x, constraints.observables())?.direction))
        .collect()
}

/// L_ij = (1/τ) ([√ρ X_i]⊥ | [√ρ X_j]⊥): the Gram form, structurally
/// symmetric and PSD.
pub fn conductivities(
    rho: &StateOperator,
    basis: &ObservableBasis,
    constraints: &ConservedSet,
    tau: f64,
) -> Result<ConductivityMatrix> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(SeaError::InvalidTau(tau));
    }
    let dirs = constraint_directions(rho, basis, constraints)?;
    let k = dirs.len();
    let weighted: Vec<CMatrix> = dirs.iter().map(|y| rho.matrix() * y.matrix()).collect();
    let mut l = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = (&weighted[i] * dirs[j].matrix()).trace().re / tau;
            l[(i, j)] = v;
            l[(j, i)] = v;
        }
    }
    Ok(ConductivityMatrix { entries: l })
}

/// The bordered-determinant form of the conductivities: each entry is the
/// ratio of an augmented covariance determinant to the constraint Gram
/// determinant. Numerically independent of the Gram form; used as its
/// cross-check.
pub fn conductivities_determinant(
    rho: &StateOperator,
    basis: &ObservableBasis,
    constraints: &ConservedSet,
    tau: f64,
) -> Result<ConductivityMatrix> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(SeaError::InvalidTau(tau));
    }
    let gram = covariance_matrix(constraints.observables(), rho)?;
    let (kept, _) = select_independent(&gram, GRAM_PIVOT_TOL);
    let kept_ops: Vec<HermitianOperator> = kept
        .iter()
        .map(|&i| constraints.observables()[i].clone())
        .collect();
    let m = kept_ops.len();
    let gamma = if m == 0 {
        1.0
    } else {
        covariance_matrix(&kept_ops, rho)?.lu().determinant()
    };

    let k = basis.len();
    let mut l = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut bordered = DMatrix::<f64>::zeros(m + 1, m + 1);
            bordered[(0, 0)] = covariance(&basis.ops()[i], &basis.ops()[j], rho)?;
            for (c, rc) in kept_ops.iter().enumerate() {
                bordered[(0, c + 1)] = covariance(rc, &basis.ops()[j], rho)?;
                bordered[(c + 1, 0)] = covariance(&basis.ops()[i], rc, rho)?;
                for (r, rr) in kept_ops.iter().enumerate() {
                    bordered[(c + 1, r + 1)] = covariance(rr, rc, rho)?;
                }
            }
            l[(i, j)] = bordered.lu().determinant() / (gamma * tau);
        }
    }
    Ok(ConductivityMatrix { entries: l })
}

/// Both routes to the dissipative rates of the basis observables:
/// from the generator (Dx_i/Dt = Tr(D X_i)) and from the conductivities
/// (Σ_j f_j L_ij). They agree within solver tolerance.
#[derive(Debug, Clone)]
pub struct DissipativeRates {
    pub from_generator: Vec<f64>,
    pub from_conductivities: Vec<f64>,
}

impl DissipativeRates {
    pub fn max_residual(&self) -> f64 {
        self.from_generator
            .iter()
            .zip(&self.from_conductivities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn dissipative_rates(
    rho: &StateOperator,
    basis: &ObservableBasis,
    constraints: &ConservedSet,
    tau: f64,
) -> Result<DissipativeRates> {
    let eval = dissipative_term_projection(rho, constraints, tau)?;
    let from_generator: Vec<f64> = basis
        .ops()
        .iter()
        .map(|x| (eval.dissipative_term.matrix() * x.matrix()).trace().re)
        .collect();
    let aff = affinities(rho, basis)?;
    let l = conductivities(rho, basis, constraints, tau)?;
    let k = basis.len();
    let from_conductivities: Vec<f64> = (0..k)
        .map(|i| (0..k).map(|j| aff.f[j] * l.entries[(i, j)]).sum())
        .collect();
    Ok(DissipativeRates {
        from_generator,
        from_conductivities,
    })
}

/// The two quadratic forms for the entropy production: f·L·f over the
/// affinities, and r·L⁻¹·r over the dissipative rates (evaluated on the
/// range of L via eigenvalue cutoff when L is singular, and flagged).
#[derive(Debug, Clone)]
pub struct QuadraticForms {
    pub affinity_form: f64,
    pub rate_form: f64,
    pub l_rank_deficient: bool,
}

pub fn entropy_production_quadratic_forms(
    rho: &StateOperator,
    basis: &ObservableBasis,
    constraints: &ConservedSet,
    tau: f64,
) -> Result<QuadraticForms> {
    let aff = affinities(rho, basis)?;
    let l = conductivities(rho, basis, constraints, tau)?;
    let k = basis.len();
    let mut affinity_form = 0.0;
    for i in 0..k {
        for j in 0..k {
            affinity_form += aff.f[i] * aff.f[j] * l.entries[(i, j)];
        }
    }

    let rates = dissipative_rates(rho, basis, constraints, tau)?;
    let r = nalgebra::DVector::from_vec(rates.from_generator.clone());
    let eig = l.entries.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = 1e-12 * scale.max(1.0);
    let mut rank_deficient = false;
    let mut rate_form = 0.0;
    let projected = eig.eigenvectors.transpose() * &r;
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cutoff {
            rate_form += projected[idx] * projected[idx] / ev;
        } else {
            rank_deficient = true;
        }
    }
    Ok(QuadraticForms {
        affinity_form,
        rate_form,
        l_rank_deficient: rank_deficient,
    })
}

/// Everything the analysis front end reports: basis descriptor, affinities,
/// conductivities, the three entropy-production routes, and their residuals.
#[derive(Debug, Clone)]
pub struct OnsagerReport {
    pub basis_descriptor: String,
    pub affinities: AffinityVector,
    pub conductivities: ConductivityMatrix,
    pub rates: DissipativeRates,
    /// Gram-ratio route / affinity quadratic form / rate quadratic form.
    pub entropy_production_routes: [f64; 3],
    pub max_route_deviation: f64,
    pub rate_consistency_residual: f64,
    pub l_rank_deficient: bool,
}

pub fn onsager_report(
    rho: &StateOperator,
    basis: &ObservableBasis,
    constraints: &ConservedSet,
    tau: f64,
) -> Result<OnsagerReport> {
    let aff = affinities(rho, basis)?;
    let l = conductivities(rho, basis, constraints, tau)?;
    let rates = dissipative_rates(rho, basis, constraints, tau)?;
    let forms = entropy_production_quadratic_forms(rho, basis, constraints, tau)?;
    let gram_route = crate::generator::entropy_production_rate(rho, constraints, tau)?;
    let routes = [gram_route, forms.affinity_form, forms.rate_form];
    let max_route_deviation = routes
        .iter()
        .flat_map(|a| routes.iter().map(move |b| (a - b).abs()))
        .fold(0.0, f64::max);
    Ok(OnsagerReport {
        basis_descriptor: basis.descriptor().to_string(),
        affinities: aff,
        conductivities: l,
        rate_consistency_residual: rates.max_residual(),
        rates,
        entropy_production_routes: routes,
        max_route_deviation,
        l_rank_deficient: forms.l_rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::DEFAULT_ZERO_TOL;
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
    fn default_basis_counts_and_independence() {
        let mut rng = testkit::rng(3);
        let rho2 = testkit::random_state(&mut rng, 2);
        assert_eq!(ObservableBasis::default_basis(&rho2).len(), 3);
        let rho3 = testkit::random_state(&mut rng, 3);
        assert_eq!(ObservableBasis::default_basis(&rho3).len(), 8);
        for dim in 2..=5 {
            let rho = testkit::random_state(&mut rng, dim);
            let basis = ObservableBasis::default_basis(&rho);
            // custom() re-validates independence of the same operators
            assert!(ObservableBasis::custom(&rho, basis.ops().to_vec()).is_ok());
        }
        // rank-deficient state: basis lives on the support only
        let rho = testkit::random_rank_deficient_state(&mut rng, 4, 2);
        let basis = ObservableBasis::default_basis(&rho);
        assert_eq!(basis.len(), 3);
        for x in basis.ops() {
            // zero blocks on the kernel
            let p = rho.range_projector();
            let leak = x
                .matrix()
                .iter()
                .zip((p.matrix() * x.matrix() * p.matrix()).iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0_f64, f64::max);
            assert!(leak < 1e-12);
        }
    }

    #[test]
    fn custom_basis_rejects_dependent_or_traceful_sets() {
        let rho = StateOperator::maximally_mixed(2);
        let x = HermitianOperator::from_real_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            ObservableBasis::custom(&rho, vec![x.clone(), x.clone()]),
            Err(SeaError::SingularBasis(_))
        ));
        let traceful = HermitianOperator::from_real_diagonal(&[1.0, 0.5]);
        assert!(matches!(
            ObservableBasis::custom(&rho, vec![traceful]),
            Err(SeaError::SingularBasis(_))
        ));
    }

    #[test]
    fn affinities_maximally_mixed() {
        let rho = StateOperator::maximally_mixed(3);
        let basis = ObservableBasis::default_basis(&rho);
        let aff = affinities(&rho, &basis).unwrap();
        assert_abs_diff_eq!(aff.f0, 3.0_f64.ln(), epsilon = 1e-12);
        for fj in &aff.f {
            assert_abs_diff_eq!(*fj, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn affinities_recover_beta_for_gibbs() {
        // basis contains the centered, normalized H: its affinity is β times
        // the normalization, all orthogonal components vanish
        let h = HermitianOperator::from_real_diagonal(&[0.5, -0.5]);
        let beta = 0.9;
        let rho = StateOperator::gibbs(&h, beta).unwrap();
        let basis = ObservableBasis::default_basis(&rho);
        let aff = affinities(&rho, &basis).unwrap();
        // ln ρ = -βH - ln Z: expand H over the basis and compare
        let mut expected = vec![0.0; basis.len()];
        for (j, x) in basis.ops().iter().enumerate() {
            let overlap = (h.matrix() * x.matrix()).trace().re
                / (x.matrix() * x.matrix()).trace().re;
            expected[j] = beta * overlap;
        }
        for (got, want) in aff.f.iter().zip(&expected) {
            assert_abs_diff_eq!(*got, *want, epsilon = 1e-10);
        }
        // entropy identity s = f0 + Σ f_j x_j
        let s = rho.entropy();
        let recon = aff.f0
            + aff
                .f
                .iter()
                .zip(basis.ops())
                .map(|(fj, x)| fj * rho.expectation(x))
                .sum::<f64>();
        assert_abs_diff_eq!(s, recon, epsilon = 1e-10);
    }

    #[test]
    fn affinity_matches_entropy_partial_derivative() {
        // ∂s/∂x_j at fixed other means, by central finite differences along
        // the dual direction Z_j with Tr(Z_j X_i) = δ_ij, Tr Z_j = 0
        let mut rng = testkit::rng(19);
        let rho = testkit::random_state_with_floor(&mut rng, 3, 0.3);
        let basis = ObservableBasis::default_basis(&rho);
        let aff = affinities(&rho, &basis).unwrap();
        let k = basis.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                t[(i, j)] = (basis.ops()[i].matrix() * basis.ops()[j].matrix())
                    .trace()
                    .re;
            }
        }
        let t_inv = t.try_inverse().unwrap();
        let eps = 1e-4;
        for j in 0..k {
            let mut z = CMatrix::zeros(3, 3);
            for i in 0..k {
                z += basis.ops()[i].matrix() * Complex64::new(t_inv[(i, j)], 0.0);
            }
            let plus = StateOperator::spectral_decompose(
                &HermitianOperator::new_unchecked(rho.matrix() + &z * Complex64::new(eps, 0.0)),
                DEFAULT_ZERO_TOL,
            )
            .unwrap();
            let minus = StateOperator::spectral_decompose(
                &HermitianOperator::new_unchecked(rho.matrix() - &z * Complex64::new(eps, 0.0)),
                DEFAULT_ZERO_TOL,
            )
            .unwrap();
            let ds = (plus.entropy() - minus.entropy()) / (2.0 * eps);
            assert_abs_diff_eq!(ds, aff.f[j], epsilon = 1e-5);
        }
    }

    #[test]
    fn conductivity_symmetry_and_psd() {
        let mut rng = testkit::rng(37);
        for _ in 0..40 {
            let dim = 2 + testkit::index(&mut rng, 3);
            let rho = testkit::random_state(&mut rng, dim);
            let h = testkit::random_hermitian(&mut rng, dim, 1.0);
            let set = ConservedSet::energy_only(h);
            let basis = ObservableBasis::default_basis(&rho);
            let l = conductivities(&rho, &basis, &set, 1.0).unwrap();
            assert!(l.max_asymmetry() < 1e-12);
            assert!(l.min_eigenvalue() > -1e-10);
        }
    }

    #[test]
    fn constraint_aligned_observable_has_zero_row() {
        // X_1 proportional to centered H lies in the constraint span: its
        // whole conductivity row and column vanish
        let h = HermitianOperator::from_real_diagonal(&[0.5, -0.5]);
        let rho = diag_state(&[0.3, 0.7]);
        let set = ConservedSet::energy_only(h.clone());
        let x1 = HermitianOperator::from_real_diagonal(&[1.0, -1.0]);
        let x2 = HermitianOperator::new(CMatrix::from_fn(2, 2, |i, j| {
            if i != j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
        .unwrap();
        let x3 = HermitianOperator::new(CMatrix::from_fn(2, 2, |i, j| {
            if (i, j) == (0, 1) {
                Complex64::new(0.0, -1.0)
            } else if (i, j) == (1, 0) {
                Complex64::new(0.0, 1.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
        .unwrap();
        let basis = ObservableBasis::custom(&rho, vec![x1, x2, x3]).unwrap();
        let l = conductivities(&rho, &basis, &set, 1.0).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(l.entries[(0, j)], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(l.entries[(j, 0)], 0.0, epsilon = 1e-12);
        }
        // singular L: the inverse-form rate is evaluated on Ran L and flagged
        let forms = entropy_production_quadratic_forms(&rho, &basis, &set, 1.0).unwrap();
        assert!(forms.l_rank_deficient);
        assert_abs_diff_eq!(forms.affinity_form, forms.rate_form, epsilon = 1e-8);
    }

    #[test]
    fn determinant_form_matches_gram_form() {
        let mut rng = testkit::rng(43);
        for _ in 0..25 {
            let dim = 2 + testkit::index(&mut rng, 2);
            let rho = testkit::random_state(&mut rng, dim);
            let h = testkit::random_hermitian(&mut rng, dim, 1.0);
            let set = ConservedSet::energy_only(h);
            let basis = ObservableBasis::default_basis(&rho);
            let a = conductivities(&rho, &basis, &set, 0.8).unwrap();
            let b = conductivities_determinant(&rho, &basis, &set, 0.8).unwrap();
            let dev = (&a.entries - &b.entries)
                .iter()
                .map(|v| v.abs())
                .fold(0.0_f64, f64::max);
            assert!(dev < 1e-8, "forms disagree by {dev}");
        }
    }

    #[test]
    fn rates_agree_both_ways() {
        let mut rng = testkit::rng(53);
        // nondissipative state: zero vector both ways
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0]);
        let gibbs = StateOperator::gibbs(&h, 0.5).unwrap();
        let set = ConservedSet::energy_only(h.clone());
        let basis = ObservableBasis::default_basis(&gibbs);
        let rates = dissipative_rates(&gibbs, &basis, &set, 1.0).unwrap();
        for (a, b) in rates.from_generator.iter().zip(&rates.from_conductivities) {
            assert_abs_diff_eq!(*a, 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(*b, 0.0, epsilon = 1e-10);
        }
        for _ in 0..50 {
            let dim = 2 + testkit::index(&mut rng, 3);
            let rho = testkit::random_state(&mut rng, dim);
            let hh = testkit::random_hermitian(&mut rng, dim, 1.0);
            let s = ConservedSet::energy_only(hh);
            let b = ObservableBasis::default_basis(&rho);
            let r = dissipative_rates(&rho, &b, &s, 1.3).unwrap();
            assert!(r.max_residual() < 1e-8, "residual {}", r.max_residual());
        }
    }

    #[test]
    fn rates_match_finite_differenced_means() {
        // evolve with the Hamiltonian term disabled (H enters only the
        // constraint set) and difference the means of the basis observables
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let rho = diag_state(&[0.25, 0.75]);
        let set = ConservedSet::energy_only(h);
        let basis = ObservableBasis::default_basis(&rho);
        let rates = dissipative_rates(&rho, &basis, &set, 1.0).unwrap();
        let dt = 1e-6;
        let eval = dissipative_term_projection(&rho, &set, 1.0).unwrap();
        let stepped = StateOperator::spectral_decompose(
            &HermitianOperator::new_unchecked(
                rho.matrix() + eval.dissipative_term.matrix() * Complex64::new(dt, 0.0),
            ),
            DEFAULT_ZERO_TOL,
        )
        .unwrap();
        for (j, x) in basis.ops().iter().enumerate() {
            let fd = (stepped.expectation(x) - rho.expectation(x)) / dt;
            assert_abs_diff_eq!(fd, rates.from_generator[j], epsilon = 1e-5);
        }
    }

    #[test]
    fn triple_entropy_production_consistency() {
        let mut rng = testkit::rng(61);
        for _ in 0..40 {
            let dim = 2 + testkit::index(&mut rng, 3);
            let rho = testkit::random_state(&mut rng, dim);
            let h = testkit::random_hermitian(&mut rng, dim, 1.0);
            let set = ConservedSet::energy_only(h);
            let basis = ObservableBasis::default_basis(&rho);
            let report = onsager_report(&rho, &basis, &set, 1.0).unwrap();
            assert!(
                report.max_route_deviation < 1e-7,
                "routes deviate: {:?}",
                report.entropy_production_routes
            );
        }
        // Gibbs: zero by all routes
        let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
        let gibbs = StateOperator::gibbs(&h, 1.1).unwrap();
        let set = ConservedSet::energy_only(h);
        let basis = ObservableBasis::default_basis(&gibbs);
        let report = onsager_report(&gibbs, &basis, &set, 1.0).unwrap();
        for r in report.entropy_production_routes {
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn quadratic_form_scaling_is_algebraic() {
        // doubling one affinity quadruples its diagonal contribution at
        // fixed L: pure quadratic-form algebra on the computed matrix
        let mut rng = testkit::rng(67);
        let rho = testkit::random_state(&mut rng, 2);
        let h = testkit::random_hermitian(&mut rng, 2, 1.0);
        let set = ConservedSet::energy_only(h);
        let basis = ObservableBasis::default_basis(&rho);
        let aff = affinities(&rho, &basis).unwrap();
        let l = conductivities(&rho, &basis, &set, 1.0).unwrap();
        let j = 0;
        let diag_contrib = |scale: f64| aff.f[j] * scale * aff.f[j] * scale * l.entries[(j, j)];
        assert_abs_diff_eq!(diag_contrib(2.0), 4.0 * diag_contrib(1.0), epsilon = 1e-12);
    }

    #[test]
    fn basis_covariance_of_physical_quantities() {
        let mut rng = testkit::rng(71);
        for _ in 0..10 {
            let dim = 2 + testkit::index(&mut rng, 2);
            let rho = testkit::random_state(&mut rng, dim);
            let h = testkit::random_hermitian(&mut rng, dim, 1.0);
            let set = ConservedSet::energy_only(h);
            let b1 = ObservableBasis::default_basis(&rho);
            let w = testkit::random_unitary(&mut rng, rho.rank());
            let b2 = ObservableBasis::rotated_default(&rho, &w).unwrap();
            let f1 = entropy_production_quadratic_forms(&rho, &b1, &set, 1.0).unwrap();
            let f2 = entropy_production_quadratic_forms(&rho, &b2, &set, 1.0).unwrap();
            assert_abs_diff_eq!(f1.affinity_form, f2.affinity_form, epsilon = 1e-8);
            assert_abs_diff_eq!(f1.rate_form, f2.rate_form, epsilon = 1e-8);
            // the dissipative rate of a fixed physical observable is basis
            // independent: Tr(D G) straight off the generator
            let g = testkit::random_hermitian(&mut rng, dim, 1.0);
            let eval = dissipative_term_projection(&rho, &set, 1.0).unwrap();
            let direct = (eval.dissipative_term.matrix() * g.matrix()).trace().re;
            assert!(direct.is_finite());
        }
    }
}
