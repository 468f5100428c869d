//! Dense Hermitian operator algebra: spectral decompositions, operator
//! functions on the range, the real scalar product (F|G) = Tr(F†G + G†F)/2,
//! centered covariances and Gram determinants.
//!
//! Everything works in units with ħ = 1 and k_B = 1. Dimensions are small
//! (composite demos cap at 64), so all operator functions go through a full
//! eigendecomposition; exactness of the kernel convention matters more than
//! speed here.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, SeaError};

/// Hermiticity tolerance for operator construction (max abs elementwise).
pub const TOL_HERM: f64 = 1e-12;
/// Default eigenvalue clamping tolerance for state construction.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;
/// Pivot threshold deciding singularity of covariance Gram matrices.
pub const GRAM_PIVOT_TOL: f64 = 1e-12;

pub type CMatrix = DMatrix<Complex64>;

/// [A, B] = AB - BA.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// {A, B} = AB + BA.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// (M + M†)/2.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Largest elementwise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// The real scalar product (F|G) = Tr(F†G + G†F)/2 = Re Tr(F†G).
///
/// Defined for arbitrary (not necessarily Hermitian) operators of equal
/// dimension; symmetric and bilinear over real scalars.
pub fn real_scalar_product(f: &CMatrix, g: &CMatrix) -> Result<f64> {
    if f.nrows() != g.nrows() || f.ncols() != g.ncols() {
        return Err(SeaError::DimensionMismatch {
            expected: f.nrows(),
            got: g.nrows(),
        });
    }
    Ok((f.adjoint() * g).trace().re)
}

/// A dense Hermitian matrix, validated on construction.
///
/// Carrier for Hamiltonians, conserved observables, and every Hermitian
/// intermediate the generator produces.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    dim: usize,
    entries: CMatrix,
}

impl HermitianOperator {
    /// Validates squareness and hermiticity (tolerance [`TOL_HERM`]); the
    /// stored matrix is the Hermitian average (M + M†)/2.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(SeaError::DimensionMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        let dev = max_abs(&(&entries - entries.adjoint()));
        if dev > 2.0 * TOL_HERM {
            return Err(SeaError::NotAState(format!(
                "matrix is not Hermitian (max deviation {dev:.3e})"
            )));
        }
        Ok(Self::new_unchecked(hermitize(&entries)))
    }

    /// Wraps a matrix already known to be Hermitian.
    pub(crate) fn new_unchecked(entries: CMatrix) -> Self {
        Self {
            dim: entries.nrows(),
            entries,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new_unchecked(CMatrix::identity(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::new_unchecked(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new_unchecked(&self.entries * Complex64::new(c, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new_unchecked(&self.entries + &other.entries)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new_unchecked(&self.entries - &other.entries)
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Max abs elementwise deviation from another operator.
    pub fn distance_max(&self, other: &Self) -> f64 {
        max_abs(&(&self.entries - &other.entries))
    }

    /// True when [self, other] vanishes within `tol` (max abs entry).
    pub fn commutes_with(&self, other: &Self, tol: f64) -> bool {
        max_abs(&commutator(&self.entries, &other.entries)) <= tol
    }

    /// U M U† for unitary U.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        Self::new_unchecked(u * &self.entries * u.adjoint())
    }
}

/// Hermitian eigendecomposition with eigenvalues sorted descending and the
/// eigenvector columns carried along.
fn eigh_descending(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = nalgebra::linalg::SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// A state operator: positive-semidefinite, unit-trace Hermitian operator
/// with its spectral decomposition cached and the kernel represented
/// discretely.
///
/// Eigenvalues are stored in descending order; `kernel_mask[i]` is true
/// exactly for the eigenvalues clamped to 0. The dynamics conserves
/// dim Ker(ρ), so the kernel must be a discrete set, not a cloud of tiny
/// positives.
#[derive(Debug, Clone)]
pub struct StateOperator {
    op: HermitianOperator,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
    kernel_mask: Vec<bool>,
}

impl StateOperator {
    /// Spectral decomposition with eigenvalue clamping.
    ///
    /// Eigenvalues in [-zero_tol, zero_tol] are set to exactly 0 and flagged
    /// in the kernel mask; the remaining support is renormalized to sum 1.
    /// Fails with `NotAState` if an eigenvalue lies below -zero_tol or the
    /// trace deviates from 1 by more than 1e-6 before renormalization.
    pub fn spectral_decompose(op: &HermitianOperator, zero_tol: f64) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > 1e-6 {
            return Err(SeaError::NotAState(format!("trace {tr} is not 1")));
        }
        let (values, vectors) = eigh_descending(op.matrix());
        if let Some(&bad) = values.iter().find(|&&v| v < -zero_tol) {
            return Err(SeaError::NotAState(format!(
                "negative eigenvalue {bad:.3e} below -zero_tol"
            )));
        }
        Self::from_spectrum(values, vectors, zero_tol)
    }

    /// Builds a state from eigenvalues (any order) and matching eigenvector
    /// columns, applying the clamping rule and renormalizing the support.
    pub(crate) fn from_spectrum(
        values: Vec<f64>,
        vectors: CMatrix,
        zero_tol: f64,
    ) -> Result<Self> {
        Self::from_spectrum_opts(values, vectors, zero_tol, true)
    }

    /// As [`Self::from_spectrum`], optionally skipping the support
    /// renormalization (used when `renormalize_every > 1`).
    pub(crate) fn from_spectrum_opts(
        mut values: Vec<f64>,
        mut vectors: CMatrix,
        zero_tol: f64,
        renormalize: bool,
    ) -> Result<Self> {
        let n = values.len();
        // sort descending, carrying columns
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
        if order.iter().enumerate().any(|(i, &o)| i != o) {
            let v: Vec<f64> = order.iter().map(|&i| values[i]).collect();
            vectors = CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
            values = v;
        }
        let mut kernel_mask = vec![false; n];
        let mut support_sum = 0.0;
        for (i, v) in values.iter_mut().enumerate() {
            if v.abs() <= zero_tol {
                *v = 0.0;
                kernel_mask[i] = true;
            } else {
                support_sum += *v;
            }
        }
        if support_sum <= 0.0 {
            return Err(SeaError::NotAState("empty support".into()));
        }
        if renormalize {
            for v in values.iter_mut() {
                *v /= support_sum;
            }
        }
        let op = reconstruct(&values, &vectors);
        Ok(Self {
            op: HermitianOperator::new_unchecked(op),
            eigenvalues: values,
            eigenvectors: vectors,
            kernel_mask,
        })
    }

    /// Rebuilds a state from a raw matrix produced mid-integration: the
    /// matrix is re-Hermitized and eigenvalues down to `-floor_tol` are
    /// tolerated and clamped to the kernel. Anything lower is an error.
    pub(crate) fn from_matrix_relaxed(m: &CMatrix, zero_tol: f64, floor_tol: f64) -> Result<Self> {
        let h = hermitize(m);
        let (values, vectors) = eigh_descending(&h);
        if let Some(&bad) = values.iter().find(|&&v| v < -floor_tol) {
            return Err(SeaError::KernelViolation { eigenvalue: bad });
        }
        let clamped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
        Self::from_spectrum(clamped, vectors, zero_tol)
    }

    /// The maximally mixed state I/d.
    pub fn maximally_mixed(dim: usize) -> Self {
        let op = HermitianOperator::identity(dim).scale(1.0 / dim as f64);
        Self::spectral_decompose(&op, DEFAULT_ZERO_TOL).expect("I/d is a state")
    }

    /// Pure state |ψ⟩⟨ψ| from an (unnormalized) amplitude vector.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if norm < 1e-14 {
            return Err(SeaError::NotAState("zero amplitude vector".into()));
        }
        let v = v / Complex64::new(norm, 0.0);
        let proj = &v * v.adjoint();
        Self::spectral_decompose(
            &HermitianOperator::new_unchecked(proj),
            DEFAULT_ZERO_TOL,
        )
    }

    /// e^A / Tr e^A for Hermitian A, computed spectrally with exponent
    /// shifting so that large |A| cannot overflow.
    pub fn exp_family(a: &HermitianOperator) -> Result<Self> {
        let (values, vectors) = eigh_descending(a.matrix());
        let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = values.iter().map(|&v| (v - m).exp()).collect();
        let z: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
        Self::from_spectrum(probs, vectors, DEFAULT_ZERO_TOL)
    }

    /// Canonical state e^{-βH}/Z.
    pub fn gibbs(h: &HermitianOperator, beta: f64) -> Result<Self> {
        Self::exp_family(&h.scale(-beta))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    /// Eigenvalues in descending order (kernel entries are exact zeros).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary of eigenvector columns matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn kernel_mask(&self) -> &[bool] {
        &self.kernel_mask
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_mask.iter().filter(|&&k| k).count()
    }

    pub fn rank(&self) -> usize {
        self.dim() - self.kernel_dim()
    }

    /// Applies a real function to the support spectrum (kernel eigenvalues
    /// map to `kernel_value`) and reassembles U f(Λ) U†.
    fn spectral_map(&self, f: impl Fn(f64) -> f64, kernel_value: f64) -> HermitianOperator {
        let mapped: Vec<f64> = self
            .eigenvalues
            .iter()
            .zip(&self.kernel_mask)
            .map(|(&v, &k)| if k { kernel_value } else { f(v) })
            .collect();
        HermitianOperator::new_unchecked(reconstruct(&mapped, &self.eigenvectors))
    }

    /// √ρ = U diag(√λ) U†; kernel eigenvalues map to 0.
    pub fn sqrt_state(&self) -> HermitianOperator {
        self.spectral_map(f64::sqrt, 0.0)
    }

    /// ln ρ on the support of ρ, zero on the kernel: U diag(ln λ | 0) U†.
    ///
    /// Multiplication by √ρ annihilates the kernel block, so √ρ ln ρ is
    /// exactly supported on Ran ρ under this convention.
    pub fn log_on_range(&self) -> HermitianOperator {
        self.spectral_map(f64::ln, 0.0)
    }

    /// Projector onto Ran ρ.
    pub fn range_projector(&self) -> HermitianOperator {
        self.spectral_map(|_| 1.0, 0.0)
    }

    /// The von Neumann entropy -Σ λ ln λ over the support (units k_B).
    pub fn entropy(&self) -> f64 {
        -self
            .eigenvalues
            .iter()
            .zip(&self.kernel_mask)
            .filter(|(_, &k)| !k)
            .map(|(&v, _)| v * v.ln())
            .sum::<f64>()
    }

    /// Tr(ρ F).
    pub fn expectation(&self, f: &HermitianOperator) -> f64 {
        (self.matrix() * f.matrix()).trace().re
    }

    /// ½ ‖ρ - σ‖₁, the trace distance.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let diff = self.matrix() - other.matrix();
        let (values, _) = eigh_descending(&diff);
        0.5 * values.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// U ρ U† for unitary U.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        Self::spectral_decompose(&self.op.conjugate_by(u), DEFAULT_ZERO_TOL)
    }
}

fn reconstruct(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let n = values.len();
    let mut diag = CMatrix::zeros(n, n);
    for i in 0..n {
        diag[(i, i)] = Complex64::new(values[i], 0.0);
    }
    vectors * diag * vectors.adjoint()
}

/// ΔF = F - Tr(ρF) I.
pub fn centered(f: &HermitianOperator, rho: &StateOperator) -> Result<HermitianOperator> {
    if f.dim() != rho.dim() {
        return Err(SeaError::DimensionMismatch {
            expected: rho.dim(),
            got: f.dim(),
        });
    }
    let mean = rho.expectation(f);
    Ok(f.sub(&HermitianOperator::identity(f.dim()).scale(mean)))
}

/// ⟨ΔF, ΔG⟩ = (√ρ ΔF | √ρ ΔG) = ½ Tr(ρ{ΔF, ΔG}).
///
/// Symmetric in its operator arguments, and `covariance(F, F, ρ) ≥ 0`.
pub fn covariance(f: &HermitianOperator, g: &HermitianOperator, rho: &StateOperator) -> Result<f64> {
    let df = centered(f, rho)?;
    let dg = centered(g, rho)?;
    // ½ Tr(ρ{A,B}) = Re Tr(ρAB) for Hermitian A, B
    Ok((rho.matrix() * df.matrix() * dg.matrix()).trace().re)
}

/// Matrix of pairwise covariances [⟨ΔF_i, ΔF_j⟩].
pub fn covariance_matrix(ops: &[HermitianOperator], rho: &StateOperator) -> Result<DMatrix<f64>> {
    let n = ops.len();
    let deltas: Vec<HermitianOperator> = ops
        .iter()
        .map(|f| centered(f, rho))
        .collect::<Result<_>>()?;
    let weighted: Vec<CMatrix> = deltas.iter().map(|d| rho.matrix() * d.matrix()).collect();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = (&weighted[i] * deltas[j].matrix()).trace().re;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// Gram determinant Γ({√ρ F_i}) = det[⟨ΔF_i, ΔF_j⟩].
///
/// Computed from the symmetric eigenvalues of the covariance matrix; any
/// eigenvalue below the pivot threshold [`GRAM_PIVOT_TOL`] marks the
/// weighted, centered operators as linearly dependent and the determinant
/// is reported as exactly 0.
pub fn gram_determinant(ops: &[HermitianOperator], rho: &StateOperator) -> Result<f64> {
    assert!(!ops.is_empty(), "gram_determinant needs a nonempty list");
    let c = covariance_matrix(ops, rho)?;
    Ok(sym_determinant_thresholded(&c, GRAM_PIVOT_TOL))
}

/// Determinant of a symmetric PSD matrix as the product of its eigenvalues,
/// with eigenvalues inside the pivot band treated as exact zeros.
pub(crate) fn sym_determinant_thresholded(c: &DMatrix<f64>, pivot_tol: f64) -> f64 {
    let eig = c.clone().symmetric_eigen();
    let mut det = 1.0;
    for &v in eig.eigenvalues.iter() {
        if v.abs() <= pivot_tol {
            return 0.0;
        }
        det *= v;
    }
    det
}
