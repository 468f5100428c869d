//! Seeded random operators and states for tests, property checks, and the
//! audit fixtures. Deterministic for a given seed.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::operator::{hermitize, CMatrix, HermitianOperator, StateOperator, DEFAULT_ZERO_TOL};

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn index(rng: &mut ChaCha12Rng, n: usize) -> usize {
    rng.random_range(0..n)
}

fn random_complex(rng: &mut ChaCha12Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random Hermitian operator with entries of order `scale`.
pub fn random_hermitian(rng: &mut ChaCha12Rng, dim: usize, scale: f64) -> HermitianOperator {
    let raw = CMatrix::from_fn(dim, dim, |_, _| random_complex(rng) * scale);
    HermitianOperator::new(hermitize(&raw)).expect("hermitized")
}

/// Random full-rank state A A† / Tr(A A†), mixed with I/d so the spectrum
/// stays comfortably away from the kernel band.
pub fn random_state(rng: &mut ChaCha12Rng, dim: usize) -> StateOperator {
    random_state_with_floor(rng, dim, 0.02)
}

/// Random state whose smallest eigenvalue is at least roughly `floor/dim`.
pub fn random_state_with_floor(rng: &mut ChaCha12Rng, dim: usize, floor: f64) -> StateOperator {
    let a = CMatrix::from_fn(dim, dim, |_, _| random_complex(rng));
    let pos = &a * a.adjoint();
    let tr = pos.trace().re;
    let mixed = pos * Complex64::new((1.0 - floor) / tr, 0.0)
        + CMatrix::identity(dim, dim) * Complex64::new(floor / dim as f64, 0.0);
    StateOperator::spectral_decompose(
        &HermitianOperator::new_unchecked(hermitize(&mixed)),
        DEFAULT_ZERO_TOL,
    )
    .expect("constructed state")
}

/// Random state of the given rank (kernel dimension dim - rank), with the
/// support rotated by a random unitary.
pub fn random_rank_deficient_state(
    rng: &mut ChaCha12Rng,
    dim: usize,
    rank: usize,
) -> StateOperator {
    assert!(rank >= 1 && rank <= dim);
    let mut probs: Vec<f64> = (0..rank).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs.extend(std::iter::repeat_n(0.0, dim - rank));
    let u = random_unitary(rng, dim);
    let diag = HermitianOperator::from_real_diagonal(&probs);
    StateOperator::spectral_decompose(&diag.conjugate_by(&u), DEFAULT_ZERO_TOL)
        .expect("rank-deficient state")
}

/// Haar-ish random unitary from the QR decomposition of a random complex
/// matrix, with the R diagonal phases absorbed.
pub fn random_unitary(rng: &mut ChaCha12Rng, dim: usize) -> CMatrix {
    let a = CMatrix::from_fn(dim, dim, |_, _| random_complex(rng));
    let qr = a.qr();
    let q = qr.q();
    let r = qr.r();
    let mut phases = DMatrix::<Complex64>::identity(dim, dim);
    for i in 0..dim {
        let d = r[(i, i)];
        phases[(i, i)] = if d.norm() > 1e-12 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
    }
    q * phases
}

/// Random observable commuting with H: a random real function of H
/// (diagonal in an eigenbasis of H).
pub fn random_commuting_observable(rng: &mut ChaCha12Rng, h: &HermitianOperator) -> HermitianOperator {
    let eig = nalgebra::linalg::SymmetricEigen::new(h.matrix().clone());
    let dim = h.dim();
    // equal eigenvalues of H must get equal entries so the result commutes
    // with H even across degenerate clusters
    let mut values = vec![0.0_f64; dim];
    let mut assigned = vec![false; dim];
    for i in 0..dim {
        if assigned[i] {
            continue;
        }
        let v = rng.random_range(-1.0..1.0);
        for j in i..dim {
            if (eig.eigenvalues[j] - eig.eigenvalues[i]).abs() < 1e-10 {
                values[j] = v;
                assigned[j] = true;
            }
        }
    }
    let mut diag = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        diag[(i, i)] = Complex64::new(values[i], 0.0);
    }
    let m = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
    HermitianOperator::new_unchecked(hermitize(&m))
}

/// Random normalized Bloch vector scaled to radius in (lo, hi).
pub fn random_bloch(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            let r = rng.random_range(lo..hi);
            return [v[0] / n * r, v[1] / n * r, v[2] / n * r];
        }
    }
}
