//! Composite systems: tensor-product state spaces, partial traces,
//! per-subsystem "local perception" operators, and the composite equation of
//! motion
//!
//! ```text
//! dρ/dt = -i[H,ρ] + Σ_J (1/2τ_J(ρ)) {(ΔM_J(ρ))^J, ρ_J} ⊗ ρ_J̄
//! ```
//!
//! where (F)^J = Tr_J̄[(I_J ⊗ ρ_J̄) F] is subsystem J's perception of a
//! full-space operator and ΔM_J comes from the subsystem-level projection of
//! √ρ_J (S)^J orthogonal to the span of the perceived conserved observables.
//! Each subsystem contributes its local perception of the direction of
//! steepest overall entropy ascent, with its own relaxation time τ_J.

use num_complex::Complex64;

use crate::error::{Result, SeaError};
use crate::generator::{hamiltonian_term, orthogonal_component, GeneratorEvaluation};
use crate::model::{Model, RelaxationSpec};
use crate::operator::{hermitize, CMatrix, HermitianOperator, StateOperator, DEFAULT_ZERO_TOL};
use crate::propagator::{evolve, IntegratorConfig, SampleSpec};

/// Hard cap on the full-space dimension: dense per-step eigendecompositions
/// must stay interactive at desk scale.
pub const MAX_COMPOSITE_DIM: usize = 64;

/// Multi-constituent model: subsystem dimensions, local Hamiltonians, an
/// optional interaction on the full space, per-subsystem relaxation times,
/// and optional global conserved charges.
#[derive(Debug, Clone)]
pub struct CompositeModel {
    dims: Vec<usize>,
    local_hamiltonians: Vec<HermitianOperator>,
    interaction: Option<HermitianOperator>,
    taus: Vec<RelaxationSpec>,
    full_dim: usize,
    /// [H, N_1, ...] on the full space; what the propagator audits.
    observables: Vec<HermitianOperator>,
}

impl CompositeModel {
    pub fn new(
        dims: Vec<usize>,
        local_hamiltonians: Vec<HermitianOperator>,
        interaction: Option<HermitianOperator>,
        taus: Vec<RelaxationSpec>,
        extra_conserved: Vec<HermitianOperator>,
    ) -> Result<Self> {
        if dims.is_empty() || dims.len() != local_hamiltonians.len() || dims.len() != taus.len() {
            return Err(SeaError::Config(
                "dims, local_hamiltonians and taus must have equal nonzero length".into(),
            ));
        }
        let full_dim: usize = dims.iter().product();
        if full_dim > MAX_COMPOSITE_DIM {
            return Err(SeaError::Config(format!(
                "full dimension {full_dim} exceeds the cap {MAX_COMPOSITE_DIM}"
            )));
        }
        for (j, (d, h)) in dims.iter().zip(&local_hamiltonians).enumerate() {
            if h.dim() != *d {
                return Err(SeaError::DimensionMismatch {
                    expected: *d,
                    got: h.dim(),
                })
                .map_err(|_| SeaError::Config(format!("local Hamiltonian {j} has wrong size")));
            }
        }
        if let Some(v) = &interaction {
            if v.dim() != full_dim {
                return Err(SeaError::Config(format!(
                    "interaction must act on the full space (dim {full_dim})"
                )));
            }
        }

        let mut full_h = CMatrix::zeros(full_dim, full_dim);
        for (j, h) in local_hamiltonians.iter().enumerate() {
            full_h += embed_at(&dims, j, h.matrix());
        }
        if let Some(v) = &interaction {
            full_h += v.matrix();
        }
        let full_h = HermitianOperator::new_unchecked(hermitize(&full_h));

        let mut observables = vec![full_h];
        for (k, n) in extra_conserved.iter().enumerate() {
            if n.dim() != full_dim {
                return Err(SeaError::Config(format!(
                    "extra conserved observable {k} must act on the full space"
                )));
            }
            if !n.commutes_with(&observables[0], crate::generator::TOL_COMMUTE) {
                return Err(SeaError::Config(format!(
                    "extra conserved observable {k} does not commute with H"
                )));
            }
            observables.push(n.clone());
        }

        Ok(Self {
            dims,
            local_hamiltonians,
            interaction,
            taus,
            full_dim,
            observables,
        })
    }

    /// Equal constant τ for every subsystem.
    pub fn with_uniform_tau(
        dims: Vec<usize>,
        local_hamiltonians: Vec<HermitianOperator>,
        interaction: Option<HermitianOperator>,
        tau: f64,
    ) -> Result<Self> {
        let taus = dims
            .iter()
            .map(|_| RelaxationSpec::constant(tau))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dims, local_hamiltonians, interaction, taus, Vec::new())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn local_hamiltonian(&self, j: usize) -> &HermitianOperator {
        &self.local_hamiltonians[j]
    }

    pub fn interaction(&self) -> Option<&HermitianOperator> {
        self.interaction.as_ref()
    }

    pub fn taus(&self) -> &[RelaxationSpec] {
        &self.taus
    }

    /// Same model with subsystem j's local Hamiltonian replaced.
    pub fn with_local_hamiltonian(&self, j: usize, h: HermitianOperator) -> Result<Self> {
        let mut locals = self.local_hamiltonians.clone();
        locals[j] = h;
        Self::new(
            self.dims.clone(),
            locals,
            self.interaction.clone(),
            self.taus.clone(),
            self.observables[1..].to_vec(),
        )
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for j in (0..dims.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * dims[j + 1];
    }
    s
}

/// Embeds a subsystem operator at slot `j`: I ⊗ ... ⊗ op ⊗ ... ⊗ I.
pub fn embed_at(dims: &[usize], j: usize, op: &CMatrix) -> CMatrix {
    let left: usize = dims[..j].iter().product();
    let right: usize = dims[j + 1..].iter().product();
    let li = CMatrix::identity(left, left);
    let ri = CMatrix::identity(right, right);
    li.kronecker(op).kronecker(&ri)
}

/// Partial trace over the complement of `keep` (indices into `dims`, kept in
/// their original relative order). The result has unit trace and inherits
/// hermiticity and positivity.
pub fn partial_trace_matrix(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let full: usize = dims.iter().product();
    if m.nrows() != full {
        return Err(SeaError::DimensionMismatch {
            expected: full,
            got: m.nrows(),
        });
    }
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep.len() || keep.iter().any(|&k| k >= dims.len()) || keep.is_empty() {
        return Err(SeaError::BadIndexSet(format!(
            "keep = {keep:?} for {} subsystems",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|j| !keep.contains(j)).collect();
    let st = strides(dims);
    let keep_dim: usize = keep.iter().map(|&j| dims[j]).product();
    let traced_dim: usize = traced.iter().map(|&j| dims[j]).product();

    // flat index from a kept multi-index and a traced multi-index
    let flat = |mut a: usize, mut c: usize| -> usize {
        let mut idx = 0;
        for &j in keep.iter().rev() {
            idx += (a % dims[j]) * st[j];
            a /= dims[j];
        }
        for &j in traced.iter().rev() {
            idx += (c % dims[j]) * st[j];
            c /= dims[j];
        }
        idx
    };

    let mut out = CMatrix::zeros(keep_dim, keep_dim);
    for a in 0..keep_dim {
        for b in 0..keep_dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..traced_dim {
                acc += m[(flat(a, c), flat(b, c))];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Partial trace of a state, re-validated as a state on the kept factors.
pub fn partial_trace(rho: &StateOperator, dims: &[usize], keep: &[usize]) -> Result<StateOperator> {
    let m = partial_trace_matrix(rho.matrix(), dims, keep)?;
    StateOperator::spectral_decompose(
        &HermitianOperator::new_unchecked(hermitize(&m)),
        DEFAULT_ZERO_TOL,
    )
}

/// (F)^J = Tr_J̄[(I_J ⊗ ρ_J̄) F]: subsystem J's perception of a full-space
/// operator, weighted by the rest of the system's reduced state.
pub fn perceived_operator(
    f: &CMatrix,
    dims: &[usize],
    j: usize,
    rho_bar: &CMatrix,
) -> Result<HermitianOperator> {
    if j >= dims.len() {
        return Err(SeaError::BadIndexSet(format!("subsystem {j}")));
    }
    let dj = dims[j];
    let others: Vec<usize> = (0..dims.len()).filter(|&k| k != j).collect();
    let bar_dim: usize = others.iter().map(|&k| dims[k]).product();
    if rho_bar.nrows() != bar_dim {
        return Err(SeaError::DimensionMismatch {
            expected: bar_dim,
            got: rho_bar.nrows(),
        });
    }
    let st = strides(dims);
    let flat = |a: usize, mut e: usize| -> usize {
        let mut idx = a * st[j];
        for &k in others.iter().rev() {
            idx += (e % dims[k]) * st[k];
            e /= dims[k];
        }
        idx
    };
    let mut out = CMatrix::zeros(dj, dj);
    for a in 0..dj {
        for b in 0..dj {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..bar_dim {
                for e in 0..bar_dim {
                    acc += rho_bar[(c, e)] * f[(flat(a, e), flat(b, c))];
                }
            }
            out[(a, b)] = acc;
        }
    }
    Ok(HermitianOperator::new_unchecked(hermitize(&out)))
}

/// Subsystem J's perceived entropy, Hamiltonian, and charge operators.
#[derive(Debug, Clone)]
pub struct LocalPerception {
    pub subsystem: usize,
    /// (S)^J with S = -P_Ran ρ ln ρ.
    pub entropy_op: HermitianOperator,
    /// (H)^J.
    pub hamiltonian_op: HermitianOperator,
    /// (N_k)^J per global extra observable.
    pub extra_ops: Vec<HermitianOperator>,
}

pub fn local_perception(
    rho: &StateOperator,
    model: &CompositeModel,
    j: usize,
) -> Result<LocalPerception> {
    let others: Vec<usize> = (0..model.dims.len()).filter(|&k| k != j).collect();
    let rho_bar = if others.is_empty() {
        CMatrix::identity(1, 1)
    } else {
        partial_trace_matrix(rho.matrix(), &model.dims, &others)?
    };
    let s_full = rho.log_on_range().scale(-1.0);
    let entropy_op = perceived_operator(s_full.matrix(), &model.dims, j, &rho_bar)?;
    let hamiltonian_op =
        perceived_operator(model.observables[0].matrix(), &model.dims, j, &rho_bar)?;
    let extra_ops = model.observables[1..]
        .iter()
        .map(|n| perceived_operator(n.matrix(), &model.dims, j, &rho_bar))
        .collect::<Result<_>>()?;
    Ok(LocalPerception {
        subsystem: j,
        entropy_op,
        hamiltonian_op,
        extra_ops,
    })
}

/// Full composite generator: the Hamiltonian commutator plus one dissipative
/// contribution per subsystem, each built from the subsystem-level
/// projection [√ρ_J (S)^J]⊥ over the perceived constraints and assembled as
/// (1/2τ_J) {ΔM_J, ρ_J} ⊗ ρ_J̄. Reduces exactly to the single-constituent
/// generator when there is one subsystem. The multipliers of all subsystems
/// are concatenated in subsystem order; dropped-constraint indices are
/// offset by J·(1 + #extras).
pub fn composite_generator(
    rho: &StateOperator,
    model: &CompositeModel,
) -> Result<GeneratorEvaluation> {
    let ham = hamiltonian_term(rho, &model.observables[0])?;
    let r = model.subsystems();
    let mut dissipative = CMatrix::zeros(model.full_dim, model.full_dim);
    let mut entropy_production = 0.0;
    let mut multipliers = Vec::new();
    let mut dropped = Vec::new();
    let per_subsystem = model.observables.len(); // 1 + extras

    for j in 0..r {
        let others: Vec<usize> = (0..r).filter(|&k| k != j).collect();
        let rho_j = partial_trace(rho, &model.dims, &[j])?;
        let rho_bar = if others.is_empty() {
            CMatrix::identity(1, 1)
        } else {
            partial_trace_matrix(rho.matrix(), &model.dims, &others)?
        };
        let perception = local_perception(rho, model, j)?;
        let mut constraints = vec![perception.hamiltonian_op.clone()];
        constraints.extend(perception.extra_ops.iter().cloned());

        let proj = orthogonal_component(&rho_j, &perception.entropy_op, &constraints)?;
        let tau_j = model.taus[j].evaluate(rho)?;
        // {ΔM_J, ρ_J} ⊗ ρ_J̄ placed at slot j
        let anti = proj.direction.matrix() * rho_j.matrix() + rho_j.matrix() * proj.direction.matrix();
        let local = anti * Complex64::new(0.5 / tau_j, 0.0);
        let term = if others.is_empty() {
            local
        } else {
            // tensor with ρ_J̄, restoring subsystem order
            let mut sub_dims: Vec<usize> = Vec::with_capacity(r);
            sub_dims.push(model.dims[j]);
            sub_dims.extend(others.iter().map(|&k| model.dims[k]));
            let prod = local.kronecker(&rho_bar);
            reorder_subsystems(&prod, &sub_dims, &order_back(j, r))
        };
        dissipative += term;
        entropy_production += proj.norm_sq / tau_j;
        multipliers.extend(proj.coefficients.iter().map(|c| -c));
        dropped.extend(proj.dropped.iter().map(|d| j * per_subsystem + d));
    }

    Ok(GeneratorEvaluation {
        hamiltonian_term: ham,
        dissipative_term: HermitianOperator::new_unchecked(hermitize(&dissipative)),
        multipliers,
        entropy_production,
        dropped_constraints: dropped,
    })
}

/// Permutation mapping the ordering [j, 0, 1, .., ĵ, .., r-1] back to
/// [0, 1, .., r-1]: position of each original subsystem in the temporary
/// (j-first) order.
fn order_back(j: usize, r: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(r);
    for k in 0..r {
        if k == j {
            order.push(0);
        } else if k < j {
            order.push(k + 1);
        } else {
            order.push(k);
        }
    }
    order
}

/// Reorders the tensor factors of a matrix: `position[k]` is the index of
/// original subsystem k inside the current factor ordering of `m`.
fn reorder_subsystems(m: &CMatrix, current_dims: &[usize], position: &[usize]) -> CMatrix {
    let r = position.len();
    let full: usize = current_dims.iter().product();
    let target_dims: Vec<usize> = (0..r).map(|k| current_dims[position[k]]).collect();
    let st_cur = strides(current_dims);
    let st_tgt = strides(&target_dims);
    // target flat index -> current flat index
    let map = |mut idx: usize| -> usize {
        let mut digits = vec![0usize; r];
        for k in 0..r {
            digits[k] = idx / st_tgt[k];
            idx %= st_tgt[k];
        }
        let mut cur = 0;
        for k in 0..r {
            cur += digits[k] * st_cur[position[k]];
        }
        cur
    };
    let lookup: Vec<usize> = (0..full).map(map).collect();
    CMatrix::from_fn(full, full, |i, j| m[(lookup[i], lookup[j])])
}

impl Model for CompositeModel {
    fn dim(&self) -> usize {
        self.full_dim
    }

    fn hamiltonian(&self) -> &HermitianOperator {
        &self.observables[0]
    }

    fn conserved_observables(&self) -> &[HermitianOperator] {
        &self.observables
    }

    fn evaluate(&self, rho: &StateOperator) -> Result<GeneratorEvaluation> {
        composite_generator(rho, self)
    }
}

/// Outcome of the locality test: evolve a correlated A⊗B state under
/// variants of H_B and compare the reduced ρ_A trajectories.
#[derive(Debug, Clone)]
pub struct LocalityReport {
    /// Max over times and variant pairs of the trace distance between the
    /// ρ_A reductions.
    pub max_deviation: f64,
    pub pass: bool,
}

/// For non-interacting subsystems, everything observable on A must be
/// unaffected by any change of H_B. Runs one trajectory per H_B variant on
/// a shared sample grid and reports the worst-case deviation of ρ_A(t).
pub fn locality_check(
    base: &CompositeModel,
    rho_ab: &StateOperator,
    h_b_variants: &[HermitianOperator],
    t_final: f64,
    sample_dt: f64,
    config: &IntegratorConfig,
) -> Result<LocalityReport> {
    if base.subsystems() != 2 {
        return Err(SeaError::Config("locality check wants exactly A and B".into()));
    }
    if base.interaction.is_some() {
        return Err(SeaError::Config(
            "locality check requires non-interacting subsystems (V = 0)".into(),
        ));
    }
    if h_b_variants.len() < 2 {
        return Err(SeaError::Config("need at least two H_B variants".into()));
    }
    let mut cfg = config.clone();
    cfg.converge_early = false;
    let mut reductions: Vec<Vec<StateOperator>> = Vec::new();
    for h_b in h_b_variants {
        let model = base.with_local_hamiltonian(1, h_b.clone())?;
        let traj = evolve(rho_ab, &model, t_final, &cfg, SampleSpec::Every(sample_dt))?;
        let reduced: Vec<StateOperator> = traj
            .samples
            .iter()
            .map(|s| partial_trace(&s.state, base.dims(), &[0]))
            .collect::<Result<_>>()?;
        reductions.push(reduced);
    }
    let mut max_deviation: f64 = 0.0;
    for i in 0..reductions.len() {
        for j in (i + 1)..reductions.len() {
            for (a, b) in reductions[i].iter().zip(&reductions[j]) {
                max_deviation = max_deviation.max(a.trace_distance(b));
            }
        }
    }
    Ok(LocalityReport {
        max_deviation,
        pass: max_deviation < 1e-7,
    })
}

/// The reduced-dynamics right-hand side for subsystem A of a non-interacting
/// pair: -i[H_A, ρ_A] + (1/2τ_A){ΔM_A, ρ_A}, evaluated at the full ρ.
/// Along any trajectory this must equal the partial trace of the full
/// generator; the reduction-consistency tests enforce it.
pub fn reduced_rhs_a(rho: &StateOperator, model: &CompositeModel) -> Result<CMatrix> {
    if model.subsystems() != 2 || model.interaction.is_some() {
        return Err(SeaError::Config(
            "reduced dynamics applies to non-interacting A⊗B".into(),
        ));
    }
    let rho_a = partial_trace(rho, &model.dims, &[0])?;
    let ham = hamiltonian_term(&rho_a, &model.local_hamiltonians[0])?;
    let perception = local_perception(rho, model, 0)?;
    let mut constraints = vec![perception.hamiltonian_op.clone()];
    constraints.extend(perception.extra_ops.iter().cloned());
    let proj = orthogonal_component(&rho_a, &perception.entropy_op, &constraints)?;
    let tau = model.taus[0].evaluate(rho)?;
    let anti = proj.direction.matrix() * rho_a.matrix() + rho_a.matrix() * proj.direction.matrix();
    Ok(ham.matrix() + anti * Complex64::new(0.5 / tau, 0.0))
}

/// A Bell-diagonal two-qubit state from four probabilities (correlated but
/// separable-or-entangled depending on the weights).
pub fn bell_diagonal(probs: &[f64; 4]) -> Result<StateOperator> {
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || probs.iter().any(|&p| p < 0.0) {
        return Err(SeaError::NotAState(
            "bell_diagonal wants four nonnegative probabilities summing to 1".into(),
        ));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let kets: [[Complex64; 4]; 4] = [
        // (|00> + |11>)/√2, (|00> - |11>)/√2, (|01> + |10>)/√2, (|01> - |10>)/√2
        [
            Complex64::new(s, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(s, 0.0),
        ],
        [
            Complex64::new(s, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-s, 0.0),
        ],
        [
            Complex64::new(0.0, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(0.0, 0.0),
        ],
        [
            Complex64::new(0.0, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::new(0.0, 0.0),
        ],
    ];
    let mut m = CMatrix::zeros(4, 4);
    for (p, ket) in probs.iter().zip(&kets) {
        let v = nalgebra::DVector::from_column_slice(ket);
        m += (&v * v.adjoint()) * Complex64::new(*p, 0.0);
    }
    StateOperator::spectral_decompose(&HermitianOperator::new_unchecked(m), DEFAULT_ZERO_TOL)
}
