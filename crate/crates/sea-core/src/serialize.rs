//! File formats: trajectory CSV and JSON, model description files, and
//! state snapshots. Complex matrices are written row-major as [re, im]
//! pairs; floats print with 17 significant digits in CSV so identical runs
//! produce byte-identical files, and JSON round-trips exactly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{bloch_to_density, BlochModel, BlochState};
use crate::composite::{bell_diagonal, CompositeModel};
use crate::error::{Result, SeaError};
use crate::generator::GeneratorEvaluation;
use crate::model::{Model, RelaxationSpec, SystemModel};
use crate::operator::{CMatrix, HermitianOperator, StateOperator, DEFAULT_ZERO_TOL};
use crate::propagator::{RunStatus, Trajectory};

/// Row-major complex matrix as nested [re, im] pairs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ComplexMatrix(pub Vec<Vec<[f64; 2]>>);

impl ComplexMatrix {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.0.len();
        if rows == 0 || self.0.iter().any(|r| r.len() != rows) {
            return Err(SeaError::Config("matrix must be square and nonempty".into()));
        }
        Ok(CMatrix::from_fn(rows, rows, |i, j| {
            Complex64::new(self.0[i][j][0], self.0[i][j][1])
        }))
    }

    pub fn to_hermitian(&self) -> Result<HermitianOperator> {
        HermitianOperator::new(self.to_matrix()?)
    }
}

/// On-disk model description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFile {
    Single {
        hamiltonian: ComplexMatrix,
        #[serde(default)]
        extra_conserved: Vec<ComplexMatrix>,
        tau: f64,
    },
    Composite {
        dims: Vec<usize>,
        local_hamiltonians: Vec<ComplexMatrix>,
        #[serde(default)]
        interaction: Option<ComplexMatrix>,
        taus: Vec<f64>,
        #[serde(default)]
        extra_conserved: Vec<ComplexMatrix>,
    },
    Qubit {
        omega: f64,
        axis: [f64; 3],
        tau: f64,
    },
}

/// A built model of either kind behind the common [`Model`] trait.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Single(SystemModel),
    Composite(CompositeModel),
}

impl Model for AnyModel {
    fn dim(&self) -> usize {
        match self {
            Self::Single(m) => m.dim(),
            Self::Composite(m) => m.dim(),
        }
    }

    fn hamiltonian(&self) -> &HermitianOperator {
        match self {
            Self::Single(m) => m.hamiltonian(),
            Self::Composite(m) => m.hamiltonian(),
        }
    }

    fn conserved_observables(&self) -> &[HermitianOperator] {
        match self {
            Self::Single(m) => m.conserved_observables(),
            Self::Composite(m) => m.conserved_observables(),
        }
    }

    fn evaluate(&self, rho: &StateOperator) -> Result<GeneratorEvaluation> {
        match self {
            Self::Single(m) => m.evaluate(rho),
            Self::Composite(m) => m.evaluate(rho),
        }
    }
}

impl AnyModel {
    /// A representative constant τ for time-scale heuristics (the first
    /// subsystem's, for composites); `None` for functional specs.
    pub fn constant_tau(&self) -> Option<f64> {
        let spec = match self {
            Self::Single(m) => m.relaxation(),
            Self::Composite(m) => &m.taus()[0],
        };
        match spec {
            RelaxationSpec::Constant(t) => Some(*t),
            RelaxationSpec::Functional(_) => None,
        }
    }
}

impl ModelFile {
    pub fn build(&self) -> Result<AnyModel> {
        match self {
            Self::Single {
                hamiltonian,
                extra_conserved,
                tau,
            } => {
                let h = hamiltonian.to_hermitian()?;
                let extras = extra_conserved
                    .iter()
                    .map(|m| m.to_hermitian())
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyModel::Single(SystemModel::new(
                    h,
                    extras,
                    RelaxationSpec::constant(*tau)?,
                )?))
            }
            Self::Composite {
                dims,
                local_hamiltonians,
                interaction,
                taus,
                extra_conserved,
            } => {
                let locals = local_hamiltonians
                    .iter()
                    .map(|m| m.to_hermitian())
                    .collect::<Result<Vec<_>>>()?;
                let v = interaction.as_ref().map(|m| m.to_hermitian()).transpose()?;
                let tau_specs = taus
                    .iter()
                    .map(|&t| RelaxationSpec::constant(t))
                    .collect::<Result<Vec<_>>>()?;
                let extras = extra_conserved
                    .iter()
                    .map(|m| m.to_hermitian())
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnyModel::Composite(CompositeModel::new(
                    dims.clone(),
                    locals,
                    v,
                    tau_specs,
                    extras,
                )?))
            }
            Self::Qubit { omega, axis, tau } => Ok(AnyModel::Single(
                BlochModel::new(*omega, *axis, *tau)?.to_system_model(),
            )),
        }
    }
}

/// Named initial-state constructors for config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "constructor", rename_all = "snake_case")]
pub enum InitialStateDef {
    Matrix { matrix: ComplexMatrix },
    Gibbs { beta: f64 },
    Pure { amplitudes: Vec<[f64; 2]> },
    Bloch { r: [f64; 3] },
    BellDiagonal { probs: [f64; 4] },
    MaximallyMixed,
}

impl InitialStateDef {
    pub fn build(&self, model: &AnyModel) -> Result<StateOperator> {
        let dim = model.dim();
        let state = match self {
            Self::Matrix { matrix } => {
                let m = matrix.to_hermitian()?;
                if m.dim() != dim {
                    return Err(SeaError::DimensionMismatch {
                        expected: dim,
                        got: m.dim(),
                    });
                }
                StateOperator::spectral_decompose(&m, DEFAULT_ZERO_TOL)?
            }
            Self::Gibbs { beta } => StateOperator::gibbs(model.hamiltonian(), *beta)?,
            Self::Pure { amplitudes } => {
                if amplitudes.len() != dim {
                    return Err(SeaError::DimensionMismatch {
                        expected: dim,
                        got: amplitudes.len(),
                    });
                }
                let amps: Vec<Complex64> =
                    amplitudes.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
                StateOperator::pure(&amps)?
            }
            Self::Bloch { r } => {
                if dim != 2 {
                    return Err(SeaError::Config(
                        "bloch constructor requires a 2-level model".into(),
                    ));
                }
                bloch_to_density(&BlochState::new(*r)?)?
            }
            Self::BellDiagonal { probs } => {
                if dim != 4 {
                    return Err(SeaError::Config(
                        "bell_diagonal constructor requires a 2x2 composite".into(),
                    ));
                }
                bell_diagonal(probs)?
            }
            Self::MaximallyMixed => StateOperator::maximally_mixed(dim),
        };
        Ok(state)
    }
}

/// 17-significant-digit float, fixed format for byte-identical output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Trajectory CSV: header then one row per sample with
/// t, eigenvalues, trace, energy, extra means, entropy, entropy production.
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let dim = traj.initial().state.dim();
    let n_extra = traj.initial().audits.extra_means.len();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..dim).map(|i| format!("lambda_{i}")));
    header.push("trace".into());
    header.push("energy".into());
    header.extend((0..n_extra).map(|k| format!("extra_mean_{k}")));
    header.push("entropy".into());
    header.push("entropy_production".into());
    let mut out = header.join(",");
    out.push('\n');
    for s in &traj.samples {
        let mut row: Vec<String> = vec![fmt_f64(s.t)];
        row.extend(s.audits.eigenvalues.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(s.audits.trace));
        row.push(fmt_f64(s.audits.energy));
        row.extend(s.audits.extra_means.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(s.audits.entropy));
        row.push(fmt_f64(s.audits.entropy_production));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleJson {
    pub t: f64,
    pub rho: ComplexMatrix,
    pub trace: f64,
    pub energy: f64,
    pub extra_means: Vec<f64>,
    pub entropy: f64,
    pub entropy_production: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryJson {
    pub status: String,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub max_trace_drift: f64,
    pub max_energy_drift: f64,
    pub max_extra_drift: Vec<f64>,
    pub min_entropy_increment: f64,
    pub kernel_dim_constant: bool,
    pub samples: Vec<SampleJson>,
}

pub fn status_name(status: RunStatus) -> &'static str {
    match status {
        RunStatus::ReachedFinalTime => "reached-final-time",
        RunStatus::Converged => "converged",
        RunStatus::BoundaryApproached => "boundary-approached",
    }
}

pub fn trajectory_to_json(traj: &Trajectory) -> TrajectoryJson {
    TrajectoryJson {
        status: status_name(traj.status).to_string(),
        steps_accepted: traj.audit.steps_accepted,
        steps_rejected: traj.audit.steps_rejected,
        max_trace_drift: traj.audit.max_trace_drift,
        max_energy_drift: traj.audit.max_energy_drift,
        max_extra_drift: traj.audit.max_extra_drift.clone(),
        min_entropy_increment: traj.audit.min_entropy_increment,
        kernel_dim_constant: traj.audit.kernel_dim_constant,
        samples: traj
            .samples
            .iter()
            .map(|s| SampleJson {
                t: s.t,
                rho: ComplexMatrix::from_matrix(s.state.matrix()),
                trace: s.audits.trace,
                energy: s.audits.energy,
                extra_means: s.audits.extra_means.clone(),
                entropy: s.audits.entropy,
                entropy_production: s.audits.entropy_production,
                eigenvalues: s.audits.eigenvalues.clone(),
            })
            .collect(),
    }
}

/// Onsager analysis report in serializable form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnsagerJson {
    pub basis: String,
    pub f0: f64,
    pub affinities: Vec<f64>,
    pub conductivity_matrix: Vec<Vec<f64>>,
    pub conductivity_max_asymmetry: f64,
    pub conductivity_min_eigenvalue: f64,
    pub entropy_production_gram: f64,
    pub entropy_production_affinity_form: f64,
    pub entropy_production_rate_form: f64,
    pub max_route_deviation: f64,
    pub rate_consistency_residual: f64,
    pub l_rank_deficient: bool,
}

pub fn onsager_to_json(report: &crate::onsager::OnsagerReport) -> OnsagerJson {
    let l = &report.conductivities;
    let k = l.dim();
    OnsagerJson {
        basis: report.basis_descriptor.clone(),
        f0: report.affinities.f0,
        affinities: report.affinities.f.clone(),
        conductivity_matrix: (0..k)
            .map(|i| (0..k).map(|j| l.entries[(i, j)]).collect())
            .collect(),
        conductivity_max_asymmetry: l.max_asymmetry(),
        conductivity_min_eigenvalue: l.min_eigenvalue(),
        entropy_production_gram: report.entropy_production_routes[0],
        entropy_production_affinity_form: report.entropy_production_routes[1],
        entropy_production_rate_form: report.entropy_production_routes[2],
        max_route_deviation: report.max_route_deviation,
        rate_consistency_residual: report.rate_consistency_residual,
        l_rank_deficient: report.l_rank_deficient,
    }
}

/// Reads a trajectory JSON document back into matrices (for round-trip
/// checks and downstream tooling).
pub fn trajectory_samples_from_json(doc: &TrajectoryJson) -> Result<Vec<(f64, DMatrix<Complex64>)>> {
    doc.samples
        .iter()
        .map(|s| Ok((s.t, s.rho.to_matrix()?)))
        .collect()
}
