//! Time integration of dρ/dt = -i[H,ρ] + D(ρ), forward and backward, with
//! invariant-preserving per-step spectral re-projection.
//!
//! The integration variable is ρ itself; after every accepted step the
//! matrix is re-Hermitized, spectrally clamped (with the kernel locked to
//! its initial cardinality), and renormalized. Step acceptance combines the
//! embedded-pair ODE error with an entropy guard: a step that moves entropy
//! the wrong way by more than 1e-9 is rejected regardless of its ODE error,
//! because the H-theorem is a hard contract rather than an accuracy target.

use num_complex::Complex64;

use crate::error::{Result, SeaError};
use crate::generator::{is_nondissipative, GeneratorEvaluation};
use crate::model::Model;
use crate::operator::{hermitize, max_abs, CMatrix, HermitianOperator, StateOperator};

/// Per-step tolerated entropy decrease in forward time (mirror for backward).
pub const ENTROPY_GUARD: f64 = 1e-9;
/// Entropy-production threshold for early convergence.
pub const CONVERGED_RATE: f64 = 1e-12;
/// Dissipative-norm threshold for early convergence.
pub const CONVERGED_NORM: f64 = 1e-10;
/// Smallest support eigenvalue before a backward run stops at the boundary.
pub const BOUNDARY_EIGENVALUE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMethod {
    Rk4Fixed,
    Rk45Adaptive,
}

/// Integrator settings. `kernel_lock` pins dim Ker ρ to its initial value by
/// projecting the locked eigenvalues back to exactly zero after each step.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub method: IntegrationMethod,
    pub dt_init: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub renormalize_every: usize,
    pub kernel_lock: bool,
    pub zero_tol: f64,
    /// Optional cap on the adaptive step size.
    pub dt_max: Option<f64>,
    /// Stop as soon as a nondissipative state (or limit cycle) is reached.
    pub converge_early: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: IntegrationMethod::Rk45Adaptive,
            dt_init: 1e-2,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_steps: 1_000_000,
            renormalize_every: 1,
            kernel_lock: true,
            zero_tol: crate::operator::DEFAULT_ZERO_TOL,
            dt_max: None,
            converge_early: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.dt_init, self.rel_tol, self.abs_tol].iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(SeaError::Config(
                "dt_init, rel_tol and abs_tol must be positive".into(),
            ));
        }
        if self.renormalize_every == 0 {
            return Err(SeaError::Config("renormalize_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// How densely `evolve` records samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSpec {
    /// Record every accepted step.
    EveryStep,
    /// Record at integer multiples of the interval (exact landing).
    Every(f64),
}

/// Scalar audits stored with every trajectory sample.
#[derive(Debug, Clone)]
pub struct Audits {
    pub trace: f64,
    pub energy: f64,
    pub extra_means: Vec<f64>,
    pub entropy: f64,
    pub entropy_production: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: StateOperator,
    pub audits: Audits,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Integrated all the way to t_final.
    ReachedFinalTime,
    /// Entropy production and the dissipative term both vanished: the state
    /// reached a nondissipative state or limit cycle.
    Converged,
    /// A backward run approached the zero-entropy boundary (smallest support
    /// eigenvalue below [`BOUNDARY_EIGENVALUE`]).
    BoundaryApproached,
}

/// Whole-run conservation and monotonicity bookkeeping.
#[derive(Debug, Clone)]
pub struct RunAuditSummary {
    /// Max |Tr - 1| of the raw step results before renormalization.
    pub max_trace_drift: f64,
    /// Max |⟨H⟩(t) - ⟨H⟩(0)| / (1 + |⟨H⟩(0)|).
    pub max_energy_drift: f64,
    /// Same for each extra conserved observable.
    pub max_extra_drift: Vec<f64>,
    /// Most negative direction-adjusted entropy increment over accepted
    /// steps (≥ -1e-9 by the guard).
    pub min_entropy_increment: f64,
    /// dim Ker ρ stayed constant across the run.
    pub kernel_dim_constant: bool,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub status: RunStatus,
    pub audit: RunAuditSummary,
}

impl Trajectory {
    pub fn initial(&self) -> &TrajectorySample {
        self.samples.first().expect("trajectory has samples")
    }

    pub fn final_sample(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has samples")
    }

    pub fn final_state(&self) -> &StateOperator {
        &self.final_sample().state
    }
}

fn audits_for<M: Model + ?Sized>(
    state: &StateOperator,
    model: &M,
    eval: &GeneratorEvaluation,
) -> Audits {
    let observables = model.conserved_observables();
    let energy = state.expectation(&observables[0]);
    let extra_means = observables[1..]
        .iter()
        .map(|n| state.expectation(n))
        .collect();
    Audits {
        trace: state.operator().trace(),
        energy,
        extra_means,
        entropy: state.entropy(),
        entropy_production: eval.entropy_production,
        eigenvalues: state.eigenvalues().to_vec(),
    }
}

/// RHS evaluation from a raw (possibly slightly off-manifold) matrix.
fn rhs_raw<M: Model + ?Sized>(m: &CMatrix, model: &M, zero_tol: f64) -> Result<CMatrix> {
    let state = StateOperator::from_matrix_relaxed(m, zero_tol, 1e-6)?;
    Ok(model.evaluate(&state)?.total())
}

/// Classic RK4 stage combination.
fn rk4_step<M: Model + ?Sized>(
    m: &CMatrix,
    model: &M,
    dt: f64,
    zero_tol: f64,
) -> Result<CMatrix> {
    let half = Complex64::new(dt / 2.0, 0.0);
    let full = Complex64::new(dt, 0.0);
    let k1 = rhs_raw(m, model, zero_tol)?;
    let k2 = rhs_raw(&(m + &k1 * half), model, zero_tol)?;
    let k3 = rhs_raw(&(m + &k2 * half), model, zero_tol)?;
    let k4 = rhs_raw(&(m + &k3 * full), model, zero_tol)?;
    let sixth = Complex64::new(dt / 6.0, 0.0);
    let two = Complex64::new(2.0, 0.0);
    Ok(m + (k1 + k2 * two + k3 * two + k4) * sixth)
}

/// Dormand-Prince 5(4) embedded pair: returns the 5th-order result and the
/// elementwise difference to the 4th-order one.
fn rk45_step<M: Model + ?Sized>(
    m: &CMatrix,
    model: &M,
    dt: f64,
    zero_tol: f64,
) -> Result<(CMatrix, CMatrix)> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut k: Vec<CMatrix> = Vec::with_capacity(7);
    k.push(rhs_raw(m, model, zero_tol)?);
    for (s, row) in A.iter().enumerate() {
        let mut stage = m.clone();
        for (j, &a) in row.iter().enumerate().take(s + 1) {
            if a != 0.0 {
                stage += &k[j] * Complex64::new(dt * a, 0.0);
            }
        }
        k.push(rhs_raw(&stage, model, zero_tol)?);
    }
    let mut y5 = m.clone();
    let mut err = CMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..7 {
        if B5[j] != 0.0 {
            y5 += &k[j] * Complex64::new(dt * B5[j], 0.0);
        }
        let db = B5[j] - B4[j];
        if db != 0.0 {
            err += &k[j] * Complex64::new(dt * db, 0.0);
        }
    }
    Ok((y5, err))
}

/// Projects a raw step result back onto the state manifold, locking the
/// kernel cardinality when requested.
fn project_step(
    raw: &CMatrix,
    locked_kernel: Option<usize>,
    zero_tol: f64,
    renormalize: bool,
) -> Result<StateOperator> {
    let h = hermitize(raw);
    let eig = nalgebra::linalg::SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    if let Some(k) = locked_kernel {
        for v in values.iter().skip(n - k) {
            if v.abs() > 1e-6 {
                return Err(SeaError::KernelViolation { eigenvalue: *v });
            }
        }
        for v in values.iter_mut().skip(n - k) {
            *v = 0.0;
        }
        for v in values.iter().take(n - k) {
            if *v < -zero_tol {
                return Err(SeaError::KernelViolation { eigenvalue: *v });
            }
        }
        for v in values.iter_mut().take(n - k) {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    } else if let Some(&bad) = values.iter().find(|&&v| v < -zero_tol) {
        return Err(SeaError::KernelViolation { eigenvalue: bad });
    }
    StateOperator::from_spectrum_opts(values, vectors, zero_tol, renormalize)
}

/// One integrator step of signed size `dt` (the sign selects the time
/// direction), with re-Hermitization, spectral clamping, and kernel lock.
pub fn step<M: Model + ?Sized>(
    rho: &StateOperator,
    model: &M,
    dt: f64,
) -> Result<StateOperator> {
    if dt == 0.0 {
        return Err(SeaError::DomainError("step size must be nonzero".into()));
    }
    let config = IntegratorConfig::default();
    let raw = rk4_step(rho.matrix(), model, dt, config.zero_tol)?;
    project_step(&raw, Some(rho.kernel_dim()), config.zero_tol, true)
}

struct StepOutcome {
    state: StateOperator,
    raw_trace: f64,
    error_ratio: f64,
}

fn attempt_step<M: Model + ?Sized>(
    current: &StateOperator,
    model: &M,
    dt: f64,
    config: &IntegratorConfig,
    locked_kernel: Option<usize>,
    renormalize: bool,
) -> Result<StepOutcome> {
    let (raw, error_ratio) = match config.method {
        IntegrationMethod::Rk4Fixed => (rk4_step(current.matrix(), model, dt, config.zero_tol)?, 0.0),
        IntegrationMethod::Rk45Adaptive => {
            let (y5, err) = rk45_step(current.matrix(), model, dt, config.zero_tol)?;
            let mut ratio = 0.0_f64;
            for (e, y) in err.iter().zip(y5.iter()) {
                let scale = config.abs_tol + config.rel_tol * y.norm().max(1.0);
                ratio = ratio.max(e.norm() / scale);
            }
            (y5, ratio)
        }
    };
    let raw_trace = raw.trace().re;
    let state = project_step(&raw, locked_kernel, config.zero_tol, renormalize)?;
    Ok(StepOutcome {
        state,
        raw_trace,
        error_ratio,
    })
}

/// Integrates from ρ(0) to t_final (sign = direction). The trajectory
/// records samples per `sample`, always including the initial state and the
/// final accepted state. Terminates early with `Converged` when the
/// dissipative motion dies out, or `BoundaryApproached` when a backward run
/// reaches the zero-entropy boundary.
pub fn evolve<M: Model + ?Sized>(
    rho0: &StateOperator,
    model: &M,
    t_final: f64,
    config: &IntegratorConfig,
    sample: SampleSpec,
) -> Result<Trajectory> {
    config.validate()?;
    if t_final == 0.0 {
        return Err(SeaError::DomainError("t_final must be nonzero".into()));
    }
    if let SampleSpec::Every(s) = sample {
        if !s.is_finite() || s <= 0.0 {
            return Err(SeaError::Config("sample interval must be positive".into()));
        }
    }
    let direction = t_final.signum();
    let locked_kernel = config.kernel_lock.then(|| rho0.kernel_dim());
    let kernel_dim0 = rho0.kernel_dim();

    let mut state = rho0.clone();
    let mut eval = model.evaluate(&state)?;
    let observables = model.conserved_observables();
    let energy0 = state.expectation(&observables[0]);
    let extras0: Vec<f64> = observables[1..]
        .iter()
        .map(|n| state.expectation(n))
        .collect();

    let mut audit = RunAuditSummary {
        max_trace_drift: 0.0,
        max_energy_drift: 0.0,
        max_extra_drift: vec![0.0; extras0.len()],
        min_entropy_increment: f64::INFINITY,
        kernel_dim_constant: true,
        steps_accepted: 0,
        steps_rejected: 0,
    };

    let mut samples = vec![TrajectorySample {
        t: 0.0,
        state: state.clone(),
        audits: audits_for(&state, model, &eval),
    }];

    let mut t = 0.0_f64;
    let mut dt = config.dt_init.min(t_final.abs()) * direction;
    let dt_min = (t_final.abs() * 1e-12).max(1e-14);
    let mut next_sample = match sample {
        SampleSpec::EveryStep => None,
        SampleSpec::Every(s) => Some(s),
    };

    let status = loop {
        if (t_final - t).abs() < 1e-12 * t_final.abs().max(1.0) {
            break RunStatus::ReachedFinalTime;
        }
        if audit.steps_accepted + audit.steps_rejected >= config.max_steps {
            return Err(SeaError::MaxStepsExceeded {
                max: config.max_steps,
            });
        }

        // clamp to the next sample boundary and to t_final (exact landing)
        let mut dt_try = dt;
        if let Some(cap) = config.dt_max {
            if dt_try.abs() > cap {
                dt_try = cap * direction;
            }
        }
        if let Some(ns) = next_sample {
            let target = ns * direction;
            if (t + dt_try - target) * direction > 0.0 {
                dt_try = target - t;
            }
        }
        if (t + dt_try - t_final) * direction > 0.0 {
            dt_try = t_final - t;
        }

        let renorm = (audit.steps_accepted + 1).is_multiple_of(config.renormalize_every);
        let outcome = attempt_step(&state, model, dt_try, config, locked_kernel, renorm);
        let accepted = match outcome {
            Ok(o) => {
                let ds = (o.state.entropy() - state.entropy()) * direction;
                if o.error_ratio > 1.0 || ds < -ENTROPY_GUARD {
                    audit.steps_rejected += 1;
                    log::debug!(
                        "rejected step at t = {t} (dt = {dt_try:.3e}): error ratio {:.3e}, ds = {ds:.3e}",
                        o.error_ratio
                    );
                    let shrink = if o.error_ratio > 1.0 {
                        (0.9 * o.error_ratio.powf(-0.2)).max(0.2)
                    } else {
                        0.5
                    };
                    dt = dt_try * shrink;
                    if dt.abs() < dt_min {
                        if direction < 0.0 {
                            break RunStatus::BoundaryApproached;
                        }
                        return Err(SeaError::NumericalFailure(format!(
                            "step size underflow at t = {t}"
                        )));
                    }
                    continue;
                }
                Some((o, ds))
            }
            Err(SeaError::KernelViolation { .. }) if dt_try.abs() > dt_min * 2.0 => {
                audit.steps_rejected += 1;
                dt = dt_try * 0.5;
                None
            }
            Err(e) => return Err(e),
        };
        let Some((outcome, ds)) = accepted else {
            continue;
        };

        t += dt_try;
        state = outcome.state;
        eval = model.evaluate(&state)?;
        audit.steps_accepted += 1;
        audit.max_trace_drift = audit.max_trace_drift.max((outcome.raw_trace - 1.0).abs());
        let energy = state.expectation(&observables[0]);
        audit.max_energy_drift = audit
            .max_energy_drift
            .max((energy - energy0).abs() / (1.0 + energy0.abs()));
        for (k, n) in observables[1..].iter().enumerate() {
            let m = state.expectation(n);
            audit.max_extra_drift[k] = audit.max_extra_drift[k]
                .max((m - extras0[k]).abs() / (1.0 + extras0[k].abs()));
        }
        audit.min_entropy_increment = audit.min_entropy_increment.min(ds);
        if state.kernel_dim() != kernel_dim0 {
            audit.kernel_dim_constant = false;
        }

        // grow the step for the next attempt
        if config.method == IntegrationMethod::Rk45Adaptive {
            let grow = if outcome.error_ratio > 1e-12 {
                (0.9 * outcome.error_ratio.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            dt = (dt_try * grow).abs().max(dt_min) * direction;
        } else {
            dt = config.dt_init * direction;
        }

        let on_boundary = match next_sample {
            Some(ns) => (t.abs() - ns).abs() < 1e-12 * ns.max(1.0),
            None => true,
        };
        if on_boundary {
            samples.push(TrajectorySample {
                t,
                state: state.clone(),
                audits: audits_for(&state, model, &eval),
            });
            if let Some(ns) = next_sample {
                next_sample = Some(ns + match sample {
                    SampleSpec::Every(s) => s,
                    SampleSpec::EveryStep => unreachable!(),
                });
            }
        }

        if config.converge_early
            && eval.entropy_production < CONVERGED_RATE
            && max_abs(eval.dissipative_term.matrix()) < CONVERGED_NORM
        {
            log::info!("dissipative motion died out at t = {t}; stopping early");
            break RunStatus::Converged;
        }
        if direction < 0.0 {
            let min_support = state
                .eigenvalues()
                .iter()
                .zip(state.kernel_mask())
                .filter(|(_, &k)| !k)
                .map(|(&v, _)| v)
                .fold(f64::INFINITY, f64::min);
            if min_support < BOUNDARY_EIGENVALUE {
                log::info!("smallest support eigenvalue reached the boundary at t = {t}");
                break RunStatus::BoundaryApproached;
            }
        }
    };

    if samples.last().map(|s| s.t) != Some(t) {
        samples.push(TrajectorySample {
            t,
            state: state.clone(),
            audits: audits_for(&state, model, &eval),
        });
    }
    if audit.min_entropy_increment == f64::INFINITY {
        audit.min_entropy_increment = 0.0;
    }
    Ok(Trajectory {
        samples,
        status,
        audit,
    })
}

/// Group-property probe: forward T then backward T, plus the composition
/// Λ_{T/2}∘Λ_{T/2} against Λ_T.
#[derive(Debug, Clone)]
pub struct RoundtripReport {
    /// ‖Λ_{-T} Λ_T ρ₀ - ρ₀‖_max.
    pub roundtrip_error: f64,
    /// ‖Λ_{T/2} Λ_{T/2} ρ₀ - Λ_T ρ₀‖_max.
    pub composition_error: f64,
}

pub fn roundtrip_error<M: Model + ?Sized>(
    rho0: &StateOperator,
    model: &M,
    t: f64,
    config: &IntegratorConfig,
) -> Result<RoundtripReport> {
    if t < 0.0 {
        return Err(SeaError::DomainError("roundtrip time must be >= 0".into()));
    }
    if t == 0.0 {
        return Ok(RoundtripReport {
            roundtrip_error: 0.0,
            composition_error: 0.0,
        });
    }
    let mut cfg = config.clone();
    cfg.converge_early = false;
    let fwd = evolve(rho0, model, t, &cfg, SampleSpec::EveryStep)?;
    let back = evolve(fwd.final_state(), model, -t, &cfg, SampleSpec::EveryStep)?;
    let roundtrip = max_abs(&(back.final_state().matrix() - rho0.matrix()));

    let half1 = evolve(rho0, model, t / 2.0, &cfg, SampleSpec::EveryStep)?;
    let half2 = evolve(half1.final_state(), model, t / 2.0, &cfg, SampleSpec::EveryStep)?;
    let composition = max_abs(&(half2.final_state().matrix() - fwd.final_state().matrix()));
    Ok(RoundtripReport {
        roundtrip_error: roundtrip,
        composition_error: composition,
    })
}

/// A fitted canonical (grand-canonical) equilibrium state.
#[derive(Debug, Clone)]
pub struct EquilibriumFit {
    pub state: StateOperator,
    pub beta: f64,
    /// One ν per extra conserved observable (ρ ∝ exp[-βH + Σ ν_k N_k]).
    pub nus: Vec<f64>,
}

const BETA_BRACKET: f64 = 700.0;

fn exp_state(
    h: &HermitianOperator,
    beta: f64,
    extras: &[HermitianOperator],
    nus: &[f64],
) -> Result<StateOperator> {
    let mut a = h.scale(-beta);
    for (n, &nu) in extras.iter().zip(nus) {
        a = a.add(&n.scale(nu));
    }
    StateOperator::exp_family(&a)
}

/// Solves ⟨H⟩ = energy_mean (and ⟨N_k⟩ = extra_means) for β (and ν) by
/// safeguarded bisection; ⟨H⟩(β) is monotone decreasing at fixed ν.
pub fn find_equilibrium(
    h: &HermitianOperator,
    extras: &[HermitianOperator],
    energy_mean: f64,
    extra_means: &[f64],
) -> Result<EquilibriumFit> {
    if extras.len() != extra_means.len() {
        return Err(SeaError::Config(
            "one target mean per extra observable".into(),
        ));
    }
    let mut nus = vec![0.0; extras.len()];
    if extras.is_empty() {
        let beta = solve_beta(h, extras, &nus, energy_mean)?;
        return Ok(EquilibriumFit {
            state: exp_state(h, beta, extras, &nus)?,
            beta,
            nus,
        });
    }
    // coordinate iteration: alternate the β solve with per-ν bisections
    for round in 0..200 {
        let mut worst: f64 = 0.0;
        for k in 0..extras.len() {
            let target = extra_means[k];
            let eval = |nu: f64, nus: &mut Vec<f64>| -> Result<f64> {
                nus[k] = nu;
                let b = solve_beta(h, extras, nus, energy_mean)?;
                let st = exp_state(h, b, extras, nus)?;
                Ok(st.expectation(&extras[k]) - target)
            };
            let (mut lo, mut hi) = (-BETA_BRACKET, BETA_BRACKET);
            let flo = eval(lo, &mut nus)?;
            let fhi = eval(hi, &mut nus)?;
            if flo.abs() < 1e-12 {
                nus[k] = lo;
                continue;
            }
            if fhi.abs() < 1e-12 {
                nus[k] = hi;
                continue;
            }
            if flo.signum() == fhi.signum() {
                return Err(SeaError::Infeasible(format!(
                    "target mean {target} for extra observable {k} is unattainable"
                )));
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = eval(mid, &mut nus)?;
                if fm.abs() < 1e-13 {
                    break;
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            nus[k] = 0.5 * (lo + hi);
            let st = exp_state(h, solve_beta(h, extras, &nus, energy_mean)?, extras, &nus)?;
            worst = worst.max((st.expectation(&extras[k]) - target).abs());
        }
        let beta = solve_beta(h, extras, &nus, energy_mean)?;
        let st = exp_state(h, beta, extras, &nus)?;
        let e_err = (st.expectation(h) - energy_mean).abs();
        if worst < 1e-10 && e_err < 1e-10 {
            return Ok(EquilibriumFit {
                state: st,
                beta,
                nus,
            });
        }
        if round == 199 {
            return Err(SeaError::NumericalFailure(
                "grand-canonical fit did not converge".into(),
            ));
        }
    }
    unreachable!()
}

fn solve_beta(
    h: &HermitianOperator,
    extras: &[HermitianOperator],
    nus: &[f64],
    target: f64,
) -> Result<f64> {
    let f = |beta: f64| -> Result<f64> {
        Ok(exp_state(h, beta, extras, nus)?.expectation(h) - target)
    };
    // degenerate H: every β gives the same mean
    let probe0 = f(0.0)?;
    let (mut lo, mut hi) = (-BETA_BRACKET, BETA_BRACKET);
    let fhi = f(hi)?; // coldest: smallest ⟨H⟩
    let flo = f(lo)?; // hottest-negative: largest ⟨H⟩
    if probe0.abs() < 1e-12 && (flo - probe0).abs() < 1e-12 && (fhi - probe0).abs() < 1e-12 {
        return Ok(0.0);
    }
    if fhi > 0.0 || flo < 0.0 {
        return Err(SeaError::Infeasible(format!(
            "target energy mean {target} outside the attainable range"
        )));
    }
    // ⟨H⟩(β) decreasing: f(lo) ≥ 0 ≥ f(hi)
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.abs() < 1e-14 {
            return Ok(mid);
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Result of populating a kernel eigenvalue of a nondissipative state.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub perturbed_initial: StateOperator,
    pub final_state: StateOperator,
    pub initial_entropy: f64,
    pub final_entropy: f64,
    /// Trace distance between the final state and the unperturbed input.
    pub distance_from_unperturbed: f64,
    pub status: RunStatus,
}

/// Populates one kernel eigenvalue of `rho` by ε (compensating on the
/// support so trace and mean energy are preserved), evolves forward, and
/// reports where the state went. Rank-deficient nondissipative states are
/// unstable: the expected outcome is departure to the higher-entropy
/// canonical state on the enlarged support.
pub fn stability_probe<M: Model + ?Sized>(
    rho: &StateOperator,
    model: &M,
    epsilon: f64,
    t_final: f64,
    config: &IntegratorConfig,
) -> Result<StabilityReport> {
    if !(0.0..=1e-3).contains(&epsilon) {
        return Err(SeaError::DomainError(
            "perturbation must lie in [0, 1e-3]".into(),
        ));
    }
    let n = rho.dim();
    let kernel_slot = rho
        .kernel_mask()
        .iter()
        .position(|&k| k)
        .ok_or_else(|| SeaError::DomainError("state has a trivial kernel".into()))?;

    let h = model.hamiltonian();
    let u = rho.eigenvectors();
    let site_energy: Vec<f64> = (0..n)
        .map(|i| {
            let col = u.column(i);
            (col.adjoint() * h.matrix() * col)[(0, 0)].re
        })
        .collect();

    let mut values = rho.eigenvalues().to_vec();
    let support: Vec<usize> = (0..n).filter(|&i| !rho.kernel_mask()[i]).collect();

    if epsilon > 0.0 {
        // minimal-norm support adjustment δ with Σδ = -ε, Σδe = -ε e_k
        let m = support.len();
        let mut a = nalgebra::DMatrix::<f64>::zeros(2, m);
        for (j, &i) in support.iter().enumerate() {
            a[(0, j)] = 1.0;
            a[(1, j)] = site_energy[i];
        }
        let rhs = nalgebra::DVector::from_vec(vec![-epsilon, -epsilon * site_energy[kernel_slot]]);
        let aat = &a * a.transpose();
        let sol = aat.clone().lu().solve(&rhs).ok_or_else(|| {
            SeaError::Infeasible(
                "support cannot compensate the perturbation at fixed energy".into(),
            )
        })?;
        let delta = a.transpose() * sol;
        for (j, &i) in support.iter().enumerate() {
            values[i] += delta[j];
            if values[i] < 0.0 {
                return Err(SeaError::Infeasible(
                    "perturbation drove a support eigenvalue negative".into(),
                ));
            }
        }
        values[kernel_slot] = epsilon;
    }

    let perturbed = StateOperator::from_spectrum_opts(
        values,
        rho.eigenvectors().clone(),
        config.zero_tol,
        true,
    )?;
    let traj = evolve(&perturbed, model, t_final, config, SampleSpec::EveryStep)?;
    let final_state = traj.final_state().clone();
    Ok(StabilityReport {
        initial_entropy: perturbed.entropy(),
        final_entropy: final_state.entropy(),
        distance_from_unperturbed: final_state.trace_distance(rho),
        perturbed_initial: perturbed,
        final_state,
        status: traj.status,
    })
}

/// Convenience classification of a finished run for reporting.
pub fn classify_final<M: Model + ?Sized>(
    trajectory: &Trajectory,
    model: &M,
) -> Result<&'static str> {
    Ok(match trajectory.status {
        RunStatus::BoundaryApproached => "boundary-approached",
        RunStatus::ReachedFinalTime => "reached-final-time",
        RunStatus::Converged => {
            let set = crate::generator::ConservedSet::raw(model.conserved_observables().to_vec());
            let rep = is_nondissipative(trajectory.final_state(), &set)?;
            match rep.class {
                crate::generator::StationaryClass::Equilibrium => "converged-to-equilibrium",
                crate::generator::StationaryClass::LimitCycle => "limit-cycle",
            }
        }
    })
}
