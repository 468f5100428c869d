//! Built-in invariant audit: conservation, entropy monotonicity, the group
//! roundtrip, formulation equivalence, and locality, run on seeded fixtures.
//!
//! The monotonicity check supports an injected sign error on the
//! dissipative term (a mutation fixture) so tests can verify the audit
//! actually catches a broken generator.

use num_complex::Complex64;
use sea_core::bloch::{bloch_to_density, BlochModel, BlochState};
use sea_core::composite::{bell_diagonal, locality_check, CompositeModel};
use sea_core::generator::{
    dissipative_degenerate_closed_form, dissipative_nondegenerate_closed_form,
    dissipative_term_determinant, dissipative_term_projection, ConservedSet,
};
use sea_core::operator::{hermitize, DEFAULT_ZERO_TOL};
use sea_core::propagator::{evolve, roundtrip_error, IntegratorConfig, SampleSpec};
use sea_core::testkit;
use sea_core::{HermitianOperator, StateOperator, SystemModel};

/// Fault injection for the audit's own self-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    None,
    /// Flip the sign of the dissipative term inside the monotonicity check.
    FlipDissipativeSign,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs every audit check; deterministic for a given seed.
pub fn run_audit(seed: u64, mutation: Mutation) -> Vec<CheckResult> {
    vec![
        check_conservation(seed),
        check_monotonicity(seed, mutation),
        check_group_roundtrip(),
        check_formulation_equivalence(seed),
        check_locality(seed),
    ]
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

fn check_conservation(seed: u64) -> CheckResult {
    let mut rng = testkit::rng(seed ^ 0x11);
    let mut worst: f64 = 0.0;
    let config = IntegratorConfig::default();
    for _ in 0..4 {
        let dim = 2 + testkit::index(&mut rng, 3);
        let h = testkit::random_hermitian(&mut rng, dim, 1.0);
        let n = testkit::random_commuting_observable(&mut rng, &h);
        let model = SystemModel::new(h, vec![n], sea_core::RelaxationSpec::Constant(1.0))
            .expect("audit model");
        let rho0 = testkit::random_state(&mut rng, dim);
        match evolve(&rho0, &model, 3.0, &config, SampleSpec::Every(0.5)) {
            Ok(traj) => {
                worst = worst
                    .max(traj.audit.max_trace_drift)
                    .max(traj.audit.max_energy_drift);
                for d in &traj.audit.max_extra_drift {
                    worst = worst.max(*d);
                }
            }
            Err(e) => {
                return CheckResult {
                    name: "conservation",
                    passed: false,
                    detail: format!("run failed: {e}"),
                }
            }
        }
    }
    CheckResult {
        name: "conservation",
        passed: worst < 1e-7,
        detail: format!("max trace/energy/charge drift {worst:.3e} (limit 1e-7)"),
    }
}

fn check_monotonicity(seed: u64, mutation: Mutation) -> CheckResult {
    let mut rng = testkit::rng(seed ^ 0x22);
    let mut min_increment = f64::INFINITY;
    for _ in 0..6 {
        let dim = 2 + testkit::index(&mut rng, 3);
        let h = testkit::random_hermitian(&mut rng, dim, 1.0);
        let set = ConservedSet::energy_only(h.clone());
        let mut rho = testkit::random_state(&mut rng, dim);
        let sign = match mutation {
            Mutation::None => 1.0,
            Mutation::FlipDissipativeSign => -1.0,
        };
        // small fixed RK4 steps with the (possibly mutated) generator
        let dt = 0.01;
        for _ in 0..50 {
            let rhs = |m: &sea_core::CMatrix| -> sea_core::CMatrix {
                let state = StateOperator::spectral_decompose(
                    &HermitianOperator::new(hermitize(m)).expect("hermitized"),
                    1e-9,
                )
                .expect("stage state");
                let eval = dissipative_term_projection(&state, &set, 1.0).expect("eval");
                eval.hamiltonian_term.matrix()
                    + eval.dissipative_term.matrix() * Complex64::new(sign, 0.0)
            };
            let m = rho.matrix();
            let k1 = rhs(m);
            let k2 = rhs(&(m + &k1 * Complex64::new(dt / 2.0, 0.0)));
            let k3 = rhs(&(m + &k2 * Complex64::new(dt / 2.0, 0.0)));
            let k4 = rhs(&(m + &k3 * Complex64::new(dt, 0.0)));
            let next = m
                + (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
                    * Complex64::new(dt / 6.0, 0.0);
            let next = StateOperator::spectral_decompose(
                &HermitianOperator::new(hermitize(&next)).expect("hermitized"),
                1e-9,
            )
            .expect("projected state");
            min_increment = min_increment.min(next.entropy() - rho.entropy());
            rho = next;
        }
    }
    CheckResult {
        name: "entropy-monotonicity",
        passed: min_increment >= -1e-9,
        detail: format!("min per-step entropy increment {min_increment:.3e} (limit -1e-9)"),
    }
}

fn check_group_roundtrip() -> CheckResult {
    let model = BlochModel::new(1.0, [0.0, 0.0, 1.0], 1.0)
        .expect("qubit model")
        .to_system_model();
    let rho0 = bloch_to_density(&BlochState::new([0.5, 0.0, 0.0]).expect("bloch"))
        .expect("density");
    let config = IntegratorConfig::default();
    match roundtrip_error(&rho0, &model, 1.0, &config) {
        Ok(report) => {
            let worst = report.roundtrip_error.max(report.composition_error);
            CheckResult {
                name: "group-roundtrip",
                passed: worst < 1e-6,
                detail: format!(
                    "roundtrip {:.3e}, composition {:.3e} (limit 1e-6)",
                    report.roundtrip_error, report.composition_error
                ),
            }
        }
        Err(e) => CheckResult {
            name: "group-roundtrip",
            passed: false,
            detail: format!("run failed: {e}"),
        },
    }
}

fn check_formulation_equivalence(seed: u64) -> CheckResult {
    let mut rng = testkit::rng(seed ^ 0x33);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let dim = 2 + testkit::index(&mut rng, 3);
        let rho = testkit::random_state(&mut rng, dim);
        let h = testkit::random_hermitian(&mut rng, dim, 1.0);
        let set = ConservedSet::energy_only(h.clone());
        let a = dissipative_term_projection(&rho, &set, 1.0).expect("projection");
        let b = dissipative_term_determinant(&rho, &set, 1.0).expect("determinant");
        worst = worst.max(a.dissipative_term.distance_max(&b.dissipative_term));
        let c = dissipative_nondegenerate_closed_form(&rho, &h, 1.0).expect("closed form");
        worst = worst.max(a.dissipative_term.distance_max(&c));
    }
    // degenerate closed form on a flat Hamiltonian
    let rho = StateOperator::spectral_decompose(
        &HermitianOperator::from_real_diagonal(&[0.25, 0.75]),
        DEFAULT_ZERO_TOL,
    )
    .expect("state");
    let set = ConservedSet::energy_only(HermitianOperator::identity(2).scale(2.0));
    let a = dissipative_term_projection(&rho, &set, 1.0).expect("projection");
    let d = dissipative_degenerate_closed_form(&rho, 1.0).expect("degenerate form");
    worst = worst.max(a.dissipative_term.distance_max(&d));
    CheckResult {
        name: "formulation-equivalence",
        passed: worst < 1e-8,
        detail: format!("max deviation across forms {worst:.3e} (limit 1e-8)"),
    }
}

fn check_locality(seed: u64) -> CheckResult {
    let mut rng = testkit::rng(seed ^ 0x44);
    let h = HermitianOperator::from_real_diagonal(&[0.0, 1.0]);
    let base = CompositeModel::with_uniform_tau(vec![2, 2], vec![h.clone(), h.clone()], None, 1.0)
        .expect("composite");
    let rho_ab = bell_diagonal(&[0.4, 0.3, 0.2, 0.1]).expect("bell diagonal");
    let u = testkit::random_unitary(&mut rng, 2);
    let variants = vec![h.clone(), h.conjugate_by(&u)];
    let config = IntegratorConfig::default();
    match locality_check(&base, &rho_ab, &variants, 5.0, 0.5, &config) {
        Ok(report) => CheckResult {
            name: "locality",
            passed: report.pass,
            detail: format!("max ρ_A deviation {:.3e} (limit 1e-7)", report.max_deviation),
        },
        Err(e) => CheckResult {
            name: "locality",
            passed: false,
            detail: format!("run failed: {e}"),
        },
    }
}
