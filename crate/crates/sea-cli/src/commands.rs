//! The five subcommands: simulate, equilibrium, onsager, audit, qubit-demo.

use std::path::{Path, PathBuf};

use sea_core::bloch::{density_to_bloch, BlochModel, BlochState};
use sea_core::generator::ConservedSet;
use sea_core::onsager::{onsager_report, ObservableBasis};
use sea_core::propagator::{
    classify_final, evolve, find_equilibrium, roundtrip_error, stability_probe, IntegratorConfig,
    SampleSpec, Trajectory,
};
use sea_core::serialize::{
    fmt_f64, onsager_to_json, status_name, trajectory_to_csv, trajectory_to_json, ComplexMatrix,
};
use sea_core::Model;

use crate::audit::{all_passed, run_audit, Mutation};
use crate::config::{build_model_and_state, EquilibriumConfig, OnsagerConfig, RunConfig};
use crate::{exit_codes, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "both" => Ok(Self::Both),
            other => Err(CliError::config(format!(
                "unknown format '{other}' (csv | json | both)"
            ))),
        }
    }

    fn wants_csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }

    fn wants_json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}

fn print_audit_block(traj: &Trajectory, classification: &str) {
    println!("-- audit --");
    println!("status                 {}", status_name(traj.status));
    println!("classification         {classification}");
    println!("steps accepted         {}", traj.audit.steps_accepted);
    println!("steps rejected         {}", traj.audit.steps_rejected);
    println!("max |Tr-1| drift       {:.3e}", traj.audit.max_trace_drift);
    println!("max energy drift       {:.3e}", traj.audit.max_energy_drift);
    for (k, d) in traj.audit.max_extra_drift.iter().enumerate() {
        println!("max charge {k} drift     {d:.3e}");
    }
    println!(
        "min entropy increment  {:.3e}",
        traj.audit.min_entropy_increment
    );
    println!(
        "kernel dim constant    {}",
        traj.audit.kernel_dim_constant
    );
    println!(
        "final entropy          {:.12}",
        traj.final_sample().audits.entropy
    );
}

/// `sea simulate --config run.json`
pub fn cmd_simulate(
    config_path: &Path,
    out_dir: &Path,
    format: OutputFormat,
) -> CliResult<()> {
    let config: RunConfig = crate::config::read_json(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let (model, rho0) = build_model_and_state(&config.model, &config.initial_state, base)?;
    if config.time.t_final == 0.0 || config.time.sample_every <= 0.0 {
        return Err(CliError::config(
            "time.t_final must be nonzero and time.sample_every positive",
        ));
    }
    let integrator = config.integrator.build()?;

    let traj = evolve(
        &rho0,
        &model,
        config.time.t_final,
        &integrator,
        SampleSpec::Every(config.time.sample_every),
    )
    .map_err(CliError::runtime)?;
    let classification = classify_final(&traj, &model).map_err(CliError::runtime)?;

    if format.wants_csv() {
        let name = config
            .outputs
            .trajectory_csv
            .clone()
            .unwrap_or_else(|| "trajectory.csv".into());
        write_file(&out_dir.join(name), &trajectory_to_csv(&traj))?;
    }
    if format.wants_json() {
        let name = config
            .outputs
            .trajectory_json
            .clone()
            .unwrap_or_else(|| "trajectory.json".into());
        let doc = trajectory_to_json(&traj);
        let text = serde_json::to_string_pretty(&doc).map_err(CliError::config)?;
        write_file(&out_dir.join(name), &text)?;
    }

    if config.analyses.roundtrip {
        let report = roundtrip_error(&rho0, &model, config.time.t_final.abs(), &integrator)
            .map_err(CliError::runtime)?;
        let doc = serde_json::json!({
            "roundtrip_error": report.roundtrip_error,
            "composition_error": report.composition_error,
        });
        write_file(
            &out_dir.join("roundtrip.json"),
            &serde_json::to_string_pretty(&doc).map_err(CliError::config)?,
        )?;
        println!(
            "roundtrip error {:.3e}, composition error {:.3e}",
            report.roundtrip_error, report.composition_error
        );
    }
    if config.analyses.onsager {
        let tau = model.constant_tau().unwrap_or(1.0);
        let basis = ObservableBasis::default_basis(&rho0);
        let constraints = ConservedSet::with_extras(
            model.hamiltonian().clone(),
            model.conserved_observables()[1..].to_vec(),
        )
        .map_err(CliError::runtime)?;
        let report =
            onsager_report(&rho0, &basis, &constraints, tau).map_err(CliError::runtime)?;
        let text = serde_json::to_string_pretty(&onsager_to_json(&report))
            .map_err(CliError::config)?;
        write_file(&out_dir.join("onsager.json"), &text)?;
    }
    if config.analyses.stability_probe {
        let report = stability_probe(&rho0, &model, 1e-4, 50.0, &integrator)
            .map_err(CliError::runtime)?;
        let doc = serde_json::json!({
            "initial_entropy": report.initial_entropy,
            "final_entropy": report.final_entropy,
            "distance_from_unperturbed": report.distance_from_unperturbed,
            "status": status_name(report.status),
        });
        write_file(
            &out_dir.join("stability.json"),
            &serde_json::to_string_pretty(&doc).map_err(CliError::config)?,
        )?;
    }

    print_audit_block(&traj, classification);
    Ok(())
}

/// `sea equilibrium --config eq.json`
pub fn cmd_equilibrium(config_path: &Path, out_dir: &Path) -> CliResult<()> {
    let config: EquilibriumConfig = crate::config::read_json(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let model = config.model.load(base)?;
    let extras = model.conserved_observables()[1..].to_vec();
    if extras.len() != config.extra_means.len() {
        return Err(CliError::config(format!(
            "model has {} extra conserved observables but {} extra_means were given",
            extras.len(),
            config.extra_means.len()
        )));
    }
    let fit = find_equilibrium(
        model.hamiltonian(),
        &extras,
        config.energy_mean,
        &config.extra_means,
    )
    .map_err(CliError::runtime)?;

    // verify stationarity with a short run
    let integrator = IntegratorConfig::default();
    let traj = evolve(&fit.state, &model, 1.0, &integrator, SampleSpec::Every(1.0))
        .map_err(CliError::runtime)?;
    let drift = traj.final_state().trace_distance(&fit.state);

    let doc = serde_json::json!({
        "beta": fit.beta,
        "nus": fit.nus,
        "energy_mean": fit.state.expectation(model.hamiltonian()),
        "entropy": fit.state.entropy(),
        "stationarity_drift": drift,
        "rho": ComplexMatrix::from_matrix(fit.state.matrix()),
    });
    write_file(
        &out_dir.join("equilibrium.json"),
        &serde_json::to_string_pretty(&doc).map_err(CliError::config)?,
    )?;
    println!(
        "beta {}  nus {:?}  stationarity drift {:.3e}",
        fmt_f64(fit.beta),
        fit.nus,
        drift
    );
    if drift > 1e-6 {
        return Err(CliError {
            code: exit_codes::NUMERICAL_ERROR,
            message: format!("fitted state is not stationary (drift {drift:.3e})"),
        });
    }
    Ok(())
}

/// `sea onsager --config onsager.json`
pub fn cmd_onsager(config_path: &Path, out_dir: &Path) -> CliResult<()> {
    let config: OnsagerConfig = crate::config::read_json(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let (model, rho) = build_model_and_state(&config.model, &config.state, base)?;
    let tau = config
        .tau
        .or_else(|| model.constant_tau())
        .unwrap_or(1.0);
    if !tau.is_finite() || tau <= 0.0 {
        return Err(CliError::config(format!("tau must be positive ({tau})")));
    }
    let basis = ObservableBasis::default_basis(&rho);
    let constraints = ConservedSet::with_extras(
        model.hamiltonian().clone(),
        model.conserved_observables()[1..].to_vec(),
    )
    .map_err(CliError::runtime)?;
    let report = onsager_report(&rho, &basis, &constraints, tau).map_err(CliError::runtime)?;
    let doc = onsager_to_json(&report);
    let text = serde_json::to_string_pretty(&doc).map_err(CliError::config)?;
    write_file(&out_dir.join("onsager.json"), &text)?;
    println!(
        "entropy production routes: gram {:.6e}, affinity form {:.6e}, rate form {:.6e} (max deviation {:.3e})",
        doc.entropy_production_gram,
        doc.entropy_production_affinity_form,
        doc.entropy_production_rate_form,
        doc.max_route_deviation
    );
    Ok(())
}

/// `sea audit [--seed N]`
pub fn cmd_audit(seed: u64) -> CliResult<()> {
    let results = run_audit(seed, Mutation::None);
    let mut failed = Vec::new();
    println!("-- invariant audit (seed {seed}) --");
    for r in &results {
        println!(
            "{} {:<26} {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        if !r.passed {
            failed.push(r.name);
        }
    }
    if all_passed(&results) {
        Ok(())
    } else {
        Err(CliError {
            code: exit_codes::AUDIT_FAILED,
            message: format!("audit failed: {}", failed.join(", ")),
        })
    }
}

/// `sea qubit-demo`: the inward spiral from the central plane, as plot-ready
/// CSV columns (t, r_x, r_y, r_z, |r|, s, ds/dt).
#[allow(clippy::too_many_arguments)]
pub fn cmd_qubit_demo(
    out_dir: &Path,
    r0: [f64; 3],
    omega: f64,
    tau: f64,
    t_final: f64,
    sample_every: f64,
) -> CliResult<()> {
    let bloch = BlochModel::new(omega, [0.0, 0.0, 1.0], tau).map_err(CliError::config)?;
    let state = BlochState::new(r0).map_err(CliError::config)?;
    let rho0 = sea_core::bloch::bloch_to_density(&state).map_err(CliError::config)?;
    let model = bloch.to_system_model();
    let integrator = IntegratorConfig {
        converge_early: false,
        ..IntegratorConfig::default()
    };
    if t_final == 0.0 || sample_every <= 0.0 {
        return Err(CliError::config(
            "t_final must be nonzero and sample_every positive",
        ));
    }
    let traj = evolve(
        &rho0,
        &model,
        t_final,
        &integrator,
        SampleSpec::Every(sample_every),
    )
    .map_err(CliError::runtime)?;

    let mut csv = String::from("t,r_x,r_y,r_z,r_abs,entropy,entropy_production\n");
    for s in &traj.samples {
        let b = density_to_bloch(&s.state).map_err(CliError::runtime)?;
        let row = [
            s.t,
            b.r[0],
            b.r[1],
            b.r[2],
            b.radius(),
            s.audits.entropy,
            s.audits.entropy_production,
        ];
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    write_file(&out_dir.join("qubit_demo.csv"), &csv)?;
    let classification = classify_final(&traj, &model).map_err(CliError::runtime)?;
    print_audit_block(&traj, classification);
    Ok(())
}

/// `--sweep sweep.json`: a JSON array of simulate-config paths, fanned out
/// across worker threads, each run writing into out/<config-stem>/.
pub fn cmd_sweep(sweep_path: &Path, out_dir: &Path, format: OutputFormat) -> CliResult<()> {
    let paths: Vec<PathBuf> = crate::config::read_json(sweep_path)?;
    let base = sweep_path.parent().unwrap_or(Path::new("."));
    let jobs: Vec<PathBuf> = paths
        .iter()
        .map(|p| if p.is_absolute() { p.clone() } else { base.join(p) })
        .collect();
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(2)
        .min(jobs.len().max(1));
    let results: Vec<CliResult<()>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in jobs.chunks(jobs.len().div_ceil(workers)) {
            let chunk: Vec<PathBuf> = chunk.to_vec();
            let out_dir = out_dir.to_path_buf();
            handles.push(scope.spawn(move || {
                chunk
                    .iter()
                    .map(|config| {
                        let stem = config
                            .file_stem()
                            .map(|s| s.to_string_lossy().to_string())
                            .unwrap_or_else(|| "run".into());
                        cmd_simulate(config, &out_dir.join(stem), format)
                    })
                    .collect::<Vec<_>>()
            }));
        }
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker"))
            .collect()
    });
    let mut first_error = None;
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(()) => println!("sweep: {} ok", job.display()),
            Err(e) => {
                println!("sweep: {} FAILED: {}", job.display(), e.message);
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        None => Ok(()),
        Some(e) => Err(e),
    }
}
