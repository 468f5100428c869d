//! Run-configuration schema: JSON documents with a model (inline or by file
//! reference), an initial-state constructor, time and integrator settings,
//! output paths, and analysis flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sea_core::propagator::{IntegrationMethod, IntegratorConfig};
use sea_core::serialize::{AnyModel, InitialStateDef, ModelFile};
use sea_core::StateOperator;

use crate::{CliError, CliResult};

/// Inline model or `{"file": "model.json"}` reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    File { file: PathBuf },
    Inline(ModelFile),
}

impl ModelRef {
    pub fn load(&self, base_dir: &Path) -> CliResult<AnyModel> {
        let model_file = match self {
            Self::Inline(mf) => mf.clone(),
            Self::File { file } => {
                let path = if file.is_absolute() {
                    file.clone()
                } else {
                    base_dir.join(file)
                };
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::config(format!("cannot read model file {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text).map_err(CliError::config)?
            }
        };
        model_file.build().map_err(CliError::config)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSpec {
    /// Signed: negative integrates backward.
    pub t_final: f64,
    /// Sampling interval for trajectory output.
    pub sample_every: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorJson {
    pub method: String,
    pub dt_init: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub renormalize_every: usize,
    pub kernel_lock: bool,
    pub converge_early: bool,
}

impl Default for IntegratorJson {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            method: "rk45_adaptive".into(),
            dt_init: d.dt_init,
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            max_steps: d.max_steps,
            renormalize_every: d.renormalize_every,
            kernel_lock: d.kernel_lock,
            converge_early: d.converge_early,
        }
    }
}

impl IntegratorJson {
    pub fn build(&self) -> CliResult<IntegratorConfig> {
        let method = match self.method.as_str() {
            "rk4_fixed" => IntegrationMethod::Rk4Fixed,
            "rk45_adaptive" => IntegrationMethod::Rk45Adaptive,
            other => {
                return Err(CliError::config(format!(
                    "unknown integrator method '{other}' (rk4_fixed | rk45_adaptive)"
                )))
            }
        };
        let config = IntegratorConfig {
            method,
            dt_init: self.dt_init,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_steps: self.max_steps,
            renormalize_every: self.renormalize_every,
            kernel_lock: self.kernel_lock,
            converge_early: self.converge_early,
            ..IntegratorConfig::default()
        };
        config.validate().map_err(CliError::config)?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub trajectory_csv: Option<String>,
    pub trajectory_json: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisFlags {
    pub onsager: bool,
    pub stability_probe: bool,
    pub roundtrip: bool,
}

/// Config for `sea simulate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelRef,
    pub initial_state: InitialStateDef,
    pub time: TimeSpec,
    #[serde(default)]
    pub integrator: IntegratorJson,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub analyses: AnalysisFlags,
}

/// Config for `sea equilibrium`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumConfig {
    pub model: ModelRef,
    pub energy_mean: f64,
    #[serde(default)]
    pub extra_means: Vec<f64>,
}

/// Config for `sea onsager`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnsagerConfig {
    pub model: ModelRef,
    pub state: InitialStateDef,
    /// Override for τ; defaults to the model's constant τ (or 1.0).
    #[serde(default)]
    pub tau: Option<f64>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::config(format!("cannot read config {}: {e}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Builds model + initial state, mapping every failure to a config error
/// (exit 2): a bad state in a config file is a config problem.
pub fn build_model_and_state(
    model_ref: &ModelRef,
    init: &InitialStateDef,
    base_dir: &Path,
) -> CliResult<(AnyModel, StateOperator)> {
    let model = model_ref.load(base_dir)?;
    let state = init.build(&model).map_err(CliError::config)?;
    Ok((model, state))
}
