//! Batch front end for steepest-entropy-ascent quantum dynamics: config
//! parsing, the simulate/equilibrium/onsager/audit/qubit-demo commands, and
//! the built-in invariant audit suite.

pub mod audit;
pub mod commands;
pub mod config;

/// Process exit codes, fixed for CI use.
pub mod exit_codes {
    pub const OK: i32 = 0;
    pub const AUDIT_FAILED: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const NUMERICAL_ERROR: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
}

/// An error carrying the exit code it should terminate with.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(e: impl std::fmt::Display) -> Self {
        Self {
            code: exit_codes::CONFIG_ERROR,
            message: e.to_string(),
        }
    }

    /// Maps a runtime library error onto the numeric/infeasible codes.
    pub fn runtime(e: sea_core::SeaError) -> Self {
        let code = match &e {
            sea_core::SeaError::Infeasible(_) => exit_codes::INFEASIBLE,
            _ => exit_codes::NUMERICAL_ERROR,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;
