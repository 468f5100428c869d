use std::path::PathBuf;

use clap::{Parser, Subcommand};

use sea_cli::commands::{
    cmd_audit, cmd_equilibrium, cmd_onsager, cmd_qubit_demo, cmd_simulate, cmd_sweep,
    OutputFormat,
};
use sea_cli::{exit_codes, CliError, CliResult};

/// Steepest-entropy-ascent quantum dynamics: nonlinear density-operator
/// evolution with exact conservation and entropy monotonicity, plus the
/// Onsager transport analysis. Batch, non-interactive.
#[derive(Parser)]
#[command(name = "sea", version, about)]
struct Cli {
    /// Output directory for result files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Trajectory output format.
    #[arg(long, global = true, default_value = "both")]
    format: String,

    /// Seed for the audit fixture corpus.
    #[arg(long, global = true, default_value_t = 12345)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a model forward or backward and write the trajectory.
    Simulate {
        /// Run configuration (JSON).
        #[arg(long, required_unless_present = "sweep", conflicts_with = "sweep")]
        config: Option<PathBuf>,
        /// JSON array of config paths to fan out across workers.
        #[arg(long)]
        sweep: Option<PathBuf>,
    },
    /// Fit the canonical (grand-canonical) state to target mean values.
    Equilibrium {
        #[arg(long)]
        config: PathBuf,
    },
    /// Affinities, conductivities, and the entropy-production cross-checks.
    Onsager {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in invariant audit suite.
    Audit,
    /// Emit the spiral-relaxation CSV for a single qubit.
    QubitDemo {
        /// Initial Bloch vector "x,y,z".
        #[arg(long, default_value = "0.5,0,0")]
        r0: String,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 10.0)]
        t_final: f64,
        #[arg(long, default_value_t = 0.05)]
        sample_every: f64,
    },
}

fn parse_vec3(s: &str) -> CliResult<[f64; 3]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::config(format!("expected 'x,y,z', got '{s}'")));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p
            .trim()
            .parse::<f64>()
            .map_err(|e| CliError::config(format!("bad component '{p}': {e}")))?;
    }
    Ok(v)
}

fn init_logging() {
    let level = std::env::var("SEA_LOG_LEVEL").unwrap_or_else(|_| "warn".into());
    let filter = match level.as_str() {
        "error" | "warn" | "info" | "debug" => level,
        other => {
            eprintln!("unknown SEA_LOG_LEVEL '{other}', using warn");
            "warn".into()
        }
    };
    let _ = env_logger::Builder::new().parse_filters(&filter).try_init();
}

fn run(cli: Cli) -> CliResult<()> {
    let format = OutputFormat::parse(&cli.format)?;
    match cli.command {
        Command::Simulate { config, sweep } => match (config, sweep) {
            (_, Some(sweep)) => cmd_sweep(&sweep, &cli.out, format),
            (Some(config), None) => cmd_simulate(&config, &cli.out, format),
            (None, None) => Err(CliError::config("--config or --sweep is required")),
        },
        Command::Equilibrium { config } => cmd_equilibrium(&config, &cli.out),
        Command::Onsager { config } => cmd_onsager(&config, &cli.out),
        Command::Audit => cmd_audit(cli.seed),
        Command::QubitDemo {
            r0,
            omega,
            tau,
            t_final,
            sample_every,
        } => {
            let r0 = parse_vec3(&r0)?;
            cmd_qubit_demo(&cli.out, r0, omega, tau, t_final, sample_every)
        }
    }
}

fn main() {
    init_logging();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::exit(exit_codes::OK),
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}
