//! `dkg`: batch driver for the Dirac-Klein-Gordon solver.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dkg_cli::commands::{self, CliError, CliResult};
use dkg_cli::config::{self, RunConfig};

#[derive(Parser)]
#[command(name = "dkg", version, about = "Dirac-Klein-Gordon solver: linear flows, identities, Picard iteration and mass sweeps")]
struct Cli {
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key=value` with a dotted key, e.g. `grid.n=32`; repeatable.
    #[arg(long = "override", global = true)]
    overrides: Vec<String>,
    /// Worker threads; falls back to DKG_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clifford, adjoint and symbol checks of the gamma matrices.
    CheckAlgebra,
    /// Commutator and Leibniz residuals on the analytic corpus.
    VerifyIdentities,
    /// Free Dirac and Klein-Gordon evolution with conservation monitors.
    EvolveLinear,
    /// Picard iteration for the coupled system.
    Iterate,
    /// Picard iteration over the mass lattice.
    Sweep,
    /// Re-render series and decay fits from stored trajectories.
    Report {
        /// Directory holding psi.bin and v.bin (default: the output directory).
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn threads(cli: Option<usize>) -> CliResult<Option<usize>> {
    if let Some(n) = cli {
        return Ok(Some(n));
    }
    match std::env::var("DKG_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| config::ConfigError::field("DKG_THREADS", format!("`{v}` is not a thread count")).into()),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> CliResult<serde_json::Value> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(config::ConfigError::field("threads", "must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config::ConfigError::field("threads", e.to_string()))?;
    }
    let mut overrides = cli.overrides;
    if let Some(out) = &cli.out {
        let out = serde_json::to_string(out).map_err(CliError::Json)?;
        overrides.push(format!("out={out}"));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::CheckAlgebra => commands::check_algebra(&cfg),
        Command::VerifyIdentities => commands::verify_identities(&cfg),
        Command::EvolveLinear => commands::evolve_linear(&cfg),
        Command::Iterate => commands::iterate_command(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Report { input } => {
            let input = input.unwrap_or_else(|| cfg.out.clone());
            commands::report(&cfg, &input)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            // A closed pipe downstream is not a failure of the run.
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
