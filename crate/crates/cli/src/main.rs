mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use config::ProblemConfig;
use error::CliError;
use output::Artifacts;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Radial minimizer profile and closed-form energy.
    Solve,
    /// `m_λ` and `g_λ` over a ratio ladder.
    Threshold,
    /// Discrete energies of the radial minimizer.
    Energy,
    /// 1-D and 2-D direct minimization against the closed form.
    Direct,
    /// Free Lagrangian identities and lower-bound margins on test maps.
    Verify,
    /// One parameter ladder, spread over worker threads.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Free,
    FixedOuter,
}

/// Weighted Dirichlet energies between planar annuli.
#[derive(Debug, Parser)]
#[command(name = "annular-dirichlet", version)]
struct Args {
    command: Command,
    /// JSON problem configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single seed, overriding `numerics.seeds`.
    #[arg(long)]
    seed: Option<u64>,
    /// Polar grid size, overriding `numerics.polar_grid` and `numerics.verify_grid`.
    #[arg(long)]
    grid: Option<usize>,
    /// Boundary mode, overriding `mode.fixed_outer_boundary`.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Threshold => "threshold",
            Command::Energy => "energy",
            Command::Direct => "direct",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        }
    }
}

fn effective_config(args: &Args) -> Result<ProblemConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = ProblemConfig::parse(&text)?;
    if let Some(dir) = &args.out {
        cfg.output.directory = dir.to_string_lossy().into_owned();
    }
    if let Some(seed) = args.seed {
        cfg.numerics.seeds = vec![seed];
    }
    if let Some(n) = args.grid {
        cfg.numerics.polar_grid = n;
        cfg.numerics.verify_grid = n;
    }
    if let Some(mode) = args.mode {
        cfg.mode.fixed_outer_boundary = mode == Mode::FixedOuter;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &Args) -> Result<(), CliError> {
    let cfg = effective_config(args)?;
    let mut out = Artifacts::new(args.command.name(), &cfg)?;
    let result = out.echo_config().and_then(|_| match args.command {
        Command::Solve => commands::solve(&cfg, &mut out),
        Command::Threshold => commands::threshold(&cfg, &mut out),
        Command::Energy => commands::energy(&cfg, &mut out),
        Command::Direct => commands::direct(&cfg, &mut out),
        Command::Verify => commands::verify(&cfg, &mut out),
        Command::Sweep => commands::sweep(&cfg, &mut out),
    });
    match result {
        // A failed check leaves complete artifacts behind for inspection.
        Err(e) if !matches!(e, CliError::Check(_)) => {
            out.discard();
            Err(e)
        }
        other => {
            if other.is_ok() {
                eprintln!("{} artifacts written to {}", args.command.name(), out.dir().display());
            }
            other
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
