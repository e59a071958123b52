use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use epnozzle_cli::commands::{
    cmd_background, cmd_residuals, cmd_solve, cmd_sweep_sigma, cmd_sweep_threshold, exit_code, prepare_output,
};
use epnozzle_cli::config::{GridSize, RunConfig};

/// Steady subsonic Euler-Poisson flow in a 2D convergent nozzle.
#[derive(Debug, Parser)]
#[command(name = "epnozzle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to `output_dir` of the config, then `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and assembly.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Grid override, `NRxNT`.
    #[arg(long, global = true, value_parser = GridSize::parse)]
    grid: Option<GridSize>,
    /// Seed of the coercivity trials.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Radially symmetric background flow.
    Background,
    /// Full perturbation solve.
    Solve,
    /// Critical entrance field over a (gamma, r2/r1) lattice.
    SweepThreshold,
    /// Linear-response sweep over perturbation amplitudes.
    SweepSigma,
    /// Residual norms of converged solutions on a ladder of grids.
    Residuals,
}

fn run(cli: &Cli) -> epnozzle::Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| epnozzle::Error::InvalidParameter("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(g) = cli.grid {
        g.grid(cfg.geometry)?;
        cfg.grid = g;
        cfg.residuals.levels = vec![g, g.refined(), g.refined().refined()];
    }
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(epnozzle::Error::InvalidParameter("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| epnozzle::Error::InvalidParameter(e.to_string()))?;
    }
    let out = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    prepare_output(&out)?;
    match cli.command {
        Command::Background => cmd_background(&cfg, &out),
        Command::Solve => cmd_solve(&cfg, &out, cli.seed),
        Command::SweepThreshold => cmd_sweep_threshold(&cfg, &out),
        Command::SweepSigma => cmd_sweep_sigma(&cfg, &out),
        Command::Residuals => cmd_residuals(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EPNOZZLE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("epnozzle: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
