use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use screw_mpc::harness::{self, RunConfig};
use screw_mpc::mpc::LimitSet;

/// Screw-linear interpolation, twist-smoothing MPC and kinematic control.
#[derive(Parser)]
#[command(name = "screwmpc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Draw random keypoints from this seed instead of reading the keypoint file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Interpolate the keypoints and write path.csv and twists.csv.
    Plan(Common),
    /// Run the twist MPC alone on the planned reference and write mpc.csv.
    Smooth(Common),
    /// Run the dual-rate closed loop and write trajectory.csv.
    Simulate(Common),
    /// Check a trajectory log against the velocity, acceleration and jerk limits.
    Verify {
        /// Trajectory log to check.
        #[arg(long)]
        log: PathBuf,
        /// Configuration supplying the limits; the Panda defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let cfg = RunConfig::load(&common.config)
        .with_context(|| format!("loading {}", common.config.display()))?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Plan(c) => {
            let (cfg, out) = load(&c)?;
            let plan = harness::run_plan(&cfg, c.seed, &out)?;
            println!(
                "{} keypoints, {} samples, {} twists -> {}",
                plan.keypoints.len(),
                plan.path.len(),
                plan.twists.len(),
                out.display()
            );
        }
        Command::Smooth(c) => {
            let (cfg, out) = load(&c)?;
            let (path, ticks) = harness::run_smooth(&cfg, c.seed, &out)?;
            println!("{ticks} ticks -> {}", path.display());
        }
        Command::Simulate(c) => {
            let (cfg, out) = load(&c)?;
            let (path, s) = harness::run_simulate(&cfg, c.seed, &out)?;
            println!(
                "{} ticks ({} inner each), {:.3} s, terminal error {:.3e}, reached {}",
                s.ticks, s.inner_ticks_per_tick, s.duration, s.terminal_error, s.reached
            );
            println!(
                "qp not converged {}, qp infeasible {}, singular steps {}, bound violations {}",
                s.qp_not_converged, s.qp_infeasible, s.singular_steps, s.violations
            );
            println!("-> {}", path.display());
        }
        Command::Verify { log, config } => {
            let limits = match &config {
                Some(p) => load_limits(p)?,
                None => LimitSet::default(),
            };
            let report = harness::verify_log(&log, &limits)
                .with_context(|| format!("verifying {}", log.display()))?;
            println!("{report}");
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load_limits(path: &Path) -> Result<LimitSet> {
    let cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(cfg.limit_set()?)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
