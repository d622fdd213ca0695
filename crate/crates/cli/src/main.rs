use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use chemostat_dde::{load_config, run, Command, Config, Value};
use clap::{Args, Parser, Subcommand};

/// Delayed chemostat in a time-varying environment: simulation, persistence
/// threshold, periodic orbit and invariant checks.
///
/// Settings come from the scenario file, then `--set key=value`, then the
/// dedicated flags, each overriding the previous. Artifacts go to `output.dir`.
#[derive(Parser)]
#[command(name = "chemostat-dde", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario file (`key = value` lines)
    #[arg(long, global = true, value_name = "PATH")]
    scenario: Option<PathBuf>,

    /// Override one key, e.g. `--set model.tau=0.5` (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory (`output.dir`)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for `sweep` (`run.workers`; default from CHEMOSTAT_DDE_WORKERS)
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the model and export `t,s,x,y,E,psi`
    Simulate,
    /// Washout (biomass-free) solution over one period
    Washout,
    /// Ratio function phi over one period
    Phi,
    /// Persistence threshold lambda and classification
    Threshold,
    /// Ensemble probe of the common persistence floor
    Probe,
    /// Window condition for general (non-periodic) environments
    WindowCheck,
    /// Positive periodic orbit and its attraction rate
    Orbit,
    /// Check every identity of the theory on the scenario
    VerifyLemmas,
    /// Threshold over a range of one parameter
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Dotted key to vary (`sweep.param`)
    #[arg(long, value_name = "KEY")]
    param: Option<String>,
    /// First value (`sweep.from`)
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    /// Last value (`sweep.to`)
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    /// Number of points, ends included (`sweep.steps`)
    #[arg(long)]
    steps: Option<usize>,
}

fn assemble(cli: &Cli) -> chemostat_dde::Result<(Command, Config)> {
    let mut config = load_config(cli.common.scenario.as_deref(), &cli.common.set)?;
    if let Some(dir) = &cli.common.out {
        config.set("output.dir", Value::text(dir.display().to_string()));
    }
    if let Some(w) = cli.common.workers {
        config.set("run.workers", Value::Number(w as f64));
    }
    let command = match &cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Washout => Command::Washout,
        Cmd::Phi => Command::Phi,
        Cmd::Threshold => Command::Threshold,
        Cmd::Probe => Command::Probe,
        Cmd::WindowCheck => Command::WindowCheck,
        Cmd::Orbit => Command::Orbit,
        Cmd::VerifyLemmas => Command::VerifyLemmas,
        Cmd::Sweep(args) => {
            if let Some(p) = &args.param {
                config.set("sweep.param", Value::text(p));
            }
            if let Some(x) = args.from {
                config.set("sweep.from", Value::Number(x));
            }
            if let Some(x) = args.to {
                config.set("sweep.to", Value::Number(x));
            }
            if let Some(n) = args.steps {
                config.set("sweep.steps", Value::Number(n as f64));
            }
            Command::Sweep
        }
    };
    Ok((command, config))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = assemble(&cli).and_then(|(command, config)| run(command, &config));
    match result {
        Ok(outcome) => {
            // a closed pipe (`| head`) must not turn success into a panic
            let mut stdout = std::io::stdout().lock();
            for line in &outcome.summary {
                let _ = writeln!(stdout, "{line}");
            }
            for path in &outcome.artifacts {
                let _ = writeln!(stdout, "wrote {}", path.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
