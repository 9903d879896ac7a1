use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dec_core::harness::comparison_table;
use dec_core::{run_scenario, Mode, ScenarioConfig, ScenarioRun, SimError};

#[derive(Parser, Debug)]
#[command(
    name = "dec-sim",
    version,
    about = "DEC humanoid balance simulator with max-consensus arbitration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its trajectory and metrics
    Run(Common),
    /// Run both modes from the same configuration and compare them
    Compare(Common),
    /// Check a configuration and print the effective values
    ValidateConfig(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file with `section.key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["original", "distributed"])]
    mode: Option<String>,
    /// Arbitration slot length in seconds
    #[arg(long, allow_negative_numbers = true)]
    te: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    duration: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Initial joint angles `ankle,knee,hip` in rad
    #[arg(long, allow_hyphen_values = true)]
    q0: Option<String>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override any key, e.g. `--set knee.kd=20` (repeatable)
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Also write metrics as JSON
    #[arg(long)]
    json: bool,
    /// Also write the inter-module message log
    #[arg(long)]
    message_log: bool,
}

enum Failure {
    Config(String),
    Diverged(String),
    Other(anyhow::Error),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Diverged { .. } => Failure::Diverged(e.to_string()),
            e if e.is_config_error() => Failure::Config(e.to_string()),
            e => Failure::Other(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

/// Defaults, then the file, then `--set`, then the dedicated flags.
fn load_config(args: &Common) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(m) = &args.mode {
        cfg.set("scenario.mode", m)?;
    }
    if let Some(v) = args.te {
        cfg.t_e = v;
    }
    if let Some(v) = args.duration {
        cfg.duration = v;
    }
    if let Some(v) = args.dt {
        cfg.dt = v;
    }
    if let Some(q0) = &args.q0 {
        cfg.set("scenario.q0", q0)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_run(run: &ScenarioRun, args: &Common) -> anyhow::Result<()> {
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mode = run.config.mode.to_string();
    let mut written = vec![
        write(&args.out, &format!("{mode}.csv"), &run.to_csv())?,
        write(
            &args.out,
            &format!("{mode}_metrics.txt"),
            &run.metrics_text(),
        )?,
    ];
    if args.json {
        written.push(write(
            &args.out,
            &format!("{mode}_metrics.json"),
            &run.metrics.to_json(),
        )?);
    }
    if args.message_log {
        written.push(write(
            &args.out,
            &format!("{mode}_messages.log"),
            &run.message_log(),
        )?);
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_run(args: &Common) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let run = run_scenario(&cfg)?;
    write_run(&run, args)?;
    print!("{}", run.metrics.to_text());
    Ok(())
}

fn cmd_compare(args: &Common) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let runs = [Mode::Original, Mode::Distributed].map(|mode| ScenarioConfig {
        mode,
        ..cfg.clone()
    });
    let original = run_scenario(&runs[0])?;
    let distributed = run_scenario(&runs[1])?;
    write_run(&original, args)?;
    write_run(&distributed, args)?;
    let table = comparison_table(&original.metrics, &distributed.metrics);
    let path = write(&args.out, "comparison.txt", &table)?;
    eprintln!("wrote {}", path.display());
    print!("{table}");
    Ok(())
}

fn cmd_validate(args: &Common) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    print!("{}", cfg.to_config_string());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::ValidateConfig(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Diverged(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
