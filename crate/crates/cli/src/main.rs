use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use backreact_cli::config::{parse_keys, validate, KeyMap};
use backreact_cli::run::{ensure_dir, write_file};
use backreact_cli::{run, sweep, verify, Axis, Level, Status, VerifyContext};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "backreact", version, about = "Moving-mirror backreaction simulations")]
struct Cli {
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// ODE tolerance (overrides `solver.tol`).
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one config.
    Run { config: PathBuf },
    /// Simulate a config once per axis value.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...`
        #[arg(long)]
        axis: String,
    },
    /// Run the acceptance checks.
    Verify {
        /// Include the 3D quadrature oracle grid.
        #[arg(long)]
        full: bool,
    },
}

fn load(cli: &Cli, path: &Path) -> Result<KeyMap> {
    let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    let mut keys = parse_keys(&text).with_context(|| format!("{}", path.display()))?;
    if let Some(dir) = &cli.out {
        keys.insert("output.dir".into(), toml::Value::String(dir.to_string_lossy().into_owned()));
    }
    if let Some(tol) = cli.tol {
        keys.insert("solver.tol".into(), toml::Value::Float(tol));
    }
    Ok(keys)
}

fn execute(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Run { config } => {
            let keys = load(cli, config)?;
            let outcome = run(&validate(&keys)?)?;
            if !cli.quiet {
                for (sim, files) in &outcome.runs {
                    let last = sim.record.last().map(|s| s.state);
                    println!(
                        "V0 = {}: {} at t = {}, L = {} -> {}",
                        sim.v0,
                        sim.record.halt,
                        last.map_or(f64::NAN, |s| s.t),
                        last.map_or(f64::NAN, |s| s.length),
                        files.csv.display()
                    );
                }
            }
            Ok(outcome.status())
        }
        Command::Sweep { config, axis } => {
            let axis: Axis = axis.parse()?;
            let keys = load(cli, config)?;
            let outcome = sweep(&keys, &axis)?;
            if !cli.quiet {
                for p in &outcome.points {
                    match &p.result {
                        Ok(o) => println!("{} = {}: {} record(s), exit {}", axis.key, p.value, o.runs.len(), o.status().code()),
                        Err(e) => println!("{} = {}: error: {e}", axis.key, p.value),
                    }
                }
                println!("summary -> {}", outcome.summary.display());
            }
            Ok(outcome.status())
        }
        Command::Verify { full } => {
            let level = if *full { Level::Full } else { Level::Fast };
            let mut ctx = VerifyContext::new(level);
            if let Some(tol) = cli.tol {
                anyhow::ensure!(tol > 0.0 && tol < 1e-2, "--tol must lie in (0, 1e-2)");
                ctx = ctx.tolerance(tol);
            }
            let report = verify(&ctx);
            if let Some(dir) = &cli.out {
                ensure_dir(dir)?;
                write_file(&dir.join("verify_report.json"), report.to_json().as_bytes())?;
                write_file(&dir.join("verify_report.txt"), report.to_text().as_bytes())?;
            }
            if !cli.quiet {
                print!("{}", report.to_text());
            }
            Ok(if report.failed() { Status::Error } else { Status::Clean })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Error.code())
        }
    }
}
