//! Argument parsing and subcommand dispatch.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use valguard::dataset::write_dataset_csv;
use valguard::figures::reproduce_figure;
use valguard::simgen::ScenarioSpec;
use valguard::RngStream;

use crate::config::load_config;
use crate::error::{CliError, Context};
use crate::run::{run, RunOptions};

pub const THREADS_ENV: &str = "VALGUARD_THREADS";

#[derive(Debug, Parser)]
#[command(name = "valguard", version, about = "Leakage-safe nested cross-validation for PLS models")]
pub struct Cli {
    /// Worker threads; falls back to VALGUARD_THREADS, then the core count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate every pipeline of a config and write the report.
    Run(RunArgs),
    /// Write a simulated dataset as CSV.
    Simgen(SimgenArgs),
    /// Regenerate the plot data and summary of one figure (1 to 6).
    Figure(FigureArgs),
    /// Parse and check a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Run the watermarked leaky variant; the config must opt in as well.
    #[arg(long)]
    pub demonstrate_leakage: bool,
}

#[derive(Debug, Args)]
pub struct SimgenArgs {
    /// Scenario name, generated with default parameters.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub scenario: Option<String>,
    /// JSON file holding one scenario object.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    pub id: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Thread count from the flag, else the environment variable.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>, CliError> {
    let n = match (flag, env) {
        (Some(n), _) => Some(n),
        (None, Some(v)) => Some(v.trim().parse::<usize>().map_err(|_| {
            CliError::config(format!("{THREADS_ENV}: \"{v}\" is not a thread count"))
        })?),
        (None, None) => None,
    };
    if n == Some(0) {
        return Err(CliError::config("threads: must be at least 1"));
    }
    Ok(n)
}

fn scenario_name(s: &ScenarioSpec) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.get("name").and_then(Value::as_str).map(str::to_owned))
        .unwrap_or_else(|| "scenario".into())
}

fn simgen(args: &SimgenArgs) -> Result<PathBuf, CliError> {
    let scenario: ScenarioSpec = match (&args.scenario, &args.config) {
        (Some(name), _) => serde_json::from_value(serde_json::json!({ "name": name }))
            .map_err(|e| CliError::config(format!("scenario: {e}")))?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let mut de = serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(&mut de).map_err(|e| {
                let at = e.path().to_string();
                CliError::config(format!("{at}: {}", e.into_inner()))
            })?
        }
        (None, None) => return Err(CliError::config("scenario: give --scenario or --config")),
    };
    let ds = scenario
        .generate(&RngStream::from_seed(args.seed))
        .context(|| "scenario".into())?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Core {
        context: "simgen".into(),
        source: valguard::Error::Io {
            path: args.out.clone(),
            source: e,
        },
    })?;
    let path = args.out.join(format!("{}.csv", scenario_name(&scenario)));
    write_dataset_csv(&ds, &path).context(|| "simgen".into())?;
    Ok(path)
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Runs a parsed command line; returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = (|| -> Result<(), CliError> {
        let env = std::env::var(THREADS_ENV).ok();
        if let Some(n) = resolve_threads(cli.threads, env.as_deref())? {
            // Fails only if a pool already exists, as in repeated in-process calls.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        match &cli.command {
            Command::Run(args) => {
                let cfg = load_config(&args.config)?;
                let opts = RunOptions {
                    seed: args.seed,
                    out_dir: args.out.clone(),
                    demonstrate_leakage: args.demonstrate_leakage,
                };
                let outcome = run(&cfg, &config_dir(&args.config), &opts)?;
                if let Some(w) = &outcome.report.watermark {
                    println!("{w}");
                }
                for r in &outcome.report.reports {
                    let metric = serde_json::to_value(r.metric.name).unwrap_or_default();
                    println!(
                        "{}: median {} = {:.4} over {} repetition(s)",
                        r.pipeline,
                        metric.as_str().unwrap_or("metric"),
                        r.summary.median,
                        r.n_repetitions
                    );
                }
                println!("report written to {}", outcome.report_path.display());
            }
            Command::Simgen(args) => println!("wrote {}", simgen(args)?.display()),
            Command::Figure(args) => {
                reproduce_figure(args.id, args.seed, &args.out).context(|| format!("figure {}", args.id))?;
                println!("figure {} data written to {}", args.id, args.out.display());
            }
            Command::ValidateConfig { config } => {
                let cfg = load_config(config)?;
                println!("config OK: {} pipeline(s)", cfg.pipelines.len());
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
