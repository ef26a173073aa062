use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use importcast::disaggregate::Method;
use importcast::experiment::{run_experiment, validate_config, ConfigError, DEFAULTS_HELP};
use importcast::lstm::CandidateMode;
use importcast::training::gradcheck::{run_suite, GRADCHECK_TOLERANCE, SUITE_EPSILON};
use serde_json::{Map, Value};

#[derive(Parser)]
#[command(name = "importcast", version, about = "LSTM forecasting of quarterly imports from annual series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per country and write metrics, fits and forecasts.
    #[command(after_help = DEFAULTS_HELP)]
    Run(RunArgs),
    /// Compare BPTT gradients against central finite differences.
    Gradcheck {
        /// Base seed for the suite's networks and batches.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Finite-difference step.
        #[arg(long, default_value_t = SUITE_EPSILON)]
        epsilon: f64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV (country,year,value).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated country codes, or `all`.
    #[arg(long)]
    countries: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    disaggregation: Option<Method>,
    /// Also write the disaggregated quarterly series as CSV.
    #[arg(long)]
    dump_quarterly: Option<PathBuf>,
    #[arg(long)]
    lookback: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    candidate_mode: Option<CandidateMode>,
    /// Worker threads.
    #[arg(long)]
    parallelism: Option<usize>,
}

impl RunArgs {
    /// Config file contents with flag values layered on top.
    fn merged_config(&self) -> Result<Value> {
        let mut map = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                match serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))? {
                    Value::Object(map) => map,
                    _ => return Err(ConfigError::NotAnObject.into()),
                }
            }
            None => Map::new(),
        };
        let mut set = |key: &str, value: Value| {
            map.insert(key.to_string(), value);
        };
        if let Some(v) = &self.input {
            set("input", v.display().to_string().into());
        }
        if let Some(v) = &self.countries {
            set("countries", v.as_str().into());
        }
        if let Some(v) = self.seed {
            set("seed", v.into());
        }
        if let Some(v) = &self.out {
            set("out_dir", v.display().to_string().into());
        }
        if let Some(v) = self.disaggregation {
            set("disaggregation", serde_json::to_value(v)?);
        }
        if let Some(v) = &self.dump_quarterly {
            set("dump_quarterly", v.display().to_string().into());
        }
        if let Some(v) = self.lookback {
            set("lookback", v.into());
        }
        if let Some(v) = self.epochs {
            set("epochs", v.into());
        }
        if let Some(v) = self.lr {
            set("learning_rate", v.into());
        }
        if let Some(v) = self.candidate_mode {
            set("candidate_mode", v.as_str().into());
        }
        if let Some(v) = self.parallelism {
            set("parallelism", v.into());
        }
        Ok(Value::Object(map))
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let config = validate_config(&args.merged_config()?)?;
    let started = Instant::now();
    let summary = run_experiment(&config)?;
    for c in &summary.countries {
        match (&c.report, &c.error) {
            (Some(r), _) => println!(
                "{}  train mse {:.3e}  test mse {:.3e}  r {:.4}  best epoch {}",
                c.country_code, r.train_mse, r.test_mse, r.regression_coefficient, r.best_epoch
            ),
            (None, e) => println!("{}  FAILED: {}", c.country_code, e.as_deref().unwrap_or("unknown")),
        }
    }
    eprintln!(
        "wrote {} in {:.1}s",
        config.out_dir.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(if summary.all_succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn gradcheck(seed: u64, epsilon: f64) -> Result<ExitCode> {
    let started = Instant::now();
    let cases = run_suite(seed, epsilon)?;
    println!("mode           layers  params  max_rel_err  worst");
    let mut ok = true;
    for case in &cases {
        ok &= case.passed();
        println!(
            "{:<14} {:<7} {:<7} {:<12.3e} #{} ({}){}",
            case.candidate_mode.as_str(),
            case.hidden_sizes.len(),
            case.num_params,
            case.discrepancy.max_relative,
            case.discrepancy.worst_index,
            case.discrepancy.worst_block,
            if case.passed() { "" } else { "  FAIL" }
        );
    }
    println!(
        "{} (tolerance {GRADCHECK_TOLERANCE:e}, epsilon {epsilon:e}, {:.2}s)",
        if ok { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Gradcheck { seed, epsilon } => gradcheck(seed, epsilon),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
