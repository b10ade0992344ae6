use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lilac::harness::{run_experiment, sweep, AggregateReport, ExperimentConfig};
use lilac::{Error, Result};

#[derive(Parser)]
#[command(name = "lilac", version, about = "Curriculum training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of one configuration.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run one experiment per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of epsilon, m, E, label_order.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, as `--<key> <value>` or `--<key>=<value>`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
    overrides: Vec<String>,
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("unexpected argument `{arg}`")))?;
        match key.split_once('=') {
            Some((k, v)) => pairs.push((k.to_string(), v.to_string())),
            None => {
                let value = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("flag `--{key}` needs a value")))?;
                pairs.push((key.to_string(), value.clone()));
            }
        }
    }
    Ok(pairs)
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(&common.config)?;
    if let Some(v) = &common.variant {
        cfg.set("variant", v)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    for (key, value) in parse_overrides(&common.overrides)? {
        cfg.set(&key, &value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(label: &str, report: &AggregateReport) {
    let note = if report.std_is_placeholder() {
        " (single trial; std fixed at 0)"
    } else {
        ""
    };
    println!(
        "{label}{}: test accuracy {:.3} ± {:.3} over {} trial(s){note}",
        report.variant,
        report.mean,
        report.std,
        report.trials.len()
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common } => {
            let cfg = load(&common)?;
            let report = run_experiment(&cfg)?;
            print_report("", &report);
            println!("metrics written to {}", cfg.out_dir.display());
        }
        Command::Sweep {
            common,
            param,
            values,
        } => {
            let cfg = load(&common)?;
            for row in sweep(&cfg, &param, &values)? {
                print_report(&format!("{param}={} ", row.value), &row.report);
            }
            println!(
                "table written to {}",
                cfg.out_dir.join(format!("sweep_{param}.csv")).display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
