use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use reusedp::bounds::{
    label_split_bound, naive_composition_bound, optimize_slack, AccuracyParams, BoundReport,
    Theorem,
};
use reusedp::datagen::{sample, PopulationSpec};
use reusedp::harness::{run_experiment, write_outputs, ExperimentConfig};
use reusedp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "reusedp",
    version,
    about = "Adaptive data analysis with per-block privacy-budget re-use"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Exit with status 3 unless the empirical failure rate is within the bound.
        #[arg(long)]
        check: bool,
    },
    /// Evaluate an accuracy bound.
    Bounds(BoundsArgs),
    /// Draw a dataset from a population spec and write it as CSV.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path, or `-` for stdout.
        #[arg(long, default_value = "-")]
        out: String,
    },
}

#[derive(clap::Args)]
struct BoundsArgs {
    #[arg(long, value_parser = parse_theorem)]
    theorem: Theorem,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Sample accuracy alpha (alpha_0 for `label`).
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Sample failure probability beta (beta_0 for `label`).
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    width: usize,
    #[arg(long)]
    slack_c: Option<f64>,
    #[arg(long)]
    slack_f: Option<f64>,
    /// Optimize the slacks so that beta' stays below this target.
    #[arg(long)]
    beta_target: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    alpha1: f64,
    #[arg(long, default_value_t = 0.0)]
    beta1: f64,
    /// Label probability for `label`.
    #[arg(long, default_value_t = 0.5)]
    p_label: f64,
    /// Concentration parameter for `label`.
    #[arg(long, default_value_t = 1.0)]
    delta_cher: f64,
    /// Failure slack of advanced composition for `naive`.
    #[arg(long, default_value_t = 1e-6)]
    delta_prime: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

fn parse_theorem(s: &str) -> std::result::Result<Theorem, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn bound_rows(args: &BoundsArgs) -> Result<Vec<(String, String)>> {
    let row = |k: &str, v: f64| (k.to_string(), format!("{v}"));
    match args.theorem {
        Theorem::Label => {
            let b = label_split_bound(
                args.alpha,
                args.beta,
                args.alpha1,
                args.beta1,
                args.p_label,
                args.n,
                args.delta_cher,
            )?;
            Ok(vec![
                ("theorem".into(), "label".into()),
                row("alpha", b.alpha_prime),
                row("beta", b.beta_prime),
                row("alpha0", args.alpha),
                row("beta0", args.beta),
                row("alpha1", args.alpha1),
                row("beta1", args.beta1),
                row("p_label", args.p_label),
                ("n".into(), args.n.to_string()),
                row("delta_cher", args.delta_cher),
            ])
        }
        Theorem::Naive => {
            let c = naive_composition_bound(args.eps, args.delta, args.m, args.delta_prime)?;
            Ok(vec![
                ("theorem".into(), "naive".into()),
                row("epsilon_total", c.epsilon_total),
                row("delta_total", c.delta_total),
                row("epsilon", args.eps),
                row("delta", args.delta),
                ("m".into(), args.m.to_string()),
                row("delta_prime", args.delta_prime),
            ])
        }
        theorem => {
            let params =
                AccuracyParams::new(args.eps, args.delta, args.alpha, args.beta, args.m, args.n)
                    .with_decay(args.p, args.width)
                    .with_slack(args.slack_c.unwrap_or(1.0), args.slack_f.unwrap_or(1.0));
            let report = match (args.beta_target, args.slack_c, args.slack_f) {
                (Some(target), _, _) => optimize_slack(theorem, &params, target)?,
                (None, Some(_), Some(_)) => BoundReport::new(theorem, &params)?,
                _ => {
                    return Err(Error::Config(
                        "give --beta-target or both --slack-c and --slack-f".into(),
                    ))
                }
            };
            let i = report.inputs;
            let mut rows = vec![
                ("theorem".into(), theorem.to_string()),
                row("alpha_prime", report.alpha_prime),
                row("beta_prime", report.beta_prime),
                row("epsilon", i.epsilon),
                row("delta", i.delta),
                row("alpha", i.alpha),
                row("beta", i.beta),
                ("m".into(), i.m.to_string()),
                ("n".into(), i.n.to_string()),
                row("p", i.p),
                ("width".into(), i.d.to_string()),
                row("slack_c", i.slack_c),
                row("slack_f", i.slack_f),
            ];
            if let Some(t) = report.optimizer {
                rows.push(row("beta_target", t.beta_target));
                rows.push(row("grid_alpha_prime", t.grid_alpha_prime));
                rows.push(("grid_points".into(), t.grid_points.to_string()));
                rows.push(("refine_iterations".into(), t.refine_iterations.to_string()));
            }
            Ok(rows)
        }
    }
}

fn print_rows(rows: &[(String, String)], format: Format) -> Result<()> {
    let mut out = io::stdout().lock();
    match format {
        Format::Table => {
            let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
            for (k, v) in rows {
                writeln!(out, "{k:<width$}  {v}")?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(rows.iter().map(|r| r.0.as_str()))?;
            w.write_record(rows.iter().map(|r| r.1.as_str()))?;
            w.flush()?;
        }
    }
    Ok(())
}

enum Failure {
    Error(Error),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Error(e.into())
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            check,
        } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            let config = ExperimentConfig::from_json(&text)?;
            let (outputs, summary) = run_experiment(&config, jobs)?;
            write_outputs(&out, &outputs, &summary)?;
            let d = &summary.distributional;
            println!(
                "trials={} alpha'={:.6} beta'={:.6} failures={} rate={:.4} wilson95=[{:.4}, {:.4}] check={}",
                summary.trials,
                summary.alpha_prime,
                summary.beta_prime,
                d.failures,
                d.rate,
                d.wilson_low,
                d.wilson_high,
                if summary.check_passed { "pass" } else { "fail" },
            );
            if check && !(summary.check_passed && summary.budget_audit_passed) {
                return Err(Failure::Check);
            }
            Ok(())
        }
        Command::Bounds(args) => {
            let rows = bound_rows(&args)?;
            print_rows(&rows, args.format)?;
            Ok(())
        }
        Command::Gen { spec, n, seed, out } => {
            let text = fs::read_to_string(&spec)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", spec.display())))?;
            let spec: PopulationSpec = serde_json::from_str(&text).map_err(Error::from)?;
            let drawn = sample(&spec, n, seed)?;
            if out == "-" {
                drawn.dataset.write_csv(io::stdout().lock())?;
            } else {
                drawn
                    .dataset
                    .write_csv(BufWriter::new(File::create(&out)?))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => {
            eprintln!(
                "check failed: empirical failure rate exceeds the bound or the budget audit failed"
            );
            ExitCode::from(3)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
