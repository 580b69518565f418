use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trajflow::explorer::{stability_bound, MinimaRegistry, StabilityBoundInput};
use trajflow::harness::{cmd_gen, cmd_report, cmd_train, inspect_registry, summary_table, ExperimentConfig, Method, Problem};
use trajflow::Error;

#[derive(Parser)]
#[command(name = "trajflow", version, about = "Trajectory-based RNN training experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults are used for anything missing.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    problem: Option<Problem>,
    #[arg(long, value_enum)]
    method: Option<Method>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a benchmark dataset.
    Gen(Common),
    /// Train a network and write a run report.
    Train(Common),
    /// Compare finished runs.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Directory for the CSV tables.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Evaluate the perturbation growth-rate bound.
    Bound {
        #[arg(long)]
        samples: f64,
        #[arg(long)]
        hidden: f64,
        #[arg(long)]
        inputs: f64,
        #[arg(long)]
        k_u: f64,
        #[arg(long)]
        k_y: f64,
    },
    /// Summarize a saved minima registry.
    Inspect { registry: PathBuf },
}

fn config(c: &Common) -> trajflow::Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output = o.clone();
    }
    if let Some(p) = c.problem {
        cfg.problem = p;
    }
    if let Some(m) = c.method {
        cfg.method = m;
    }
    Ok(cfg)
}

fn run(cmd: Cmd) -> trajflow::Result<ExitCode> {
    match cmd {
        Cmd::Gen(c) => {
            let cfg = config(&c)?;
            let p = cmd_gen(&cfg)?;
            println!(
                "{}: {} samples ({} train) -> {}",
                p.generator.name(),
                p.data.len(),
                p.n_train,
                cfg.output.join("dataset").display()
            );
        }
        Cmd::Train(c) => {
            let r = cmd_train(&config(&c)?)?;
            match &r.metrics {
                Some(m) => println!(
                    "{} {} seed {}: train MSE {:.6e}  test MSE {:.6e}  minima {}  components {}",
                    r.problem.name(),
                    r.method.name(),
                    r.seed,
                    m.train_mse,
                    m.test_mse,
                    r.minima,
                    r.components
                ),
                None => println!("{} {} seed {}: no usable network", r.problem.name(), r.method.name(), r.seed),
            }
            if r.is_flagged() {
                for f in &r.flags {
                    eprintln!("flagged: {f}");
                }
                return Ok(ExitCode::from(2));
            }
        }
        Cmd::Report { runs, out } => {
            let rows = cmd_report(&runs, &out)?;
            print!("{}", summary_table(&rows));
        }
        Cmd::Bound {
            samples,
            hidden,
            inputs,
            k_u,
            k_y,
        } => {
            let g = stability_bound(&StabilityBoundInput {
                n_samples: samples,
                m: hidden,
                n: inputs,
                k_u,
                k_y,
            })?;
            println!("{g:?}");
        }
        Cmd::Inspect { registry } => {
            print!("{}", inspect_registry(&MinimaRegistry::load(&registry)?));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse { .. } | Error::Schema { .. } | Error::Io { .. } | Error::Dimension { .. } => {
                    ExitCode::from(1)
                }
                _ => ExitCode::from(2),
            }
        }
    }
}
