use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::Serialize;

use regrate::engine;
use regrate::harness::{self, emit_report, ExperimentConfig, Status};
use regrate::rates::{RateInputs, RateRow};
use regrate::{Gamma, Theta};

#[derive(Parser)]
#[command(
    name = "regrate",
    version,
    about = "Certified rates for the parallel algorithm on strict pseudocontractions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print Δ, Φ, Φ′ and Φ″ for the given parameters as JSON.
    Rate {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 0.0)]
        k: f64,
        /// `identity`, `const:M` or `linear:P/Q`.
        #[arg(long)]
        theta: Theta,
        /// `zero`, `const:M` or `geometric:S,R`.
        #[arg(long, default_value = "zero")]
        gamma: Gamma,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Start index for Δ.
        #[arg(long, default_value_t = 0)]
        m: u64,
    },
    /// Iterate every instance of a config and write its trace CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        trace_out: PathBuf,
    },
    /// Certify the instances of a config; exit 0 on PASS, 1 on FAIL, 2 on a config error.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Certify a batch and write the summary (and optionally traces) to a directory.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the built-in default suite as a config file.
    DefaultConfig {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Serialize)]
struct RateOutput {
    inputs: RateInputs,
    k_ceiling: f64,
    rows: Vec<RateRow>,
}

fn rate(inputs: RateInputs, eps: &[f64], m: u64) -> anyhow::Result<()> {
    let rows = eps.iter().map(|e| inputs.row(*e, m)).collect::<Result<Vec<_>, _>>()?;
    let out = RateOutput {
        k_ceiling: inputs.k_ceiling()?,
        inputs,
        rows,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn run(config: &Path, trace_out: &Path) -> anyhow::Result<()> {
    let config = ExperimentConfig::load(config)?;
    std::fs::create_dir_all(trace_out).with_context(|| format!("creating {}", trace_out.display()))?;
    for built in harness::build_instances(&config)? {
        let trace = engine::iterate(&built.instance, built.n_max)?;
        let path = trace_out.join(format!("trace_{:04}.csv", built.index));
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        trace.to_csv().write(std::io::BufWriter::new(file))?;
        println!("{}\t{}\t{} steps", built.label, path.display(), built.n_max);
    }
    Ok(())
}

fn exit_for(status: Status) -> ExitCode {
    match status {
        Status::Pass => ExitCode::SUCCESS,
        Status::Fail => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rate {
            a,
            b,
            k,
            theta,
            gamma,
            eps,
            m,
        } => RateInputs::new(a, b, k, theta, gamma)
            .map_err(anyhow::Error::from)
            .and_then(|inputs| rate(inputs, &eps, m))
            .map(|_| ExitCode::SUCCESS),
        Command::Run { config, trace_out } => run(&config, &trace_out).map(|_| ExitCode::SUCCESS),
        Command::Verify { config } => ExperimentConfig::load(&config)
            .and_then(|c| harness::run_campaign(&c, None))
            .map_err(anyhow::Error::from)
            .map(|report| {
                print!("{}", report.to_json());
                exit_for(report.status)
            }),
        Command::Campaign { config, out } => (|| {
            let config = ExperimentConfig::load(&config)?;
            let traces = config.output.traces.then(|| out.join("traces"));
            let report = harness::run_campaign(&config, traces.as_deref())?;
            let path = emit_report(&report, &out, &config.output.summary)
                .with_context(|| format!("writing report to {}", out.display()))?;
            let status = match report.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
            };
            println!(
                "{status}: {} instances, {} failed; {}",
                report.instance_count,
                report.failed,
                path.display()
            );
            Ok(exit_for(report.status))
        })(),
        Command::DefaultConfig { seed } => serde_json::to_string_pretty(&ExperimentConfig::default_suite(seed))
            .map(|text| {
                println!("{text}");
                ExitCode::SUCCESS
            })
            .map_err(anyhow::Error::from),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
