use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use whiplash_cli::{emit_report, run_experiment, Experiment, ExperimentSpec, Options};

#[derive(Parser)]
#[command(
    name = "whiplash",
    version,
    about = "Reproducible experiments for the whiplash inertial gradient method"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Continuous runs on (x^2 + kappa y^2)/2 for several kappa
    ConditionStudy(Run),
    /// Discrete run on the Rosenbrock function
    Rosenbrock(Run),
    /// Discrete run near the saddle of (x^2 - y^2)/2
    Saddle(Run),
    /// Saddle-escaping explorer with restarts
    Explore(Run),
    /// Continuous runs from eight starting velocities
    VelocityStudy(Run),
    /// Momentum decay k |z_k|^3 and the damping limit
    MomentumRate(Run),
    /// Coarse-to-fine converger strength scan
    EnvelopeScan(Run),
    /// Integral anchor and anchored energy along a continuous run
    AnchorCheck(Run),
}

#[derive(clap::Args)]
struct Run {
    #[command(flatten)]
    options: Options,
    /// Output directory (default: out/<experiment>)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, run) = match cli.command {
        Command::ConditionStudy(r) => (Experiment::ConditionStudy, r),
        Command::Rosenbrock(r) => (Experiment::Rosenbrock, r),
        Command::Saddle(r) => (Experiment::Saddle, r),
        Command::Explore(r) => (Experiment::Explore, r),
        Command::VelocityStudy(r) => (Experiment::VelocityStudy, r),
        Command::MomentumRate(r) => (Experiment::MomentumRate, r),
        Command::EnvelopeScan(r) => (Experiment::EnvelopeScan, r),
        Command::AnchorCheck(r) => (Experiment::AnchorCheck, r),
    };
    let spec = ExperimentSpec {
        experiment,
        out: run
            .out
            .unwrap_or_else(|| PathBuf::from("out").join(experiment.as_str())),
        options: run.options,
    };
    let result = run_experiment(&spec).and_then(|report| {
        emit_report(&report, &spec.out)?;
        Ok(report.summary)
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
