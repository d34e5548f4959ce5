use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use bottlenecklab::config::{ExperimentConfig, Subcommand};
use bottlenecklab::run::{effective_jobs, run, write_failures};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    VerifyClassical,
    VerifyQuantum,
    BarrierScan,
    TailCheck,
    StabilitySweep,
    MixingCompare,
    ModelInfo,
}

impl From<Cmd> for Subcommand {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::VerifyClassical => Subcommand::VerifyClassical,
            Cmd::VerifyQuantum => Subcommand::VerifyQuantum,
            Cmd::BarrierScan => Subcommand::BarrierScan,
            Cmd::TailCheck => Subcommand::TailCheck,
            Cmd::StabilitySweep => Subcommand::StabilitySweep,
            Cmd::MixingCompare => Subcommand::MixingCompare,
            Cmd::ModelInfo => Subcommand::ModelInfo,
        }
    }
}

/// Bottleneck bounds for quantum channels and Markov chains.
#[derive(Debug, Parser)]
#[command(name = "bottlenecklab", version)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Cmd,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (BOTTLENECKLAB_JOBS overrides).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let cmd: Subcommand = cli.subcommand.into();
    let result = ExperimentConfig::from_path(&cli.config).and_then(|cfg| {
        let jobs = effective_jobs(cli.jobs, &cfg)?;
        log::info!("{} with {jobs} worker(s)", cmd.name());
        run(cmd, &cfg, &cli.out, jobs)
    });
    match result {
        Ok(out) => {
            for s in &out.skipped {
                log::warn!("skipped {}: {} ({})", s.instance, s.code, s.reason);
            }
            if out.passed() {
                println!("{}: all assertions passed ({} skipped)", cmd.name(), out.skipped.len());
                ExitCode::SUCCESS
            } else {
                let f = &out.failures[0];
                eprintln!("{}: {} failure(s); first: {} on {} ({})", cmd.name(), out.failures.len(), f.invariant, f.instance, f.detail);
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            if let Err(w) = write_failures(&cli.out, &[], Some(&e)) {
                eprintln!("could not write failures.json: {w}");
            }
            ExitCode::from(2)
        }
    }
}
