mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind as ClapKind;
use clap::Parser;
use sada_core::{ErrorKind, Result};

use args::{Cli, Command};

fn threads_of(cmd: &Command) -> u64 {
    match cmd {
        Command::Synth(a) => a.out.threads,
        Command::Split(a) => a.out.threads,
        Command::Cluster(a) => a.out.threads,
        Command::FitDsds(a) => a.out.threads,
        Command::TrainMlp(a) => a.out.threads,
        Command::Eval(a) => a.out.threads,
        Command::Ecs(a) | Command::Sweep(a) => a.out.threads,
        Command::Iterate(a) => a.out.threads,
        Command::Report(_) => 1,
    }
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => commands::synth(a),
        Command::Split(a) => commands::split(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::FitDsds(a) => commands::fit_dsds(a),
        Command::TrainMlp(a) => commands::train_heads(a),
        Command::Eval(a) => commands::eval(a),
        Command::Ecs(a) => commands::ecs(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Iterate(a) => commands::iterate(a),
        Command::Report(a) => commands::report(a),
    }
}

#[cfg(feature = "parallel")]
fn run(cmd: &Command) -> Result<()> {
    let threads = threads_of(cmd);
    if threads <= 1 {
        return dispatch(cmd);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads as usize)
        .build()
        .map_err(|e| sada_core::Error::InvalidArgument {
            name: "threads",
            reason: e.to_string(),
        })?;
    pool.install(|| dispatch(cmd))
}

#[cfg(not(feature = "parallel"))]
fn run(cmd: &Command) -> Result<()> {
    if threads_of(cmd) > 1 {
        eprintln!("warning: built without the parallel feature; running on one thread");
    }
    dispatch(cmd)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ClapKind::DisplayHelp | ClapKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            })
        }
    }
}
