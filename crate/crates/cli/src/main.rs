mod args;
mod config;
mod failure;
mod jobs;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::Config;
use failure::Failure;

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.global.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let workers: Option<usize> = config.opt(cli.global.workers, "workers")?;
    if workers == Some(0) {
        return Err(Failure::Usage("--workers must be >= 1".into()));
    }
    let out: Option<PathBuf> = config.opt(cli.global.out.clone(), "out")?;

    if let Command::Replay(r) = &cli.command {
        config.finish()?;
        return manifest::replay(&r.manifest, out, workers);
    }

    let job = jobs::resolve(&cli.command, cli.global.seed, &config)?;
    // deterministic commands accept a shared config that carries a seed
    config.opt::<u64>(None, "seed")?;
    config.finish()?;
    manifest::run_job(&job, &out.unwrap_or_else(|| PathBuf::from("cmm-out")), workers)?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}
