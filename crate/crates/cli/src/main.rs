use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hasym::checks::{self, Check};
use hasym::pipeline::{self, RunConfig, DEFAULT_SEED};
use hasym::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "hasym", version, about = "Conserved quantities of harmonic-asymptotics initial data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every random draw and perturbation.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Override the config's grid.l_max.
    #[arg(long, global = true)]
    l_max: Option<usize>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the conserved quantities, write report and table, audit the enabled checks.
    Run { config: PathBuf },
    /// Run every named check and print one line per check.
    Verify { config: PathBuf },
}

fn load(path: &Path, l_max: Option<usize>) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config = RunConfig::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    match l_max {
        Some(l) => config.with_l_max(l),
        None => Ok(config),
    }
}

/// Output paths are taken relative to the config file.
fn resolve(config_path: &Path, out: &Path) -> PathBuf {
    match config_path.parent() {
        Some(dir) if out.is_relative() => dir.join(out),
        _ => out.to_path_buf(),
    }
}

fn run(cli: &Cli, path: &Path) -> Result<bool> {
    let config = load(path, cli.l_max)?;
    let out = pipeline::run(&config, cli.seed)?;
    if let Some(p) = &config.outputs.report {
        fs::write(resolve(path, p), &out.report)?;
    }
    if let Some(p) = &config.outputs.table {
        fs::write(resolve(path, p), pipeline::table_csv(&out.table)?)?;
    }
    let passed = out.passed();
    if !cli.quiet {
        print!("{}", out.report);
    } else {
        print_failures(&out.checks);
    }
    Ok(passed)
}

fn print_failures(found: &[Check]) {
    for c in found.iter().filter(|c| !c.passed()) {
        eprintln!("{c}");
    }
}

fn verify(cli: &Cli, path: &Path) -> Result<bool> {
    let config = load(path, cli.l_max)?;
    let found = pipeline::verify(&config, cli.seed)?;
    if cli.quiet {
        print_failures(&found);
    } else {
        for c in &found {
            println!("{c}");
        }
        let failed = found.iter().filter(|c| !c.passed()).count();
        println!("seed {} : {} passed, {failed} failed", cli.seed, found.len() - failed);
    }
    Ok(checks::all_passed(&found))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Verify { config } => verify(&cli, config),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
