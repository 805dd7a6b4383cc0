use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod output;
mod runs;
mod selftest;

use config::RunKind;
use output::Sink;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Partial(String),
    Oracle(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Partial(_) => 3,
            Failure::Oracle(_) => 4,
            Failure::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Partial(m) | Failure::Oracle(m) | Failure::Other(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "harmbal", version, about = "Harmonic Balance continuation, stability and error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Timed repetitions per bench cell.
    #[arg(long, global = true, default_value_t = 100)]
    repeat: usize,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Frequency response by continuation, with optional stability.
    Frf,
    /// Leading-multiplier error against the shooting oracle.
    StabConvergence,
    /// Certification along a branch or at fixed frequencies.
    Urabe,
    /// Built-in consistency checks.
    Selftest,
    /// Timing of the backends at matched accuracy.
    Bench,
}

fn accepts(command: Command, kind: RunKind) -> bool {
    matches!(
        (command, kind),
        (Command::Frf, RunKind::Frf)
            | (Command::StabConvergence, RunKind::StabConvergence)
            | (Command::Urabe, RunKind::UrabeBranch | RunKind::UrabePoint)
            | (Command::Bench, RunKind::Bench | RunKind::StabConvergence)
            | (Command::Selftest, RunKind::Selftest)
    )
}

fn run_selftest(cli: &Cli) -> Result<(), Failure> {
    let checks = selftest::run();
    let mut report = String::new();
    for c in &checks {
        report.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    print!("{report}");
    if let Some(dir) = &cli.out {
        Sink::new(dir.clone(), "none".into())?.text("selftest.txt", &report)?;
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::Other("self-test failed".into()))
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    if cli.command == Command::Selftest && cli.config.is_none() {
        return run_selftest(cli);
    }
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config is required".into()))?;
    let loaded = config::load(path)?;
    if !accepts(cli.command, loaded.config.kind) {
        return Err(Failure::Config(format!("config kind {:?} does not match the subcommand", loaded.config.kind)));
    }
    if cli.command == Command::Selftest {
        return run_selftest(cli);
    }
    let dir = cli.out.clone().or_else(|| loaded.config.out.clone()).unwrap_or_else(|| {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        PathBuf::from("out").join(stem)
    });
    let sink = Sink::new(dir, loaded.hash.clone())?;
    match cli.command {
        Command::Frf => runs::frf(&loaded, &sink),
        Command::StabConvergence => runs::stab_convergence(&loaded, &sink),
        Command::Urabe => runs::urabe(&loaded, &sink),
        Command::Bench => runs::bench(&loaded, &sink, cli.repeat),
        Command::Selftest => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
