use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plap::campaign::{default_out, exit_code, run, summarize, ExperimentConfig, Scenario};
use plap::{Error, Result};

#[derive(Parser)]
#[command(name = "plap", version, about = "Gradient regularity laboratory for parabolic p-Laplace equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study against closed-form solutions; writes field files.
    Solve(RunArgs),
    /// Run one verification scenario, e.g. `lemmas` or `verify-holder`.
    Verify {
        scenario: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Sweep the structural constants and freeze them in constants.lock.
    Calibrate(RunArgs),
    /// Print the checks of a run directory, or of every run below it.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn load(args: &RunArgs, scenario: Scenario) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cfg.scenario {
        if s != scenario {
            return Err(Error::Parse(format!("config is for scenario {}, not {}", s.name(), scenario.name())));
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| default_out(scenario));
    Ok((cfg, out))
}

fn execute(scenario: Result<Scenario>, args: &RunArgs) -> i32 {
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    let result = scenario.and_then(|s| {
        let (cfg, out) = load(args, s)?;
        let report = run(&cfg, s, &out)?;
        for o in &report.criteria {
            let failed = o.failures().count();
            println!("[{}] criterion {:>2} {}: {}/{} checks", if o.pass() { "PASS" } else { "FAIL" }, o.id, o.title, o.checks.len() - failed, o.checks.len());
        }
        println!("wrote {} ({:.1} s)", out.display(), report.wall_time_s);
        Ok(report)
    });
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    exit_code(&result)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Solve(args) => execute(Ok(Scenario::Solve), args),
        Command::Calibrate(args) => execute(Ok(Scenario::Calibrate), args),
        Command::Verify { scenario, args } => {
            let s = Scenario::parse(scenario).and_then(|s| {
                if s.is_verification() {
                    Ok(s)
                } else {
                    Err(Error::Parse(format!("{} is not a verification scenario", s.name())))
                }
            });
            execute(s, args)
        }
        Command::Report { dir } => match summarize(dir) {
            Ok(text) => {
                print!("{text}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&Err(e))
            }
        },
    };
    ExitCode::from(code as u8)
}
