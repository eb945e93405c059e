use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use helical_lab::config::{parse_file, ExperimentConfig};
use helical_lab::report::{report, run, Verdict};
use helical_lab::Error;

const EXIT_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "helical-lab", version, about = "Numerical laboratory for maximal averages along space curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments selected by a config file.
    Run {
        config: PathBuf,
        /// Overrides the top-level seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run independent experiments concurrently.
        #[arg(long)]
        parallel: bool,
        /// Worker count for --parallel.
        #[arg(long, env = "HELICAL_LAB_THREADS")]
        threads: Option<usize>,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
    /// Merge run summaries below a directory into one acceptance record.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out, parallel, threads } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_INVALID);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
            match run(&cfg, parallel, threads) {
                Ok(summaries) => {
                    let mut failed = false;
                    for s in &summaries {
                        for c in &s.checks {
                            println!("{:<16} {:<8} {}: {}", s.experiment, format!("{:?}", c.verdict).to_lowercase(), c.name, c.detail);
                            if c.verdict == Verdict::Fail {
                                eprintln!("failed check: {} / {}", s.experiment, c.name);
                                failed = true;
                            }
                        }
                    }
                    if failed {
                        ExitCode::from(EXIT_FAILED)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e @ Error::ConfigInvalid(_)) => {
                    eprintln!("{e}");
                    ExitCode::from(EXIT_INVALID)
                }
                Err(e) => {
                    eprintln!("experiment failed: {e}");
                    ExitCode::from(EXIT_FAILED)
                }
            }
        }
        Command::Validate { config } => match parse_file(&config) {
            Ok((_, diagnostics)) if diagnostics.is_empty() => {
                println!("{}: valid", config.display());
                ExitCode::SUCCESS
            }
            Ok((_, diagnostics)) => {
                for d in diagnostics {
                    println!("{d}");
                }
                ExitCode::from(EXIT_INVALID)
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(EXIT_INVALID)
            }
        },
        Command::Report { dir } => match report(&dir) {
            Ok(c) => {
                println!("{} experiments, {} superseded, {} bundle files: {:?}", c.experiments.len(), c.superseded.len(), c.bundle.len(), c.verdict);
                if c.verdict == Verdict::Pass {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_FAILED)
                }
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(EXIT_INVALID)
            }
        },
    }
}
