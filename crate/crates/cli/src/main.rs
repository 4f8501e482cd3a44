use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lattice_gibbs_cli::{report, run, CliError, ExitStatus, RunConfig, RunManifest, TaskStatus, OUTPUT_ENV};

#[derive(Parser, Debug)]
#[command(name = "lattice-gibbs", version, about = "Finite-volume Gibbs kernel checks for lattice spin systems with random couplings")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List every invariant violation in a configuration.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Execute the configured tasks.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the environment variable and the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize and verify a finished run.
    Report {
        #[arg(long)]
        output: PathBuf,
    },
}

fn print_summary(m: &RunManifest) {
    for t in &m.tasks {
        let status = match t.status {
            TaskStatus::Passed => "passed",
            TaskStatus::DeterministicFailure => "DETERMINISTIC FAILURE",
            TaskStatus::StatisticalFlag => "statistical flag",
            TaskStatus::Error => "ERROR",
        };
        let failed: Vec<&str> = t.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        print!("task {:>2} {:<20} {status}", t.index, t.kind);
        if let Some(msg) = &t.message {
            print!(": {msg}");
        }
        if !failed.is_empty() {
            print!(" [{}]", failed.join(", "));
        }
        println!();
    }
    let s = &m.summary;
    println!(
        "{} tasks: {} passed, {} deterministic failures, {} statistical flags, {} errors (config {})",
        s.tasks, s.passed, s.deterministic_failures, s.statistical_flags, s.errors, m.config_hash
    );
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(ExitStatus::Failure.code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitStatus::Failure.code() } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(CliError::Invalid(vec!["--threads must be positive".into()]));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(CliError::Io(e.to_string()));
        }
    }
    match cli.command {
        Command::Validate { config } => match RunConfig::load(&config) {
            Err(e) => fail(e),
            Ok(c) => {
                let d = c.diagnostics();
                for msg in &d {
                    println!("{msg}");
                }
                if d.is_empty() {
                    println!("ok");
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(ExitStatus::Failure.code() as u8)
                }
            }
        },
        Command::Run { config, output, seed } => {
            let mut c = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if let Some(s) = seed {
                c.disorder.master_seed = s;
            }
            let dir = output
                .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
                .unwrap_or_else(|| c.output_dir.clone());
            match run(&c, &dir) {
                Err(e) => fail(e),
                Ok(m) => {
                    print_summary(&m);
                    ExitCode::from(m.summary.exit.code() as u8)
                }
            }
        }
        Command::Report { output } => match report(&output) {
            Err(e) => fail(e),
            Ok(m) => {
                print_summary(&m);
                ExitCode::from(m.summary.exit.code() as u8)
            }
        },
    }
}
