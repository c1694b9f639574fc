use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use fcs::experiment::{load_config, run, RunError};

#[derive(Parser)]
#[command(name = "fcs", version, about = "Full counting statistics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
        } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    return fail(RunError::Validation {
                        field: "threads".into(),
                        message: e.to_string(),
                    });
                }
            }
            let result = load_config(&config).and_then(|c| run(&c, out.as_deref()));
            match result {
                Ok(summary) => {
                    for path in summary.artifacts {
                        println!("{}", path.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Validate { config } => {
            match load_config(&config).and_then(|c| c.validate().map(|_| ())) {
                Ok(()) => {
                    println!("ok");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
