use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wmap_lab::cli::report::parse_formats;
use wmap_lab::cli::runner;

/// Weak-mode estimation laboratory: runs JSON-configured experiments and
/// writes CSV/JSON reports.
#[derive(Parser)]
#[command(name = "wmap-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config file.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Directory for result files (created if needed).
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Comma-separated output formats: csv, json.
        #[arg(long, default_value = "csv,json")]
        format: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, format } => {
            let formats = match parse_formats(&format) {
                Ok(formats) => formats,
                Err(message) => {
                    eprintln!("error: parse: {message}");
                    return ExitCode::from(2);
                }
            };
            match runner::run(&config, &out, &formats) {
                Ok(outcome) => {
                    for path in &outcome.written {
                        println!("wrote {}", path.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(err.exit_code() as u8)
                }
            }
        }
    }
}
