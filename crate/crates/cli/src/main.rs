//! `hjqm`: runs bundled or user-supplied scenarios and writes CSV/TOML
//! results.
//!
//! Exit codes: 0 success, 2 invalid config, 3 numerical abort, 1 I/O.

mod config;
mod run;
mod scenarios;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Invalid, Prepared};
use run::RunError;

#[derive(Parser)]
#[command(name = "hjqm", version, about = "Hamilton-Jacobi / quantum scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a bundled scenario by name
    Run {
        config: String,
        /// Results directory (default: results/<name>)
        #[arg(long, env = "HJQM_OUT_DIR")]
        out_dir: Option<PathBuf>,
        /// Replace a config value, e.g. run.dt=0.005 (repeatable)
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the bundled scenario names
    List,
    /// Parse and check a config without running it
    Validate {
        config: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn load(source: &str, overrides: &[String]) -> Result<Prepared, Invalid> {
    let path = Path::new(source);
    let text = if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| Invalid { field: "config".into(), reason: format!("{source}: {e}") })?
    } else if let Some(text) = scenarios::get(source) {
        text.to_string()
    } else {
        return Err(Invalid { field: "config".into(), reason: format!("`{source}` is neither a file nor a bundled scenario") });
    };
    config::prepare(config::parse(&text, overrides)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for name in scenarios::names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config, overrides } => match load(&config, &overrides) {
            Ok(p) => {
                println!("ok: {}", p.scenario.name);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config, out_dir, overrides } => {
            let prepared = match load(&config, &overrides) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let out = out_dir.unwrap_or_else(|| Path::new("results").join(&prepared.scenario.name));
            match run::execute(&prepared, &out) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(RunError::Numerical(e)) => {
                    eprintln!("numerical abort: {e}");
                    ExitCode::from(3)
                }
                Err(RunError::Io(e)) => {
                    eprintln!("i/o error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
