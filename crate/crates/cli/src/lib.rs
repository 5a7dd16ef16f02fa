//! Command-line front end for `freeatoms`: argument handling, run
//! configuration, input loading and the JSON/CSV output documents.

pub mod args;
pub mod config;
pub mod docs;
pub mod error;
pub mod pretty;
pub mod run;

use std::fs;
use std::io::Write;

pub use config::RunConfig;
pub use error::CliError;

/// Runs `cfg`, writes the artifact and returns the exit status.
pub fn main_with(cfg: RunConfig) -> u8 {
    match run::execute(&cfg) {
        Ok(art) => {
            if let Err(e) = emit(&cfg, &art.text) {
                eprintln!("error: {e}");
                return e.exit_code();
            }
            if let Some(f) = art.failure {
                eprintln!("error: {f}");
                return f.exit_code();
            }
            if !art.breaches.is_empty() {
                for b in &art.breaches {
                    eprintln!("invariant: {b}");
                }
                if cfg.strict {
                    return 4;
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::NoConvergence { .. } = e {
                let text = pretty::to_string(&e.diagnostic()).unwrap_or_default();
                if let Err(w) = emit(&cfg, &text) {
                    eprintln!("error: {w}");
                }
            }
            e.exit_code()
        }
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}
