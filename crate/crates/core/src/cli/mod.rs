//! The `gatres` command line.
//!
//! Every command prints exactly one JSON document on stdout and sends
//! diagnostics to stderr. Exit codes: 0 success, 1 domain error, 2 usage or
//! I/O error, 3 result produced without convergence.

mod args;
mod commands;
mod manifest;

pub use args::Cli;
pub use manifest::{sha256_file, sha256_hex, RunManifest, FileHash, RUN_MANIFEST};

use clap::Parser;
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Environment variable naming the directory searched for network files.
pub const DATA_DIR_ENV: &str = "GATRES_DATA_DIR";

pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data/networks")))
}

/// A failed command: exit code plus the JSON document to print.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub detail: Option<Value>,
}

impl Failure {
    pub(crate) fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
            detail: None,
        }
    }

    pub(crate) fn domain(kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_DOMAIN,
            kind,
            message: message.into(),
            detail: None,
        }
    }

    fn document(&self) -> Value {
        let mut doc = json!({"error": self.kind, "message": self.message});
        if let Some(d) = &self.detail {
            doc["detail"] = d.clone();
        }
        doc
    }
}

/// Outcome of a command that produced output.
pub(crate) struct Output {
    pub code: i32,
    pub document: Value,
}

impl Output {
    pub(crate) fn ok(document: Value) -> Self {
        Output {
            code: EXIT_OK,
            document,
        }
    }
}

/// Parse `args` (program name first) and run the command, writing to the
/// given streams. Returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are the only non-JSON output.
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    let argv: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match commands::dispatch(cli, argv, stderr) {
        Ok(out) => {
            let _ = writeln!(stdout, "{}", pretty(&out.document));
            out.code
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            let _ = writeln!(stdout, "{}", pretty(&f.document()));
            f.code
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize")
}
