pub mod args;
mod commands;

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub use args::{Cli, Command};

pub const THREADS_ENV: &str = "PHASEKACZMARZ_THREADS";

/// Bad or missing parameters. Exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "usage: {}", self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Exit status of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Semantic failure such as a failed certification.
    Failed,
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    let semantic = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<phasekaczmarz::Error>(),
            Some(phasekaczmarz::Error::DigestMismatch { .. })
        )
    });
    if semantic {
        2
    } else {
        1
    }
}

pub fn run(cli: Cli) -> Result<Status> {
    configure_threads(cli.threads.as_deref())?;
    let config = cli.config.as_deref();
    match cli.command {
        Command::Gen(a) => commands::gen(merge(a, config)?),
        Command::Observe(a) => commands::observe(merge(a, config)?),
        Command::Solve(a) => commands::solve(merge(a, config)?),
        Command::Certify(a) => commands::certify(merge(a, config)?),
        Command::Drift(a) => commands::drift(merge(a, config)?),
        Command::Sweep(a) => commands::sweep(merge(a, config)?),
        Command::Moments(a) => commands::moments(merge(a, config)?),
    }
}

/// Overlays the flags that were given on top of the config file's values.
fn merge<T: Serialize + DeserializeOwned>(flags: T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut base: Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let Value::Object(base_map) = &mut base else {
        return Err(usage(format!(
            "config {} must be a JSON object",
            path.display()
        )));
    };
    if let Value::Object(given) = serde_json::to_value(&flags)? {
        for (k, v) in given {
            if !v.is_null() {
                base_map.insert(k, v);
            }
        }
    }
    serde_json::from_value(base).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn configure_threads(flag: Option<&str>) -> Result<()> {
    let env = std::env::var(THREADS_ENV).ok();
    let Some(spec) = flag.map(str::to_owned).or(env) else {
        return Ok(());
    };
    let n = match spec.trim() {
        "auto" => 0,
        s => match s.parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                return Err(usage(format!(
                    "--threads expects a positive integer or auto, got {s:?}"
                )))
            }
        },
    };
    // The global pool can only be built once per process; later calls keep the first.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}
