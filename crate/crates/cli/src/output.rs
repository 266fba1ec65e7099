use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad config, bad flags, unreadable files.
    #[error("{0}")]
    Usage(String),
    /// A computation could not be carried out (solver breakdown, evaluation error).
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

pub struct Outcome {
    pub command: &'static str,
    pub config: Value,
    pub passed: bool,
    pub report: Value,
    /// `(file name, contents)` written next to the JSON report.
    pub csv: Vec<(String, String)>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    passed: bool,
    config: &'a Value,
    report: &'a Value,
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Failed(format!("serializing report: {e}")))
}

pub fn render(o: &Outcome) -> Result<String, CliError> {
    let env = Envelope {
        tool: "liouville-lab",
        version: env!("CARGO_PKG_VERSION"),
        command: o.command,
        passed: o.passed,
        config: &o.config,
        report: &o.report,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| CliError::Failed(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Prints the report; with `out` also writes `<command>.json` and the CSV dumps there.
pub fn emit(o: &Outcome, out: Option<&Path>) -> Result<(), CliError> {
    let json = render(o)?;
    print!("{json}");
    if let Some(dir) = out {
        let io = |e: std::io::Error| CliError::Usage(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join(format!("{}.json", o.command)), &json).map_err(io)?;
        for (name, body) in &o.csv {
            fs::write(dir.join(name), body).map_err(io)?;
        }
    }
    Ok(())
}
