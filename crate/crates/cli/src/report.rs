//! Metrics reports and artifact output.
//!
//! Every command writes its artifacts plus `report.json` into the output
//! directory. Reports carry no timestamps or paths, so identical runs give
//! identical bytes.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: &str = "hilbert-ops.metrics.v1";
pub const REPORT_FILE: &str = "report.json";
pub const COMMANDS: [&str; 8] = ["basis", "krr", "filter", "scatter", "koopman", "reason", "recover", "gen-data"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub command: String,
    pub tool_version: String,
    /// The fully resolved configuration; feeding it back via `--config` reruns
    /// the same experiment.
    pub config: Value,
    pub metrics: Map<String, Value>,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
}

/// Checks a parsed report against the fixed schema.
pub fn validate_report(v: &Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("report is not an object")?;
    let expected: BTreeSet<&str> = [
        "schema_version",
        "command",
        "tool_version",
        "config",
        "metrics",
        "artifacts",
        "warnings",
    ]
    .into_iter()
    .collect();
    let found: BTreeSet<&str> = obj.keys().map(String::as_str).collect();
    if found != expected {
        return Err(format!("report keys {found:?} differ from {expected:?}"));
    }
    if obj["schema_version"] != SCHEMA_VERSION {
        return Err(format!("unsupported schema_version {}", obj["schema_version"]));
    }
    let command = obj["command"].as_str().ok_or("command is not a string")?;
    if !COMMANDS.contains(&command) {
        return Err(format!("unknown command {command}"));
    }
    obj["tool_version"].as_str().ok_or("tool_version is not a string")?;
    let config = obj["config"].as_object().ok_or("config is not an object")?;
    if !config.get("seed").is_some_and(Value::is_u64) {
        return Err("config.seed is missing or not an unsigned integer".into());
    }
    let metrics = obj["metrics"].as_object().ok_or("metrics is not an object")?;
    if metrics.is_empty() {
        return Err("metrics is empty".into());
    }
    for (k, m) in metrics {
        check_metric(m).map_err(|e| format!("metrics.{k}: {e}"))?;
    }
    let artifacts = obj["artifacts"].as_array().ok_or("artifacts is not an array")?;
    let mut names = BTreeSet::new();
    for a in artifacts {
        let name = a.as_str().ok_or("artifact name is not a string")?;
        if name.is_empty() || name.contains(['/', '\\']) || name == REPORT_FILE {
            return Err(format!("invalid artifact name {name:?}"));
        }
        if !names.insert(name) {
            return Err(format!("duplicate artifact {name}"));
        }
    }
    let warnings = obj["warnings"].as_array().ok_or("warnings is not an array")?;
    if !warnings.iter().all(Value::is_string) {
        return Err("warnings must be strings".into());
    }
    Ok(())
}

/// Metric values are numbers, strings, booleans, or arrays/objects of them.
/// `null` is rejected, which also catches NaN and infinities (serialized as null).
fn check_metric(v: &Value) -> Result<(), String> {
    match v {
        Value::Null => Err("null or non-finite value".into()),
        Value::Array(items) => items.iter().try_for_each(check_metric),
        Value::Object(map) => map
            .iter()
            .try_for_each(|(k, m)| check_metric(m).map_err(|e| format!("{k}: {e}"))),
        _ => Ok(()),
    }
}

/// Writes artifacts into one directory and records their names.
pub struct Output {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Creates `name` and hands a buffered writer to `body`.
    pub fn write_with<F>(&mut self, name: &str, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> CliResult<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        self.write_with(name, |w| w.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e)))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("artifact serializes") + "\n";
        self.write_text(name, &text)
    }

    /// CSV from rows of already formatted fields; an empty `header` writes none.
    pub fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let to_err = |e: csv::Error| CliError::Module(hilbert_ops::Error::Parse(e.to_string()));
            if !header.is_empty() {
                w.write_record(header).map_err(to_err)?;
            }
            for r in rows {
                w.write_record(r).map_err(to_err)?;
            }
            w.flush().map_err(|e| CliError::io(self.dir.join(name), e))?;
        }
        self.write_text(name, std::str::from_utf8(&buf).expect("csv output is utf-8"))
    }

    /// Writes `report.json` and returns its path.
    pub fn finish<C: Serialize>(
        self,
        command: &str,
        config: &C,
        metrics: Map<String, Value>,
        warnings: Vec<String>,
    ) -> CliResult<PathBuf> {
        let report = Report {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            metrics,
            artifacts: self.artifacts,
            warnings,
        };
        let value = serde_json::to_value(&report).expect("report serializes");
        if let Err(e) = validate_report(&value) {
            return Err(CliError::Module(hilbert_ops::Error::Numerical(format!(
                "report failed schema validation: {e}"
            ))));
        }
        let path = self.dir.join(REPORT_FILE);
        let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Shortest round-trip decimal form of a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}
