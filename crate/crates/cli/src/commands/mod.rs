pub mod basis;
pub mod filter;
pub mod gen_data;
pub mod koopman;
pub mod krr;
pub mod reason;
pub mod recover;
pub mod scatter;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{self, CommandConfig};
use crate::error::{CliError, CliResult};
use crate::report::Output;

/// Global options shared by every subcommand.
pub struct Context {
    pub file: Map<String, Value>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn resolve<C: CommandConfig, F: Serialize>(&self, flags: &F) -> CliResult<C> {
        config::resolve(&self.file, flags, self.seed)
    }

    pub fn output(&self) -> CliResult<Output> {
        Output::new(&self.out_dir)
    }
}

pub(crate) fn open(path: impl AsRef<Path>) -> CliResult<BufReader<File>> {
    let path = path.as_ref();
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

pub(crate) fn metrics(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        other => panic!("metrics must be an object, got {other}"),
    }
}

pub(crate) fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}
