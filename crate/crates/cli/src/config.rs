//! Experiment configuration.
//!
//! A config file is one flat JSON object holding the parameters of a single
//! command. Resolution starts from the command defaults, applies the file, then
//! any flags given on the command line; unknown keys are rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub trait CommandConfig: Serialize + DeserializeOwned + Default {
    fn seed(&self) -> Option<u64>;

    /// Range checks on the resolved values.
    fn validate(&self) -> CliResult<()>;
}

pub fn load_file(path: Option<&Path>) -> CliResult<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Config(format!("{} must hold a JSON object", path.display()))),
        Err(e) => Err(CliError::Config(format!("cannot parse {}: {e}", path.display()))),
    }
}

fn as_object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

/// Defaults, then the file, then non-null flag values, then the global seed.
pub fn resolve<C: CommandConfig, F: Serialize>(
    file: &Map<String, Value>,
    flags: &F,
    seed: Option<u64>,
) -> CliResult<C> {
    let mut merged = as_object(serde_json::to_value(C::default()).expect("config defaults serialize"));
    for (k, v) in file {
        merged.insert(k.clone(), v.clone());
    }
    let flags = as_object(serde_json::to_value(flags).expect("flags serialize"));
    for (k, v) in flags {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    if let Some(s) = seed {
        merged.insert("seed".into(), Value::from(s));
    }
    let config: C = serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))?;
    if config.seed().is_none() {
        return Err(CliError::Config("a seed is required: pass --seed or set \"seed\" in the config".into()));
    }
    config.validate()?;
    Ok(config)
}

pub(crate) fn check(cond: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

pub(crate) fn positive(name: &str, v: f64) -> CliResult<()> {
    check(v > 0.0 && v.is_finite(), || format!("{name} must be positive and finite, got {v}"))
}

pub(crate) fn non_negative(name: &str, v: f64) -> CliResult<()> {
    check(v >= 0.0 && v.is_finite(), || format!("{name} must be ≥ 0 and finite, got {v}"))
}

pub(crate) fn at_least(name: &str, v: usize, min: usize) -> CliResult<()> {
    check(v >= min, || format!("{name} must be ≥ {min}, got {v}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        seed: Option<u64>,
        n: usize,
        lambda: f64,
    }

    impl Default for Demo {
        fn default() -> Self {
            Self {
                seed: None,
                n: 8,
                lambda: 0.5,
            }
        }
    }

    impl CommandConfig for Demo {
        fn seed(&self) -> Option<u64> {
            self.seed
        }

        fn validate(&self) -> CliResult<()> {
            positive("lambda", self.lambda)
        }
    }

    #[derive(Serialize)]
    struct Flags {
        n: Option<usize>,
        lambda: Option<f64>,
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let file = as_object(serde_json::json!({"n": 16, "lambda": 2.0, "seed": 1}));
        let flags = Flags {
            n: None,
            lambda: Some(3.0),
        };
        let c: Demo = resolve(&file, &flags, Some(9)).unwrap();
        assert_eq!(
            c,
            Demo {
                seed: Some(9),
                n: 16,
                lambda: 3.0
            }
        );
    }

    #[test]
    fn bad_configs_are_config_errors() {
        let none = Flags { n: None, lambda: None };
        let missing_seed: CliResult<Demo> = resolve(&Map::new(), &none, None);
        assert_eq!(missing_seed.unwrap_err().exit_code(), 2);
        let unknown = as_object(serde_json::json!({"bogus": 1}));
        assert!(matches!(resolve::<Demo, _>(&unknown, &none, Some(1)), Err(CliError::Config(_))));
        let out_of_range = as_object(serde_json::json!({"lambda": -1.0}));
        assert!(matches!(resolve::<Demo, _>(&out_of_range, &none, Some(1)), Err(CliError::Config(_))));
    }
}
