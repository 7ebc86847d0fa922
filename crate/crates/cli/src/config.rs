//! Config files, flag overrides and error classification.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug)]
pub enum CliError {
    /// Bad input, config or file; exit status 1.
    Validation(String),
    /// Numerical failure on valid input; exit status 2.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<hdgmv::Error> for CliError {
    fn from(e: hdgmv::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub fn io_error(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Validation(format!("{what} {}: {e}", path.display()))
}

/// Reads a JSON object from `path`, or an empty object.
pub fn load_object(path: Option<&Path>) -> Result<Map<String, Value>, CliError> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| io_error("cannot read config file", path, e))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Validation(format!(
            "config file {} must hold a JSON object",
            path.display()
        ))),
        Err(e) => Err(CliError::Validation(format!("config file {}: {e}", path.display()))),
    }
}

/// Puts `value` under `key` when the flag was given.
pub fn set<T: Serialize>(map: &mut Map<String, Value>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        map.insert(key.to_string(), serde_json::to_value(v).expect("flag values serialize"));
    }
}

pub fn require(map: &Map<String, Value>, key: &str, hint: &str) -> Result<(), CliError> {
    if map.contains_key(key) {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "missing {key}: pass {hint} or set \"{key}\" in --config"
        )))
    }
}

pub fn build<T: DeserializeOwned>(map: Map<String, Value>, what: &str) -> Result<T, CliError> {
    serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Validation(format!("invalid {what} config: {e}")))
}

/// Compact JSON used for the `# config:` echo.
pub fn echo<T: Serialize>(config: &T) -> String {
    serde_json::to_string(config).expect("configs serialize")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error("cannot create directory", dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error("cannot write", path, e))
}

pub fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}
