//! Flat `key = value` run configuration files.
//!
//! Keys are the long flag names without the leading dashes (`theta-c`,
//! `value-cols`, ...); underscores are accepted in place of dashes. Blank
//! lines and lines starting with `#` are ignored. A flag given on the command
//! line always wins over the same key in the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Default)]
pub struct FileConfig {
    source: String,
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(format!("{source}:{}: expected `key = value`", i + 1)));
            };
            let key = key.trim().replace('_', "-");
            if key.is_empty() {
                return Err(CliError::config(format!("{source}:{}: empty key", i + 1)));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::config(format!("{source}:{}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(FileConfig {
            source: source.to_string(),
            values,
        })
    }

    /// Rejects keys that the running command does not understand.
    pub fn check_keys(&self, allowed: &[&[&str]]) -> Result<(), CliError> {
        for key in self.values.keys() {
            if !allowed.iter().any(|set| set.contains(&key.as_str())) {
                return Err(CliError::config(format!("{}: unknown key `{key}`", self.source)));
            }
        }
        Ok(())
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::config(format!("{}: bad value for `{key}`: {e}", self.source)))
            })
            .transpose()
    }

    /// The command-line value if present, otherwise the file value.
    pub fn pick<T>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match cli {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// A switch is on if given on the command line, else the file decides.
    pub fn flag(&self, cli: bool, key: &str) -> Result<Option<bool>, CliError> {
        if cli {
            return Ok(Some(true));
        }
        self.get(key)
    }
}

/// A comma-separated list.
#[derive(Clone, Debug, PartialEq)]
pub struct List(pub Vec<String>);

impl FromStr for List {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let items: Vec<String> = s
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        Ok(List(items))
    }
}

impl List {
    pub fn numbers(&self, what: &str) -> Result<Vec<f64>, CliError> {
        self.0
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| CliError::config(format!("{what}: `{s}` is not a number")))
            })
            .collect()
    }
}

/// A threshold that can be switched off with `off`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold(pub Option<f64>);

impl FromStr for Threshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "off" | "none" => Ok(Threshold(None)),
            t => t
                .parse()
                .map(|v| Threshold(Some(v)))
                .map_err(|_| format!("expected a number or `off`, got `{s}`")),
        }
    }
}
