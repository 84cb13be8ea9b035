//! Locating, parsing and writing event logs.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use labelsift::event_log::{csv_headers, load_xes, numeric_columns, read_csv, xes_numeric_keys, ColumnMapping};
use labelsift::EventLog;

use crate::config::{FileConfig, List};
use crate::error::CliError;

pub const KEYS: &[&str] = &["input", "input-format", "map", "value-cols", "numeric-keys", "delimiter"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Csv,
    Xes,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

/// Column names for CSV input, e.g. `case=CaseID,activity=Activity,time=TS`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ColumnMap {
    case: Option<String>,
    activity: Option<String>,
    time: Option<String>,
    event_id: Option<String>,
}

impl FromStr for ColumnMap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut map = ColumnMap::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, col) = part
                .split_once('=')
                .ok_or_else(|| format!("expected `role=column`, got `{part}`"))?;
            let col = Some(col.trim().to_string());
            match key.trim() {
                "case" => map.case = col,
                "activity" => map.activity = col,
                "time" | "timestamp" => map.time = col,
                "event_id" | "event" => map.event_id = col,
                other => return Err(format!("unknown column role `{other}`")),
            }
        }
        Ok(map)
    }
}

#[derive(Args, Debug, Default)]
pub struct LogArgs {
    /// Event log to read (.csv or .xes)
    pub input: Option<PathBuf>,

    /// Input format; taken from the file extension by default
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormat>,

    /// CSV column mapping: case=..,activity=..,time=..[,event_id=..]
    #[arg(long)]
    pub map: Option<ColumnMap>,

    /// CSV columns holding numeric values (default: every numeric column)
    #[arg(long)]
    pub value_cols: Option<List>,

    /// XES attributes to read as numbers (default: every float/int attribute)
    #[arg(long)]
    pub numeric_keys: Option<List>,

    /// CSV field delimiter
    #[arg(long)]
    pub delimiter: Option<char>,
}

/// An input log resolved against the config file, not yet read.
#[derive(Debug)]
pub struct InputSpec {
    pub path: PathBuf,
    pub format: InputFormat,
    map: ColumnMap,
    value_cols: Option<Vec<String>>,
    numeric_keys: Option<Vec<String>>,
    delimiter: u8,
}

impl InputSpec {
    pub fn resolve(args: LogArgs, file: &FileConfig) -> Result<Self, CliError> {
        let path = file
            .pick(args.input, "input")?
            .ok_or_else(|| CliError::config("no input log given"))?;
        let format = match file.pick(args.input_format, "input-format")? {
            Some(f) => f,
            None => match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
                Some("csv") => InputFormat::Csv,
                Some("xes") => InputFormat::Xes,
                _ => {
                    return Err(CliError::config(format!(
                        "cannot tell the format of {}; pass --input-format",
                        path.display()
                    )))
                }
            },
        };
        let delimiter = file.pick(args.delimiter, "delimiter")?.unwrap_or(',');
        if !delimiter.is_ascii() {
            return Err(CliError::config("delimiter must be an ASCII character"));
        }
        Ok(InputSpec {
            path,
            format,
            map: file.pick(args.map, "map")?.unwrap_or_default(),
            value_cols: file.pick(args.value_cols, "value-cols")?.map(|l| l.0),
            numeric_keys: file.pick(args.numeric_keys, "numeric-keys")?.map(|l| l.0),
            delimiter: delimiter as u8,
        })
    }

    pub fn load(&self) -> Result<EventLog, CliError> {
        let log = match self.format {
            InputFormat::Csv => self.load_csv()?,
            InputFormat::Xes => {
                let keys: BTreeSet<String> = match &self.numeric_keys {
                    Some(k) => k.iter().cloned().collect(),
                    None => {
                        let f = File::open(&self.path).map_err(|e| CliError::io(&self.path, e))?;
                        xes_numeric_keys(BufReader::new(f))?
                    }
                };
                load_xes(&self.path, &keys)?
            }
        };
        log::info!(
            "read {}: {} traces, {} events, {} activities",
            self.path.display(),
            log.traces().len(),
            log.event_count(),
            log.activities().len()
        );
        Ok(log)
    }

    fn load_csv(&self) -> Result<EventLog, CliError> {
        let text = fs::read_to_string(&self.path).map_err(|e| CliError::io(&self.path, e))?;
        let headers = csv_headers(&text, self.delimiter)?;
        let pick = |given: &Option<String>, default: &str| given.clone().unwrap_or_else(|| default.to_string());
        let mut mapping = ColumnMapping::new(
            &pick(&self.map.case, "case_id"),
            &pick(&self.map.activity, "activity"),
            &pick(&self.map.time, "timestamp"),
        );
        mapping.delimiter = self.delimiter;
        mapping.event_id_col = match &self.map.event_id {
            Some(c) => Some(c.clone()),
            None => headers.iter().find(|h| *h == "event_id").cloned(),
        };
        mapping.value_cols = match &self.value_cols {
            Some(cols) => cols.clone(),
            None => numeric_columns(&text, &mapping)?,
        };
        Ok(read_csv(&text, &mapping)?)
    }

    pub fn extension(&self) -> &'static str {
        match self.format {
            InputFormat::Csv => "csv",
            InputFormat::Xes => "xes",
        }
    }

    pub fn stem(&self) -> String {
        self.path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("log")
            .to_string()
    }
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
