use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::SecondsFormat;
use serde::{Deserialize, Serialize};

use super::{parse_timestamp, ActivityLabel, Event, EventLog, LogFormat, SourceMeta, Trace};
use crate::error::{Error, Result};

/// Which CSV columns hold the case id, activity, timestamp and numeric values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub case_col: String,
    pub activity_col: String,
    pub time_col: String,
    #[serde(default)]
    pub value_cols: Vec<String>,
    /// Optional column with event identifiers; row numbers are used otherwise.
    #[serde(default)]
    pub event_id_col: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: u8,
}

fn default_delimiter() -> u8 {
    b','
}

impl ColumnMapping {
    pub fn new(case_col: &str, activity_col: &str, time_col: &str) -> Self {
        ColumnMapping {
            case_col: case_col.into(),
            activity_col: activity_col.into(),
            time_col: time_col.into(),
            value_cols: Vec::new(),
            event_id_col: None,
            delimiter: b',',
        }
    }

    pub fn with_values<S: AsRef<str>>(mut self, cols: &[S]) -> Self {
        self.value_cols = cols.iter().map(|c| c.as_ref().to_string()).collect();
        self
    }

    /// Mapping matching the layout produced by [`write_csv`].
    pub fn canonical(value_cols: &[String]) -> Self {
        ColumnMapping {
            event_id_col: Some("event_id".into()),
            ..ColumnMapping::new("case_id", "activity", "timestamp").with_values(value_cols)
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<EventLog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut log = read_csv(&text, mapping)?;
    log.source_meta.filename = Some(path.display().to_string());
    Ok(log)
}

/// Splits off leading `#` comment lines; returns their count and the rest.
fn strip_comments(text: &str) -> (u64, &str) {
    let mut skipped = 0u64;
    let mut body = text;
    while body.starts_with('#') {
        skipped += 1;
        body = match body.find('\n') {
            Some(i) => &body[i + 1..],
            None => "",
        };
    }
    (skipped, body)
}

/// Header row of CSV text, after any leading `#` comment lines.
pub fn csv_headers(text: &str, delimiter: u8) -> Result<Vec<String>> {
    let (_, body) = strip_comments(text);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_reader(body.as_bytes());
    Ok(reader.headers()?.iter().map(str::to_string).collect())
}

/// Columns outside the mapping whose non-empty cells all parse as finite
/// numbers, in header order. Columns with no values at all are left out.
pub fn numeric_columns(text: &str, mapping: &ColumnMapping) -> Result<Vec<String>> {
    let (_, body) = strip_comments(text);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter)
        .from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    let reserved = [
        Some(mapping.case_col.as_str()),
        Some(mapping.activity_col.as_str()),
        Some(mapping.time_col.as_str()),
        mapping.event_id_col.as_deref(),
    ];
    // (still numeric, seen a value)
    let mut state: Vec<(bool, bool)> = headers
        .iter()
        .map(|h| (!reserved.contains(&Some(h)), false))
        .collect();
    for record in reader.records() {
        let record = record?;
        for (i, cell) in record.iter().enumerate() {
            let Some(st) = state.get_mut(i) else { continue };
            let cell = cell.trim();
            if st.0 && !cell.is_empty() {
                st.0 = cell.parse::<f64>().is_ok_and(f64::is_finite);
                st.1 = true;
            }
        }
    }
    Ok(headers
        .iter()
        .zip(state)
        .filter(|(_, (numeric, seen))| *numeric && *seen)
        .map(|(h, _)| h.to_string())
        .collect())
}

/// Parses CSV text. Leading lines starting with `#` are treated as comments.
pub fn read_csv(text: &str, mapping: &ColumnMapping) -> Result<EventLog> {
    let (skipped_lines, body) = strip_comments(text);

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter)
        .has_headers(true)
        .from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in header")))
    };
    let case_idx = column(&mapping.case_col)?;
    let activity_idx = column(&mapping.activity_col)?;
    let time_idx = column(&mapping.time_col)?;
    let id_idx = mapping.event_id_col.as_deref().map(column).transpose()?;
    let value_idx = mapping
        .value_cols
        .iter()
        .map(|c| column(c).map(|i| (c.clone(), i)))
        .collect::<Result<Vec<_>>>()?;

    let mut traces: Vec<Trace> = Vec::new();
    let mut by_case: HashMap<String, usize> = HashMap::new();
    let mut meta = SourceMeta {
        filename: None,
        format: LogFormat::Csv,
        rows: 0,
        skipped_events: 0,
        date_only_timestamps: 0,
    };

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line()) + skipped_lines;
        let row_err = |message: String| Error::Row { line, message };
        let field = |i: usize| record.get(i).unwrap_or("");

        let activity = ActivityLabel::new(field(activity_idx))
            .map_err(|_| row_err("empty activity".into()))?;
        let raw_time = field(time_idx);
        let (timestamp, date_only) = parse_timestamp(raw_time)
            .ok_or_else(|| row_err(format!("unparseable timestamp `{raw_time}`")))?;
        if date_only {
            meta.date_only_timestamps += 1;
        }
        let id = match id_idx {
            Some(i) => field(i)
                .trim()
                .parse::<u64>()
                .map_err(|_| row_err(format!("invalid event id `{}`", field(i))))?,
            None => row as u64,
        };
        let mut numeric_values = BTreeMap::new();
        for (name, i) in &value_idx {
            let cell = field(*i).trim();
            if cell.is_empty() {
                continue;
            }
            let value: f64 = cell
                .parse()
                .map_err(|_| row_err(format!("non-numeric value `{cell}` in column `{name}`")))?;
            if !value.is_finite() {
                return Err(row_err(format!("non-finite value `{cell}` in column `{name}`")));
            }
            numeric_values.insert(name.clone(), value);
        }

        let case_id = field(case_idx).to_string();
        let slot = *by_case.entry(case_id.clone()).or_insert_with(|| {
            traces.push(Trace {
                case_id,
                events: Vec::new(),
            });
            traces.len() - 1
        });
        traces[slot].events.push(Event {
            id,
            activity,
            timestamp,
            numeric_values,
        });
        meta.rows += 1;
    }

    if meta.date_only_timestamps > 0 {
        log::warn!(
            "{} timestamps had no time of day; midnight UTC assumed",
            meta.date_only_timestamps
        );
    }
    EventLog::from_traces(traces, meta)
}

/// Writes the log as canonical CSV: `case_id,event_id,activity,timestamp`
/// followed by one column per numeric attribute.
pub fn write_csv<W: Write>(log: &EventLog, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let value_cols: Vec<&String> = log.numeric_attribute_names().iter().collect();
    let mut header = vec!["case_id", "event_id", "activity", "timestamp"];
    header.extend(value_cols.iter().map(|s| s.as_str()));
    writer.write_record(&header)?;
    for trace in log.traces() {
        for event in &trace.events {
            let mut record = vec![
                trace.case_id.clone(),
                event.id.to_string(),
                event.activity.to_string(),
                event.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            ];
            for col in &value_cols {
                record.push(
                    event
                        .numeric_values
                        .get(*col)
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                );
            }
            writer.write_record(&record)?;
        }
    }
    writer.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
