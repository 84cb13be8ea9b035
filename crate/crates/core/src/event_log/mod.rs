//! Event-log data model and ingestion.
//!
//! An [`EventLog`] is a list of [`Trace`]s, each an ordered, non-empty list of
//! timestamped [`Event`]s carrying an [`ActivityLabel`] and zero or more numeric
//! attribute values. Logs are immutable once built: every constructor sorts
//! events by timestamp (stable, so file order breaks ties) and derives the
//! activity and attribute-name sets.

mod csv_io;
mod time;
mod xes;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{csv_headers, load_csv, numeric_columns, read_csv, write_csv, ColumnMapping};
pub use time::parse_timestamp;
pub use xes::{load_xes, read_xes, write_xes, xes_numeric_keys};

/// Name of an activity. Equality is exact, case-sensitive string equality.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivityLabel(String);

impl ActivityLabel {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Config("activity label must not be empty".into()));
        }
        Ok(ActivityLabel(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for ActivityLabel {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub id: u64,
    pub activity: ActivityLabel,
    pub timestamp: DateTime<FixedOffset>,
    pub numeric_values: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn activities(&self) -> impl Iterator<Item = &ActivityLabel> {
        self.events.iter().map(|e| &e.activity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Csv,
    Xes,
    Memory,
}

/// Where a log came from and what the loader had to tolerate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceMeta {
    pub filename: Option<String>,
    pub format: LogFormat,
    pub rows: usize,
    /// Events dropped because they had no activity name (XES only).
    pub skipped_events: usize,
    /// Timestamps given as a bare date and read as midnight UTC.
    pub date_only_timestamps: usize,
}

impl SourceMeta {
    pub fn memory() -> Self {
        SourceMeta {
            filename: None,
            format: LogFormat::Memory,
            rows: 0,
            skipped_events: 0,
            date_only_timestamps: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EventLog {
    traces: Vec<Trace>,
    activities: BTreeSet<ActivityLabel>,
    numeric_attribute_names: BTreeSet<String>,
    source_meta: SourceMeta,
}

/// Logs compare by content: same traces, events, order and values.
impl PartialEq for EventLog {
    fn eq(&self, other: &Self) -> bool {
        self.traces == other.traces
    }
}

impl EventLog {
    /// Builds a log from traces, sorting each trace by timestamp (stable).
    ///
    /// Empty traces are dropped. Fails on non-finite numeric values or on an
    /// event identifier repeated within one trace.
    pub fn from_traces(traces: Vec<Trace>, source_meta: SourceMeta) -> Result<Self> {
        let mut kept = Vec::with_capacity(traces.len());
        let mut activities = BTreeSet::new();
        let mut numeric_attribute_names = BTreeSet::new();
        for mut trace in traces {
            if trace.events.is_empty() {
                continue;
            }
            trace.events.sort_by_key(|e| e.timestamp);
            let mut ids = BTreeSet::new();
            for event in &trace.events {
                if !ids.insert(event.id) {
                    return Err(Error::Config(format!(
                        "event id {} occurs twice in case `{}`",
                        event.id, trace.case_id
                    )));
                }
                for (name, value) in &event.numeric_values {
                    if !value.is_finite() {
                        return Err(Error::Config(format!(
                            "non-finite value for `{name}` in case `{}`",
                            trace.case_id
                        )));
                    }
                    numeric_attribute_names.insert(name.clone());
                }
                activities.insert(event.activity.clone());
            }
            kept.push(trace);
        }
        Ok(EventLog {
            traces: kept,
            activities,
            numeric_attribute_names,
            source_meta,
        })
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn activities(&self) -> &BTreeSet<ActivityLabel> {
        &self.activities
    }

    pub fn numeric_attribute_names(&self) -> &BTreeSet<String> {
        &self.numeric_attribute_names
    }

    pub fn source_meta(&self) -> &SourceMeta {
        &self.source_meta
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.traces.iter().flat_map(|t| t.events.iter())
    }

    pub fn contains(&self, a: &ActivityLabel) -> bool {
        self.activities.contains(a)
    }

    pub(crate) fn require(&self, a: &ActivityLabel) -> Result<()> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(Error::UnknownActivity(a.to_string()))
        }
    }

    /// Returns a copy of this log with every event passed through `relabel`.
    pub fn map_labels(&self, mut relabel: impl FnMut(usize, usize, &Event) -> ActivityLabel) -> Result<Self> {
        let traces = self
            .traces
            .iter()
            .enumerate()
            .map(|(ti, t)| Trace {
                case_id: t.case_id.clone(),
                events: t
                    .events
                    .iter()
                    .enumerate()
                    .map(|(ei, e)| Event {
                        activity: relabel(ti, ei, e),
                        ..e.clone()
                    })
                    .collect(),
            })
            .collect();
        EventLog::from_traces(traces, self.source_meta.clone())
    }
}

/// Number of events per activity. Values sum to the total event count.
pub fn activity_frequency(log: &EventLog) -> BTreeMap<ActivityLabel, usize> {
    let mut counts = BTreeMap::new();
    for event in log.events() {
        *counts.entry(event.activity.clone()).or_insert(0) += 1;
    }
    counts
}

/// All numeric values recorded on events of `a`, in log order.
///
/// Events carrying several attributes contribute their values in attribute
/// name order.
pub fn numeric_series(log: &EventLog, a: &ActivityLabel) -> Result<Vec<f64>> {
    log.require(a)?;
    Ok(log
        .events()
        .filter(|e| &e.activity == a)
        .flat_map(|e| e.numeric_values.values().copied())
        .collect())
}

/// Values of one attribute recorded on events of `a`, in log order.
pub fn numeric_series_for(log: &EventLog, a: &ActivityLabel, attribute: &str) -> Result<Vec<f64>> {
    log.require(a)?;
    Ok(log
        .events()
        .filter(|e| &e.activity == a)
        .filter_map(|e| e.numeric_values.get(attribute).copied())
        .collect())
}

/// The attribute with the most recorded values on events of `a`
/// (ties go to the lexicographically smallest name), or `None` when no event
/// of `a` carries a numeric value.
pub fn dominant_attribute(log: &EventLog, a: &ActivityLabel) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for event in log.events().filter(|e| &e.activity == a) {
        for name in event.numeric_values.keys() {
            *counts.entry(name.as_str()).or_insert(0) += 1;
        }
    }
    let mut best: Option<(&str, usize)> = None;
    for (name, count) in counts {
        if best.map_or(true, |(_, c)| count > c) {
            best = Some((name, count));
        }
    }
    best.map(|(name, _)| name.to_string())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use chrono::TimeZone;

    pub(crate) fn ts(minute: i64) -> DateTime<FixedOffset> {
        FixedOffset::east_opt(0)
            .unwrap()
            .timestamp_opt(1_600_000_000 + minute * 60, 0)
            .unwrap()
    }

    /// Builds a log from label sequences, one trace per sequence.
    pub(crate) fn log_of(traces: &[&[&str]]) -> EventLog {
        let mut id = 0;
        let traces = traces
            .iter()
            .enumerate()
            .map(|(ti, labels)| Trace {
                case_id: format!("c{ti}"),
                events: labels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        id += 1;
                        Event {
                            id,
                            activity: ActivityLabel::new(*l).unwrap(),
                            timestamp: ts(i as i64),
                            numeric_values: BTreeMap::new(),
                        }
                    })
                    .collect(),
            })
            .collect();
        EventLog::from_traces(traces, SourceMeta::memory()).unwrap()
    }

    fn label(s: &str) -> ActivityLabel {
        ActivityLabel::new(s).unwrap()
    }

    #[test]
    fn frequency_counts_events() {
        let log = log_of(&[&["a", "a", "b"]]);
        let freq = activity_frequency(&log);
        assert_eq!(freq[&label("a")], 2);
        assert_eq!(freq[&label("b")], 1);
        assert_eq!(freq.values().sum::<usize>(), log.event_count());
    }

    #[test]
    fn empty_label_rejected() {
        assert!(ActivityLabel::new("").is_err());
    }

    #[test]
    fn labels_are_case_sensitive() {
        let log = log_of(&[&["BloodPressure", "blood pressure", "bloodpressure"]]);
        assert_eq!(log.activities().len(), 3);
    }

    #[test]
    fn events_sorted_with_stable_ties() {
        let mk = |id, l: &str, m| Event {
            id,
            activity: label(l),
            timestamp: ts(m),
            numeric_values: BTreeMap::new(),
        };
        let trace = Trace {
            case_id: "c".into(),
            events: vec![mk(1, "late", 5), mk(2, "tie1", 1), mk(3, "tie2", 1)],
        };
        let log = EventLog::from_traces(vec![trace], SourceMeta::memory()).unwrap();
        let order: Vec<_> = log.traces()[0].activities().map(|a| a.as_str()).collect();
        assert_eq!(order, ["tie1", "tie2", "late"]);
    }

    #[test]
    fn duplicate_event_id_rejected() {
        let e = Event {
            id: 7,
            activity: label("a"),
            timestamp: ts(0),
            numeric_values: BTreeMap::new(),
        };
        let trace = Trace {
            case_id: "c".into(),
            events: vec![e.clone(), e],
        };
        assert!(EventLog::from_traces(vec![trace], SourceMeta::memory()).is_err());
    }

    #[test]
    fn numeric_series_cases() {
        let mut log = log_of(&[&["a", "a", "a", "b"]]);
        let mut traces = log.traces().to_vec();
        traces[0].events[0].numeric_values.insert("v".into(), 1.0);
        traces[0].events[2].numeric_values.insert("v".into(), 2.0);
        log = EventLog::from_traces(traces, SourceMeta::memory()).unwrap();
        assert_eq!(numeric_series(&log, &label("a")).unwrap(), vec![1.0, 2.0]);
        assert!(numeric_series(&log, &label("b")).unwrap().is_empty());
        assert!(matches!(
            numeric_series(&log, &label("zzz")),
            Err(Error::UnknownActivity(_))
        ));
        assert_eq!(dominant_attribute(&log, &label("a")).as_deref(), Some("v"));
        assert_eq!(dominant_attribute(&log, &label("b")), None);
    }

    #[test]
    fn non_finite_value_rejected() {
        let log = log_of(&[&["a"]]);
        let mut traces = log.traces().to_vec();
        traces[0].events[0].numeric_values.insert("v".into(), f64::NAN);
        assert!(EventLog::from_traces(traces, SourceMeta::memory()).is_err());
    }
}
