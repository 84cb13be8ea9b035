//! Reading and writing the subset of XES used here: `log/trace/event`
//! elements with `concept:name`, `time:timestamp` and numeric attributes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::SecondsFormat;
use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{parse_timestamp, ActivityLabel, Event, EventLog, LogFormat, SourceMeta, Trace};
use crate::error::{Error, Result};

const NAME_KEY: &str = "concept:name";
const TIME_KEY: &str = "time:timestamp";

pub fn load_xes(path: impl AsRef<Path>, numeric_keys: &BTreeSet<String>) -> Result<EventLog> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut log = read_xes(BufReader::new(file), numeric_keys)?;
    log.source_meta.filename = Some(path.display().to_string());
    Ok(log)
}

#[derive(Default)]
struct PendingEvent {
    name: Option<String>,
    timestamp: Option<String>,
    values: BTreeMap<String, f64>,
    offset: u64,
}

struct Attr {
    kind: Vec<u8>,
    key: String,
    value: String,
}

fn read_attr(start: &BytesStart<'_>, offset: u64) -> Result<Option<Attr>> {
    let kind = start.name().as_ref().to_vec();
    if !matches!(
        kind.as_slice(),
        b"string" | b"date" | b"float" | b"int" | b"boolean" | b"id"
    ) {
        return Ok(None);
    }
    let mut key = None;
    let mut value = None;
    for attr in start.attributes() {
        let attr = attr.map_err(|e| Error::Xml {
            offset,
            message: e.to_string(),
        })?;
        let text = attr
            .unescape_value()
            .map_err(|e| Error::Xml {
                offset,
                message: e.to_string(),
            })?
            .into_owned();
        match attr.key.as_ref() {
            b"key" => key = Some(text),
            b"value" => value = Some(text),
            _ => {}
        }
    }
    Ok(match (key, value) {
        (Some(key), Some(value)) => Some(Attr { kind, key, value }),
        _ => None,
    })
}

/// Keys of `float`/`int` attributes that appear on events.
pub fn xes_numeric_keys<R: BufRead>(input: R) -> Result<BTreeSet<String>> {
    let mut reader = Reader::from_reader(input);
    let mut buf = Vec::new();
    let mut stack: Vec<Vec<u8>> = Vec::new();
    let mut keys = BTreeSet::new();
    loop {
        let offset = reader.buffer_position();
        let event = reader.read_event_into(&mut buf).map_err(|e| Error::Xml {
            offset: reader.error_position(),
            message: e.to_string(),
        })?;
        match &event {
            XmlEvent::Start(s) | XmlEvent::Empty(s) => {
                if stack.last().map(Vec::as_slice) == Some(b"event") {
                    if let Some(attr) = read_attr(s, offset)? {
                        if matches!(attr.kind.as_slice(), b"float" | b"int") {
                            keys.insert(attr.key);
                        }
                    }
                }
                if matches!(event, XmlEvent::Start(_)) {
                    stack.push(s.name().as_ref().to_vec());
                }
            }
            XmlEvent::End(_) => {
                stack.pop();
            }
            XmlEvent::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    Ok(keys)
}

/// Parses XES from a reader. Only attributes named in `numeric_keys` are kept
/// as numeric values; events without `concept:name` are skipped and counted.
pub fn read_xes<R: BufRead>(input: R, numeric_keys: &BTreeSet<String>) -> Result<EventLog> {
    let mut reader = Reader::from_reader(input);
    reader.config_mut().trim_text(true);

    let mut buf = Vec::new();
    let mut stack: Vec<Vec<u8>> = Vec::new();
    let mut traces = Vec::new();
    let mut case_id: Option<String> = None;
    let mut events: Vec<Event> = Vec::new();
    let mut pending: Option<PendingEvent> = None;
    let mut next_id = 0u64;
    let mut meta = SourceMeta {
        filename: None,
        format: LogFormat::Xes,
        rows: 0,
        skipped_events: 0,
        date_only_timestamps: 0,
    };

    loop {
        let offset = reader.buffer_position();
        let event = reader.read_event_into(&mut buf).map_err(|e| Error::Xml {
            offset: reader.error_position(),
            message: e.to_string(),
        })?;
        let (start, is_empty) = match &event {
            XmlEvent::Start(s) => (Some(s.clone()), false),
            XmlEvent::Empty(s) => (Some(s.clone()), true),
            _ => (None, false),
        };

        if let Some(start) = start {
            let name = start.name().as_ref().to_vec();
            let parent = stack.last().map(Vec::as_slice);
            match (parent, name.as_slice()) {
                (Some(b"log"), b"trace") => {
                    case_id = None;
                    events.clear();
                }
                (Some(b"trace"), b"event") => {
                    pending = Some(PendingEvent {
                        offset,
                        ..Default::default()
                    });
                }
                (Some(b"trace"), _) => {
                    if let Some(attr) = read_attr(&start, offset)? {
                        if attr.key == NAME_KEY {
                            case_id = Some(attr.value);
                        }
                    }
                }
                (Some(b"event"), _) => {
                    if let (Some(p), Some(attr)) = (pending.as_mut(), read_attr(&start, offset)?) {
                        if attr.key == NAME_KEY {
                            p.name = Some(attr.value);
                        } else if attr.key == TIME_KEY && attr.kind == b"date" {
                            p.timestamp = Some(attr.value);
                        } else if numeric_keys.contains(&attr.key)
                            && matches!(attr.kind.as_slice(), b"float" | b"int")
                        {
                            let v: f64 = attr.value.trim().parse().map_err(|_| Error::Xml {
                                offset,
                                message: format!("bad numeric value `{}`", attr.value),
                            })?;
                            if !v.is_finite() {
                                return Err(Error::Xml {
                                    offset,
                                    message: format!("non-finite value for `{}`", attr.key),
                                });
                            }
                            p.values.insert(attr.key, v);
                        }
                    }
                }
                _ => {}
            }
            if is_empty {
                // <trace/> or <event/> with no children still close here.
                close_element(
                    &name,
                    stack.last().map(Vec::as_slice),
                    &mut pending,
                    &mut events,
                    &mut case_id,
                    &mut traces,
                    &mut next_id,
                    &mut meta,
                )?;
            } else {
                stack.push(name);
            }
        } else {
            match event {
                XmlEvent::End(_) => {
                    let name = stack.pop().unwrap_or_default();
                    close_element(
                        &name,
                        stack.last().map(Vec::as_slice),
                        &mut pending,
                        &mut events,
                        &mut case_id,
                        &mut traces,
                        &mut next_id,
                        &mut meta,
                    )?;
                }
                XmlEvent::Eof => break,
                _ => {}
            }
        }
        buf.clear();
    }

    if !stack.is_empty() {
        return Err(Error::Xml {
            offset: reader.buffer_position(),
            message: "unexpected end of document".into(),
        });
    }
    if meta.skipped_events > 0 {
        log::warn!("skipped {} events without {NAME_KEY}", meta.skipped_events);
    }
    EventLog::from_traces(traces, meta)
}

#[allow(clippy::too_many_arguments)]
fn close_element(
    name: &[u8],
    parent: Option<&[u8]>,
    pending: &mut Option<PendingEvent>,
    events: &mut Vec<Event>,
    case_id: &mut Option<String>,
    traces: &mut Vec<Trace>,
    next_id: &mut u64,
    meta: &mut SourceMeta,
) -> Result<()> {
    match (parent, name) {
        (Some(b"trace"), b"event") => {
            let Some(p) = pending.take() else {
                return Ok(());
            };
            let Some(label) = p.name.filter(|n| !n.is_empty()) else {
                meta.skipped_events += 1;
                return Ok(());
            };
            let raw = p.timestamp.ok_or_else(|| Error::Xml {
                offset: p.offset,
                message: format!("event `{label}` has no {TIME_KEY}"),
            })?;
            let (timestamp, date_only) = parse_timestamp(&raw).ok_or_else(|| Error::Xml {
                offset: p.offset,
                message: format!("unparseable timestamp `{raw}`"),
            })?;
            if date_only {
                meta.date_only_timestamps += 1;
            }
            events.push(Event {
                id: *next_id,
                activity: ActivityLabel::new(label)?,
                timestamp,
                numeric_values: p.values,
            });
            *next_id += 1;
            meta.rows += 1;
        }
        (Some(b"log"), b"trace") => {
            let case = case_id
                .take()
                .unwrap_or_else(|| format!("trace-{}", traces.len()));
            traces.push(Trace {
                case_id: case,
                events: std::mem::take(events),
            });
        }
        _ => {}
    }
    Ok(())
}

/// Writes the log as XES with names, timestamps and numeric attributes.
pub fn write_xes<W: Write>(log: &EventLog, mut out: W) -> Result<()> {
    let io = |e| Error::io("<xes output>", e);
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).map_err(io)?;
    writeln!(out, r#"<log xes.version="1.0" xes.features="">"#).map_err(io)?;
    for trace in log.traces() {
        writeln!(out, "  <trace>").map_err(io)?;
        writeln!(
            out,
            r#"    <string key="{NAME_KEY}" value="{}"/>"#,
            escape(trace.case_id.as_str())
        )
        .map_err(io)?;
        for event in &trace.events {
            writeln!(out, "    <event>").map_err(io)?;
            writeln!(
                out,
                r#"      <string key="{NAME_KEY}" value="{}"/>"#,
                escape(event.activity.as_str())
            )
            .map_err(io)?;
            writeln!(
                out,
                r#"      <date key="{TIME_KEY}" value="{}"/>"#,
                event.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true)
            )
            .map_err(io)?;
            for (key, value) in &event.numeric_values {
                writeln!(out, r#"      <float key="{}" value="{value}"/>"#, escape(key.as_str()))
                    .map_err(io)?;
            }
            writeln!(out, "    </event>").map_err(io)?;
        }
        writeln!(out, "  </trace>").map_err(io)?;
    }
    writeln!(out, "</log>").map_err(io)?;
    Ok(())
}
