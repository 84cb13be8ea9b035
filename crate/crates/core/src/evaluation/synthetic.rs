//! A seeded generator of emergency-department style logs.
//!
//! Sixteen activities: registration and triage, three laboratory tests with
//! numeric results (`CRP`, `Leucocytes`, `LacticAcid`), IV treatment,
//! admission, repeated follow-up labs and one of five release variants.
//! Each patient follows one of four pathways. `Release C`, `Release D` and
//! `Release E` share a pathway and are interchangeable by construction;
//! every other pair of labels differs in context or in values.

use std::collections::BTreeMap;

use chrono::{Duration, FixedOffset, TimeZone};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::event_log::{ActivityLabel, Event, EventLog, SourceMeta, Trace};

/// The interchangeable release labels.
pub const RELEASE_VARIANTS: [&str; 3] = ["Release C", "Release D", "Release E"];

#[derive(Clone, Debug, PartialEq)]
pub struct HospitalLogParams {
    pub traces: usize,
    /// Add or drop follow-up lab events until the log has exactly this many events.
    pub exact_events: Option<usize>,
    pub seed: u64,
}

impl HospitalLogParams {
    pub fn base(seed: u64) -> Self {
        HospitalLogParams {
            traces: 500,
            exact_events: None,
            seed,
        }
    }

    /// 1050 traces and 15214 events over 16 activities.
    pub fn sepsis_shaped(seed: u64) -> Self {
        HospitalLogParams {
            traces: 1050,
            exact_events: Some(15214),
            seed,
        }
    }
}

#[derive(Clone, Copy)]
struct Lab {
    name: &'static str,
    mean: f64,
    sd: f64,
    floor: f64,
}

const LABS: [Lab; 3] = [
    Lab {
        name: "CRP",
        mean: 110.0,
        sd: 50.0,
        floor: 1.0,
    },
    Lab {
        name: "Leucocytes",
        mean: 12.0,
        sd: 5.0,
        floor: 0.1,
    },
    Lab {
        name: "LacticAcid",
        mean: 2.0,
        sd: 1.0,
        floor: 0.2,
    },
];

struct Step {
    label: &'static str,
    value: Option<(&'static str, f64)>,
    follow_up: bool,
}

struct Generator {
    rng: ChaCha8Rng,
    normals: Vec<Normal<f64>>,
}

impl Generator {
    fn lab(&mut self, which: usize, follow_up: bool) -> Step {
        let lab = LABS[which];
        let raw = self.normals[which].sample(&mut self.rng).max(lab.floor);
        Step {
            label: lab.name,
            value: Some((lab.name, (raw * 10.0).round() / 10.0)),
            follow_up,
        }
    }

    fn plain(label: &'static str) -> Step {
        Step {
            label,
            value: None,
            follow_up: false,
        }
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    fn trace(&mut self) -> Vec<Step> {
        let mut steps = vec![
            Self::plain("ER Registration"),
            Self::plain("ER Triage"),
            Self::plain("ER Sepsis Triage"),
        ];
        let mut first_labs: Vec<usize> = [(0, 0.9), (1, 0.9), (2, 0.8)]
            .into_iter()
            .filter(|&(_, p)| self.chance(p))
            .map(|(i, _)| i)
            .collect();
        if first_labs.len() > 1 && self.chance(0.5) {
            first_labs.swap(0, 1);
        }
        for i in first_labs {
            let s = self.lab(i, false);
            steps.push(s);
        }
        match self.rng.random_range(0..100) {
            // discharged from the emergency room
            0..=14 => {
                if self.chance(0.7) {
                    steps.push(Self::plain("IV Antibiotics"));
                }
            }
            // intensive care: fluids first, lactic acid monitored every round
            15..=26 => {
                steps.push(Self::plain("IV Liquid"));
                steps.push(Self::plain("Admission IC"));
                for _ in 0..self.rng.random_range(1..=4) {
                    if self.chance(0.6) {
                        let s = self.lab(0, true);
                        steps.push(s);
                    }
                    let s = self.lab(2, true);
                    steps.push(s);
                }
                steps.push(Self::plain("Release B"));
                if self.chance(0.2) {
                    steps.push(Self::plain("Return ER"));
                }
            }
            // short normal-care stay with one of the equivalent releases
            27..=44 => {
                if self.chance(0.15) {
                    steps.push(Self::plain("IV Liquid"));
                }
                steps.push(Self::plain("IV Antibiotics"));
                steps.push(Self::plain("Admission NC"));
                let release = match self.rng.random_range(0..10) {
                    0..=4 => "Release C",
                    5..=7 => "Release D",
                    _ => "Release E",
                };
                steps.push(Self::plain(release));
            }
            // normal care with follow-up labs
            _ => {
                if self.chance(0.15) {
                    steps.push(Self::plain("IV Liquid"));
                }
                steps.push(Self::plain("IV Antibiotics"));
                steps.push(Self::plain("Admission NC"));
                for _ in 0..self.rng.random_range(1..=5) {
                    for i in [0, 1] {
                        if self.chance(0.9) {
                            let s = self.lab(i, true);
                            steps.push(s);
                        }
                    }
                }
                steps.push(Self::plain("Release A"));
                if self.chance(0.45) {
                    steps.push(Self::plain("Return ER"));
                    if self.chance(0.5) {
                        let s = self.lab(0, false);
                        steps.push(s);
                    }
                }
            }
        }
        steps
    }

    fn extra_follow_up(&mut self, after: &str) -> Step {
        let which = match after {
            "CRP" => 1,
            "Leucocytes" => 0,
            _ => 2,
        };
        self.lab(which, true)
    }
}

/// Generates a log; identical parameters give identical logs.
pub fn hospital_log(params: &HospitalLogParams) -> Result<EventLog> {
    if params.traces == 0 {
        return Err(Error::Config("need at least one trace".into()));
    }
    let mut gen = Generator {
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        normals: LABS
            .iter()
            .map(|l| Normal::new(l.mean, l.sd).expect("valid normal"))
            .collect(),
    };
    let mut traces: Vec<Vec<Step>> = (0..params.traces).map(|_| gen.trace()).collect();

    if let Some(target) = params.exact_events {
        let mut total: usize = traces.iter().map(Vec::len).sum();
        while total > target {
            let t = gen.rng.random_range(0..traces.len());
            if let Some(pos) = traces[t].iter().rposition(|s| s.follow_up) {
                traces[t].remove(pos);
                total -= 1;
            } else if traces.iter().all(|tr| !tr.iter().any(|s| s.follow_up)) {
                return Err(Error::Config(format!("cannot shrink log to {target} events")));
            }
        }
        while total < target {
            let t = gen.rng.random_range(0..traces.len());
            // Only patients with a follow-up round get more of them.
            if let Some(pos) = traces[t].iter().rposition(|s| s.follow_up) {
                let step = gen.extra_follow_up(traces[t][pos].label);
                traces[t].insert(pos + 1, step);
                total += 1;
            }
        }
    }

    let origin = FixedOffset::east_opt(3600)
        .expect("valid offset")
        .with_ymd_and_hms(2014, 1, 1, 8, 0, 0)
        .single()
        .expect("valid start");
    let mut next_id = 0u64;
    let mut out = Vec::with_capacity(traces.len());
    for (t, steps) in traces.into_iter().enumerate() {
        let mut time = origin + Duration::minutes(37 * t as i64 + gen.rng.random_range(0..30));
        let mut events = Vec::with_capacity(steps.len());
        for step in steps {
            time += Duration::minutes(gen.rng.random_range(1..=180));
            let mut numeric_values = BTreeMap::new();
            if let Some((k, v)) = step.value {
                numeric_values.insert(k.to_string(), v);
            }
            events.push(Event {
                id: next_id,
                activity: ActivityLabel::new(step.label)?,
                timestamp: time,
                numeric_values,
            });
            next_id += 1;
        }
        out.push(Trace {
            case_id: format!("case-{t:05}"),
            events,
        });
    }
    EventLog::from_traces(out, SourceMeta::memory())
}

/// All pairs of the interchangeable release labels.
pub fn release_pairs() -> Vec<(ActivityLabel, ActivityLabel)> {
    let l = |s: &str| ActivityLabel::new(s).expect("non-empty");
    vec![
        (l(RELEASE_VARIANTS[0]), l(RELEASE_VARIANTS[1])),
        (l(RELEASE_VARIANTS[0]), l(RELEASE_VARIANTS[2])),
        (l(RELEASE_VARIANTS[1]), l(RELEASE_VARIANTS[2])),
    ]
}
