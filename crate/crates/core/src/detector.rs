//! Combining per-perspective scores into redundancy verdicts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control_flow::{ControlFlowContext, ControlFlowOptions};
use crate::data_value::{BinRule, DataValueContext, DataValueOptions, DEFAULT_THETA_A};
use crate::error::{Error, Result};
use crate::event_log::{activity_frequency, ActivityLabel, EventLog};
use crate::graph::DEFAULT_THETA_LD;
use crate::matrix::{Perspective, PerspectiveScore, SimilarityMatrix};
use crate::semantic::{semantic_matrix, SemanticProvider};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const DEFAULT_F_LOW: f64 = 0.01;

/// How many applicable perspectives must be satisfied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combination {
    All,
    Any,
    AtLeast(usize),
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Combination::All => f.write_str("all"),
            Combination::Any => f.write_str("any"),
            Combination::AtLeast(k) => write!(f, "at_least({k})"),
        }
    }
}

impl std::str::FromStr for Combination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "all" => Ok(Combination::All),
            "any" => Ok(Combination::Any),
            _ => {
                let k = s
                    .strip_prefix("at-least:")
                    .or_else(|| s.strip_prefix("at_least:"))
                    .or_else(|| s.strip_prefix("at_least(").and_then(|r| r.strip_suffix(')')))
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(|| Error::Config(format!("unknown combination `{s}`")))?;
                Ok(Combination::AtLeast(k))
            }
        }
    }
}

/// Alternative rule for pairs where one label is rare.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowFrequencyOverride {
    /// A label is rare when its share of all events is below this.
    pub f_low: f64,
    pub combination: Combination,
}

impl Default for LowFrequencyOverride {
    fn default() -> Self {
        LowFrequencyOverride {
            f_low: DEFAULT_F_LOW,
            combination: Combination::Any,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Control-flow threshold; `None` disables the perspective.
    pub theta_c: Option<f64>,
    pub theta_d: Option<f64>,
    pub theta_s: Option<f64>,
    pub combination: Combination,
    pub low_frequency: Option<LowFrequencyOverride>,
    pub theta_ld: f64,
    pub theta_a: f64,
    pub trim: f64,
    pub group_transitively: bool,
    /// Treat inapplicable scores as 1 instead of skipping them.
    pub strict_na: bool,
    pub control_flow_weights: Option<[f64; 4]>,
    pub trace_boundaries: bool,
    pub bin_rule: BinRule,
    pub attribute_overrides: BTreeMap<String, String>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            theta_c: Some(0.25),
            theta_d: Some(0.1),
            theta_s: None,
            combination: Combination::All,
            low_frequency: None,
            theta_ld: DEFAULT_THETA_LD,
            theta_a: DEFAULT_THETA_A,
            trim: 0.0,
            group_transitively: false,
            strict_na: false,
            control_flow_weights: None,
            trace_boundaries: true,
            bin_rule: BinRule::default(),
            attribute_overrides: BTreeMap::new(),
        }
    }
}

impl DetectorConfig {
    pub fn threshold(&self, p: Perspective) -> Option<f64> {
        match p {
            Perspective::ControlFlow => self.theta_c,
            Perspective::DataValue => self.theta_d,
            Perspective::Semantic => self.theta_s,
        }
    }

    pub fn enabled(&self) -> Vec<Perspective> {
        Perspective::ALL
            .into_iter()
            .filter(|p| self.threshold(*p).is_some())
            .collect()
    }

    pub fn control_flow_options(&self) -> ControlFlowOptions {
        ControlFlowOptions {
            theta_ld: self.theta_ld,
            weights: self.control_flow_weights,
            trace_boundaries: self.trace_boundaries,
        }
    }

    pub fn data_value_options(&self) -> DataValueOptions {
        DataValueOptions {
            theta_a: self.theta_a,
            trim: self.trim,
            bin_rule: self.bin_rule,
            attribute_overrides: self.attribute_overrides.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let enabled = self.enabled();
        if enabled.is_empty() {
            return Err(Error::Config("at least one perspective threshold must be set".into()));
        }
        for p in &enabled {
            let t = self.threshold(*p).unwrap_or_default();
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("{p} threshold must lie in [0, 1], got {t}")));
            }
        }
        let check_k = |c: Combination| match c {
            Combination::AtLeast(k) if k == 0 || k > enabled.len() => Err(Error::Config(format!(
                "at_least({k}) needs between 1 and {} enabled perspectives",
                enabled.len()
            ))),
            _ => Ok(()),
        };
        check_k(self.combination)?;
        if let Some(lf) = &self.low_frequency {
            check_k(lf.combination)?;
            if !(0.0..=1.0).contains(&lf.f_low) {
                return Err(Error::Config(format!("f_low must lie in [0, 1], got {}", lf.f_low)));
            }
        }
        self.control_flow_options().validate()?;
        self.data_value_options().validate()
    }
}

/// Scores of one pair; `None` marks a disabled perspective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub control_flow: Option<PerspectiveScore>,
    pub data_value: Option<PerspectiveScore>,
    pub semantic: Option<PerspectiveScore>,
}

impl PairScores {
    pub fn get(&self, p: Perspective) -> Option<PerspectiveScore> {
        match p {
            Perspective::ControlFlow => self.control_flow,
            Perspective::DataValue => self.data_value,
            Perspective::Semantic => self.semantic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub a: ActivityLabel,
    pub b: ActivityLabel,
    pub scores: PairScores,
    pub satisfied: Vec<Perspective>,
    pub redundant: bool,
    pub rule: String,
}

pub const RULE_UNDECIDABLE: &str = "undecidable";

/// Applies the threshold rules to one pair's scores.
///
/// Enabled perspectives with an inapplicable score are left out of the count
/// (or scored 1 under `strict_na`). A score satisfies its perspective when it
/// is at most the threshold. When either label's event share is below the
/// low-frequency cut-off, the override combination is used.
pub fn evaluate_pair(
    a: &ActivityLabel,
    b: &ActivityLabel,
    scores: PairScores,
    freq_a: f64,
    freq_b: f64,
    cfg: &DetectorConfig,
) -> PairVerdict {
    let mut applicable = 0usize;
    let mut satisfied = Vec::new();
    for p in cfg.enabled() {
        let threshold = cfg.threshold(p).unwrap_or_default();
        let value = match scores.get(p) {
            Some(PerspectiveScore::Value(v)) => v,
            Some(PerspectiveScore::NotApplicable) if cfg.strict_na => 1.0,
            _ => continue,
        };
        applicable += 1;
        if value <= threshold {
            satisfied.push(p);
        }
    }

    let (combination, prefix) = match cfg.low_frequency {
        Some(lf) if freq_a.min(freq_b) < lf.f_low => (lf.combination, "low_frequency:"),
        _ => (cfg.combination, ""),
    };
    let (redundant, rule) = if applicable == 0 {
        (false, RULE_UNDECIDABLE.to_string())
    } else {
        let hit = match combination {
            Combination::All => satisfied.len() == applicable,
            Combination::Any => !satisfied.is_empty(),
            Combination::AtLeast(k) => satisfied.len() >= k,
        };
        (hit, format!("{prefix}{combination}"))
    };
    PairVerdict {
        a: a.clone(),
        b: b.clone(),
        scores,
        satisfied,
        redundant,
        rule,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogFingerprint {
    pub traces: usize,
    pub events: usize,
    pub activities: usize,
    /// SHA-256 over case ids, labels, timestamps and numeric values.
    pub sha256: String,
}

impl LogFingerprint {
    pub fn of(log: &EventLog) -> Self {
        let mut hasher = Sha256::new();
        for trace in log.traces() {
            hasher.update(b"T");
            hasher.update(trace.case_id.as_bytes());
            hasher.update([0]);
            for e in &trace.events {
                hasher.update(b"E");
                hasher.update(e.activity.as_str().as_bytes());
                hasher.update([0]);
                hasher.update(e.timestamp.to_rfc3339().as_bytes());
                for (k, v) in &e.numeric_values {
                    hasher.update(k.as_bytes());
                    hasher.update(v.to_le_bytes());
                }
            }
        }
        LogFingerprint {
            traces: log.traces().len(),
            events: log.event_count(),
            activities: log.activities().len(),
            sha256: format!("{:x}", hasher.finalize()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub tool_version: String,
    pub config: DetectorConfig,
    pub semantic_provider: Option<String>,
    pub log_fingerprint: LogFingerprint,
    pub pairs: Vec<PairVerdict>,
    pub redundant_pairs: Vec<(ActivityLabel, ActivityLabel)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub groups: Option<Vec<Vec<ActivityLabel>>>,
}

/// The enabled perspectives' matrices for one log.
#[derive(Debug)]
pub struct Matrices {
    pub control_flow: Option<SimilarityMatrix>,
    pub data_value: Option<SimilarityMatrix>,
    pub semantic: Option<SimilarityMatrix>,
}

impl Matrices {
    pub fn compute(log: &EventLog, cfg: &DetectorConfig, provider: Option<&dyn SemanticProvider>) -> Result<Self> {
        cfg.validate()?;
        if log.is_empty() {
            return Err(Error::EmptyLog);
        }
        if cfg.theta_s.is_some() && provider.is_none() {
            return Err(Error::Config("semantic threshold set but no semantic provider given".into()));
        }
        let ((control_flow, data_value), semantic) = rayon::join(
            || {
                rayon::join(
                    || {
                        cfg.theta_c
                            .map(|_| ControlFlowContext::new(log, &cfg.control_flow_options())?.matrix())
                            .transpose()
                    },
                    || {
                        cfg.theta_d
                            .map(|_| DataValueContext::new(log, &cfg.data_value_options())?.matrix())
                            .transpose()
                    },
                )
            },
            || match (cfg.theta_s, provider) {
                (Some(_), Some(p)) => semantic_matrix(log, p).map(Some),
                _ => Ok(None),
            },
        );
        Ok(Matrices {
            control_flow: control_flow?,
            data_value: data_value?,
            semantic: semantic?,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &SimilarityMatrix> {
        [&self.control_flow, &self.data_value, &self.semantic]
            .into_iter()
            .flatten()
    }
}

/// Runs every enabled perspective and judges every unordered label pair.
pub fn detect(log: &EventLog, cfg: &DetectorConfig, provider: Option<&dyn SemanticProvider>) -> Result<DetectionReport> {
    let matrices = Matrices::compute(log, cfg, provider)?;
    assemble_report(log, cfg, provider, &matrices)
}

pub fn assemble_report(
    log: &EventLog,
    cfg: &DetectorConfig,
    provider: Option<&dyn SemanticProvider>,
    matrices: &Matrices,
) -> Result<DetectionReport> {
    let total = log.event_count().max(1) as f64;
    let share: BTreeMap<ActivityLabel, f64> = activity_frequency(log)
        .into_iter()
        .map(|(a, n)| (a, n as f64 / total))
        .collect();
    let labels: Vec<&ActivityLabel> = log.activities().iter().collect();
    let lookup = |m: &Option<SimilarityMatrix>, a, b| m.as_ref().and_then(|m| m.get(a, b));

    let mut pairs = Vec::with_capacity(labels.len() * labels.len().saturating_sub(1) / 2);
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            let scores = PairScores {
                control_flow: lookup(&matrices.control_flow, a, b),
                data_value: lookup(&matrices.data_value, a, b),
                semantic: lookup(&matrices.semantic, a, b),
            };
            pairs.push(evaluate_pair(a, b, scores, share[*a], share[*b], cfg));
        }
    }
    let redundant_pairs: Vec<(ActivityLabel, ActivityLabel)> = pairs
        .iter()
        .filter(|v| v.redundant)
        .map(|v| (v.a.clone(), v.b.clone()))
        .collect();
    let groups = cfg.group_transitively.then(|| group_pairs(&redundant_pairs));
    Ok(DetectionReport {
        tool_version: TOOL_VERSION.to_string(),
        config: cfg.clone(),
        semantic_provider: provider
            .filter(|_| cfg.theta_s.is_some())
            .map(|p| p.name().to_string()),
        log_fingerprint: LogFingerprint::of(log),
        pairs,
        redundant_pairs,
        groups,
    })
}

/// Connected components of the redundant-pair graph, each sorted, in order
/// of their smallest label.
pub fn group_pairs(pairs: &[(ActivityLabel, ActivityLabel)]) -> Vec<Vec<ActivityLabel>> {
    let nodes: Vec<&ActivityLabel> = pairs
        .iter()
        .flat_map(|(a, b)| [a, b])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&ActivityLabel, usize> = nodes.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in pairs {
        let (ra, rb) = (find(&mut parent, index[a]), find(&mut parent, index[b]));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<ActivityLabel>> = BTreeMap::new();
    for (i, l) in nodes.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push((*l).clone());
    }
    groups.into_values().collect()
}

impl DetectionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per pair: `a,b,control_flow,data_value,semantic,satisfied,redundant,rule`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["a", "b", "control_flow", "data_value", "semantic", "satisfied", "redundant", "rule"])?;
        let cell = |s: Option<PerspectiveScore>| s.map(|s| s.to_string()).unwrap_or_default();
        for v in &self.pairs {
            let satisfied: Vec<&str> = v.satisfied.iter().map(|p| p.name()).collect();
            w.write_record([
                v.a.as_str(),
                v.b.as_str(),
                &cell(v.scores.control_flow),
                &cell(v.scores.data_value),
                &cell(v.scores.semantic),
                &satisfied.join(";"),
                if v.redundant { "true" } else { "false" },
                &v.rule,
            ])?;
        }
        w.flush().map_err(|e| Error::io("<report output>", e))?;
        Ok(())
    }

    /// Plain-text summary listing the redundant pairs with their scores.
    pub fn to_table(&self) -> String {
        let fp = &self.log_fingerprint;
        let mut out = format!(
            "{} | {} traces, {} events, {} activities | {} pairs evaluated\n",
            self.tool_version,
            fp.traces,
            fp.events,
            fp.activities,
            self.pairs.len()
        );
        if self.redundant_pairs.is_empty() {
            out.push_str("no redundant label pairs found\n");
            return out;
        }
        let width = self
            .pairs
            .iter()
            .filter(|v| v.redundant)
            .map(|v| v.a.as_str().chars().count().max(v.b.as_str().chars().count()))
            .max()
            .unwrap_or(0)
            .max(7);
        out.push_str(&format!(
            "{:<width$}  {:<width$}  {:>12}  {:>10}  {:>8}  rule\n",
            "label a", "label b", "control_flow", "data_value", "semantic"
        ));
        let fmt = |s: Option<PerspectiveScore>| match s {
            Some(PerspectiveScore::Value(v)) => format!("{v:.4}"),
            Some(PerspectiveScore::NotApplicable) => "NA".into(),
            None => "-".into(),
        };
        for v in self.pairs.iter().filter(|v| v.redundant) {
            out.push_str(&format!(
                "{:<width$}  {:<width$}  {:>12}  {:>10}  {:>8}  {}\n",
                v.a.as_str(),
                v.b.as_str(),
                fmt(v.scores.control_flow),
                fmt(v.scores.data_value),
                fmt(v.scores.semantic),
                v.rule
            ));
        }
        if let Some(groups) = &self.groups {
            out.push_str("groups:\n");
            for g in groups {
                let names: Vec<&str> = g.iter().map(|l| l.as_str()).collect();
                out.push_str(&format!("  {{{}}}\n", names.join(", ")));
            }
        }
        out
    }
}
