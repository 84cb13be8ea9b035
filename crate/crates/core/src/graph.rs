//! Directly- and indirectly-follows graphs with arc counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_log::{ActivityLabel, EventLog};

/// Default long-distance significance threshold for indirectly-follows arcs.
pub const DEFAULT_THETA_LD: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Directly,
    Indirectly,
}

/// A weighted digraph over activity labels. Every arc count is at least 1.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationGraph {
    kind: RelationKind,
    nodes: BTreeSet<ActivityLabel>,
    succ: BTreeMap<ActivityLabel, BTreeMap<ActivityLabel, u64>>,
    pred: BTreeMap<ActivityLabel, BTreeMap<ActivityLabel, u64>>,
}

impl RelationGraph {
    fn empty(kind: RelationKind, nodes: BTreeSet<ActivityLabel>) -> Self {
        RelationGraph {
            kind,
            nodes,
            succ: BTreeMap::new(),
            pred: BTreeMap::new(),
        }
    }

    fn add_arc(&mut self, a: &ActivityLabel, b: &ActivityLabel, count: u64) {
        debug_assert!(count > 0);
        *self
            .succ
            .entry(a.clone())
            .or_default()
            .entry(b.clone())
            .or_insert(0) += count;
        *self
            .pred
            .entry(b.clone())
            .or_default()
            .entry(a.clone())
            .or_insert(0) += count;
    }

    pub fn kind(&self) -> RelationKind {
        self.kind
    }

    pub fn nodes(&self) -> &BTreeSet<ActivityLabel> {
        &self.nodes
    }

    /// All arcs in lexicographic (source, target) order.
    pub fn arcs(&self) -> impl Iterator<Item = (&ActivityLabel, &ActivityLabel, u64)> {
        self.succ
            .iter()
            .flat_map(|(a, targets)| targets.iter().map(move |(b, n)| (a, b, *n)))
    }

    pub fn arc_count(&self, a: &ActivityLabel, b: &ActivityLabel) -> Option<u64> {
        self.succ.get(a).and_then(|t| t.get(b)).copied()
    }

    pub fn total_count(&self) -> u64 {
        self.arcs().map(|(_, _, n)| n).sum()
    }

    fn require(&self, a: &ActivityLabel) -> Result<()> {
        if self.nodes.contains(a) {
            Ok(())
        } else {
            Err(Error::UnknownActivity(a.to_string()))
        }
    }

    /// Successors of `a` with arc counts, sorted by label.
    pub fn outgoing(&self, a: &ActivityLabel) -> Result<Vec<(ActivityLabel, u64)>> {
        self.require(a)?;
        Ok(neighbours(self.succ.get(a)))
    }

    /// Predecessors of `a` with arc counts, sorted by label.
    pub fn incoming(&self, a: &ActivityLabel) -> Result<Vec<(ActivityLabel, u64)>> {
        self.require(a)?;
        Ok(neighbours(self.pred.get(a)))
    }

    /// Graphviz rendering; edge labels carry the arc counts.
    pub fn to_dot(&self) -> String {
        let name = match self.kind {
            RelationKind::Directly => "dfg",
            RelationKind::Indirectly => "ifg",
        };
        let mut out = format!("digraph {name} {{\n");
        for node in &self.nodes {
            let _ = writeln!(out, "  \"{}\";", dot_escape(node.as_str()));
        }
        for (a, b, n) in self.arcs() {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{n}\"];",
                dot_escape(a.as_str()),
                dot_escape(b.as_str())
            );
        }
        out.push_str("}\n");
        out
    }
}

fn neighbours(map: Option<&BTreeMap<ActivityLabel, u64>>) -> Vec<(ActivityLabel, u64)> {
    map.map(|m| m.iter().map(|(l, n)| (l.clone(), *n)).collect())
        .unwrap_or_default()
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Counts adjacent label pairs over all traces.
pub fn build_dfg(log: &EventLog) -> RelationGraph {
    let mut counts: BTreeMap<(&ActivityLabel, &ActivityLabel), u64> = BTreeMap::new();
    for trace in log.traces() {
        for pair in trace.events.windows(2) {
            *counts.entry((&pair[0].activity, &pair[1].activity)).or_insert(0) += 1;
        }
    }
    let mut graph = RelationGraph::empty(RelationKind::Directly, log.activities().clone());
    for ((a, b), n) in counts {
        graph.add_arc(a, b, n);
    }
    graph
}

/// Trace-level co-occurrence statistics: how many traces contain each label,
/// and in how many traces one label occurs before another.
#[derive(Clone, Debug)]
pub struct PrecedenceStats {
    labels: Vec<ActivityLabel>,
    index: BTreeMap<ActivityLabel, usize>,
    traces_with: Vec<u64>,
    traces_preceding: Vec<u64>,
}

impl PrecedenceStats {
    pub fn from_log(log: &EventLog) -> Self {
        let labels: Vec<ActivityLabel> = log.activities().iter().cloned().collect();
        let index: BTreeMap<ActivityLabel, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        let k = labels.len();
        let mut traces_with = vec![0u64; k];
        let mut traces_preceding = vec![0u64; k * k];
        // Stamp of the last trace that counted a cell, so each trace counts once.
        let mut seen_in = vec![usize::MAX; k];
        let mut pair_in = vec![usize::MAX; k * k];

        for (t, trace) in log.traces().iter().enumerate() {
            let mut earlier: Vec<usize> = Vec::new();
            for event in &trace.events {
                let b = index[&event.activity];
                for &a in &earlier {
                    let cell = a * k + b;
                    if pair_in[cell] != t {
                        pair_in[cell] = t;
                        traces_preceding[cell] += 1;
                    }
                }
                if seen_in[b] != t {
                    seen_in[b] = t;
                    traces_with[b] += 1;
                    earlier.push(b);
                }
            }
        }
        PrecedenceStats {
            labels,
            index,
            traces_with,
            traces_preceding,
        }
    }

    fn idx(&self, a: &ActivityLabel) -> Result<usize> {
        self.index
            .get(a)
            .copied()
            .ok_or_else(|| Error::UnknownActivity(a.to_string()))
    }

    /// Number of traces containing `a`.
    pub fn traces_with(&self, a: &ActivityLabel) -> Result<u64> {
        Ok(self.traces_with[self.idx(a)?])
    }

    /// Number of traces in which some occurrence of `a` precedes some occurrence of `b`.
    pub fn traces_preceding(&self, a: &ActivityLabel, b: &ActivityLabel) -> Result<u64> {
        let k = self.labels.len();
        Ok(self.traces_preceding[self.idx(a)? * k + self.idx(b)?])
    }

    /// `2·|a ≫ b| / (|a| + |b| + 1)` over trace-level counts; lies in `[0, 1)`.
    pub fn significance(&self, a: &ActivityLabel, b: &ActivityLabel) -> Result<f64> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        Ok(self.significance_idx(ia, ib))
    }

    fn significance_idx(&self, a: usize, b: usize) -> f64 {
        let k = self.labels.len();
        let both = self.traces_preceding[a * k + b] as f64;
        2.0 * both / (self.traces_with[a] as f64 + self.traces_with[b] as f64 + 1.0)
    }
}

/// Long-distance significance of `a` eventually followed by `b`.
pub fn long_distance_significance(a: &ActivityLabel, b: &ActivityLabel, log: &EventLog) -> Result<f64> {
    log.require(a)?;
    log.require(b)?;
    PrecedenceStats::from_log(log).significance(a, b)
}

/// Indirectly-follows graph: arc `(a, b)` exists when `a` precedes `b` in at
/// least one trace and the pair's long-distance significance is at least
/// `theta_ld`. Counts are numbers of traces.
pub fn build_ifg(log: &EventLog, theta_ld: f64) -> Result<RelationGraph> {
    if !(0.0..=1.0).contains(&theta_ld) {
        return Err(Error::Config(format!(
            "long-distance threshold must lie in [0, 1], got {theta_ld}"
        )));
    }
    Ok(build_ifg_from_stats(log, &PrecedenceStats::from_log(log), theta_ld))
}

pub(crate) fn build_ifg_from_stats(log: &EventLog, stats: &PrecedenceStats, theta_ld: f64) -> RelationGraph {
    let mut graph = RelationGraph::empty(RelationKind::Indirectly, log.activities().clone());
    let k = stats.labels.len();
    for a in 0..k {
        for b in 0..k {
            let n = stats.traces_preceding[a * k + b];
            if n > 0 && stats.significance_idx(a, b) >= theta_ld {
                graph.add_arc(&stats.labels[a], &stats.labels[b], n);
            }
        }
    }
    graph
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::tests::log_of;

    fn l(s: &str) -> ActivityLabel {
        ActivityLabel::new(s).unwrap()
    }

    #[test]
    fn dfg_single_trace() {
        let g = build_dfg(&log_of(&[&["a", "b", "c"]]));
        let arcs: Vec<_> = g.arcs().map(|(a, b, n)| (a.as_str(), b.as_str(), n)).collect();
        assert_eq!(arcs, [("a", "b", 1), ("b", "c", 1)]);
    }

    #[test]
    fn dfg_self_arc() {
        let g = build_dfg(&log_of(&[&["a", "a"]]));
        assert_eq!(g.arc_count(&l("a"), &l("a")), Some(1));
    }

    #[test]
    fn dfg_counts_repeated_starts() {
        let traces: Vec<&[&str]> = vec![&["A", "H", "C"]; 50];
        let g = build_dfg(&log_of(&traces));
        assert_eq!(g.arc_count(&l("A"), &l("H")), Some(50));
    }

    #[test]
    fn ifg_without_threshold_is_eventually_follows() {
        let g = build_ifg(&log_of(&[&["a", "b", "c"]]), 0.0).unwrap();
        let arcs: Vec<_> = g.arcs().map(|(a, b, n)| (a.as_str(), b.as_str(), n)).collect();
        assert_eq!(arcs, [("a", "b", 1), ("a", "c", 1), ("b", "c", 1)]);
    }

    #[test]
    fn ifg_counts_traces_not_pairs() {
        let g = build_ifg(&log_of(&[&["a", "a", "b", "b"]]), 0.0).unwrap();
        assert_eq!(g.arc_count(&l("a"), &l("b")), Some(1));
        assert_eq!(g.arc_count(&l("a"), &l("a")), Some(1));
    }

    #[test]
    fn ifg_above_max_is_empty() {
        let g = build_ifg(&log_of(&[&["a", "b", "c"]]), 1.0).unwrap();
        assert_eq!(g.arcs().count(), 0);
        assert!(build_ifg(&log_of(&[&["a"]]), 1.01).is_err());
    }

    #[test]
    fn significance_values() {
        let log = log_of(&[&["a", "b"]]);
        let s = long_distance_significance(&l("a"), &l("b"), &log).unwrap();
        assert!((s - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(long_distance_significance(&l("b"), &l("a"), &log).unwrap(), 0.0);

        let nine: Vec<&[&str]> = vec![&["a", "x", "b"]; 9];
        let s = long_distance_significance(&l("a"), &l("b"), &log_of(&nine)).unwrap();
        assert!((s - 18.0 / 19.0).abs() < 1e-12);
    }

    #[test]
    fn neighbour_queries() {
        let g = build_dfg(&log_of(&[&["A", "H", "C"], &["A", "B", "C"]]));
        let out: Vec<_> = g.outgoing(&l("A")).unwrap().into_iter().map(|(x, _)| x.to_string()).collect();
        assert_eq!(out, ["B", "H"]);
        let inc: Vec<_> = g.incoming(&l("C")).unwrap().into_iter().map(|(x, _)| x.to_string()).collect();
        assert_eq!(inc, ["B", "H"]);
        assert!(g.outgoing(&l("C")).unwrap().is_empty());
        assert!(g.outgoing(&l("Z")).is_err());
    }

    #[test]
    fn dot_rendering() {
        let dot = build_dfg(&log_of(&[&["a", "b\"q"]])).to_dot();
        assert!(dot.starts_with("digraph dfg {"));
        assert!(dot.contains(r#""a" -> "b\"q" [label="1"];"#));
    }
}
