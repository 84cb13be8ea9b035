//! Control-flow dissimilarity between activity labels.
//!
//! Each label gets four neighbour distributions: successors and predecessors
//! in the directly-follows graph, and successors and predecessors in the
//! indirectly-follows graph. A neighbour's weight is its arc count divided by
//! the label's total arc count in that direction. Two labels are compared
//! direction by direction with EMD under the 0/1 ground distance, and the
//! four values are averaged.
//!
//! With [`ControlFlowOptions::trace_boundaries`] set, starting or ending a
//! trace counts as a directly-follows neighbour of its own
//! ([`Neighbour::Boundary`]). A label that ends 4% of its traces then keeps
//! that 4% of outgoing mass instead of having it spread over its successors.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::emd::{emd_unit_ground, Signature};
use crate::error::{Error, Result};
use crate::event_log::{ActivityLabel, EventLog};
use crate::graph::{build_dfg, build_ifg_from_stats, PrecedenceStats, RelationGraph, DEFAULT_THETA_LD};
use crate::matrix::{Perspective, PerspectiveScore, SimilarityMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Outgoing,
    Incoming,
}

/// A cluster in a neighbour distribution.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Neighbour {
    Activity(ActivityLabel),
    /// Start of trace (incoming) or end of trace (outgoing).
    Boundary,
}

impl fmt::Display for Neighbour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Neighbour::Activity(a) => a.fmt(f),
            Neighbour::Boundary => f.write_str("[boundary]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalSignature {
    pub activity: ActivityLabel,
    pub direction: Direction,
    pub signature: Signature<Neighbour>,
}

/// Neighbour distribution of `a` in `g`. Empty when `a` has no arcs that way.
pub fn directional_signature(g: &RelationGraph, a: &ActivityLabel, dir: Direction) -> Result<DirectionalSignature> {
    bounded_signature(g, a, dir, 0)
}

/// Like [`directional_signature`], with `boundary` extra occurrences of `a`
/// that start (incoming) or end (outgoing) a trace.
pub fn bounded_signature(
    g: &RelationGraph,
    a: &ActivityLabel,
    dir: Direction,
    boundary: u64,
) -> Result<DirectionalSignature> {
    let arcs = match dir {
        Direction::Outgoing => g.outgoing(a)?,
        Direction::Incoming => g.incoming(a)?,
    };
    let mut neighbours: Vec<(Neighbour, u64)> = arcs.into_iter().map(|(l, n)| (Neighbour::Activity(l), n)).collect();
    if boundary > 0 {
        neighbours.push((Neighbour::Boundary, boundary));
    }
    let total: u64 = neighbours.iter().map(|(_, n)| n).sum();
    let signature = if total == 0 {
        Signature::empty()
    } else {
        Signature::from_pairs(neighbours.into_iter().map(|(c, n)| (c, n as f64 / total as f64)))?
    };
    Ok(DirectionalSignature {
        activity: a.clone(),
        direction: dir,
        signature,
    })
}

/// Per label: number of traces it starts and number of traces it ends.
pub fn boundary_counts(log: &EventLog) -> BTreeMap<ActivityLabel, (u64, u64)> {
    let mut counts: BTreeMap<ActivityLabel, (u64, u64)> = BTreeMap::new();
    for trace in log.traces() {
        if let (Some(first), Some(last)) = (trace.events.first(), trace.events.last()) {
            counts.entry(first.activity.clone()).or_default().0 += 1;
            counts.entry(last.activity.clone()).or_default().1 += 1;
        }
    }
    counts
}

/// EMD of two neighbour distributions under the 0/1 ground distance.
/// Both empty gives 0, exactly one empty gives 1.
pub fn signature_dissimilarity(p: &Signature<Neighbour>, q: &Signature<Neighbour>) -> Result<f64> {
    match (p.is_empty(), q.is_empty()) {
        (true, true) => Ok(0.0),
        (true, false) | (false, true) => Ok(1.0),
        (false, false) => Ok(emd_unit_ground(p, q)?),
    }
}

pub fn directional_similarity(g: &RelationGraph, a: &ActivityLabel, b: &ActivityLabel, dir: Direction) -> Result<f64> {
    if a == b {
        return Err(Error::Config(format!("cannot compare `{a}` with itself")));
    }
    let p = directional_signature(g, a, dir)?;
    let q = directional_signature(g, b, dir)?;
    signature_dissimilarity(&p.signature, &q.signature)
}

/// Mean of the outgoing and incoming dissimilarities on one graph.
pub fn follows_similarity(g: &RelationGraph, a: &ActivityLabel, b: &ActivityLabel) -> Result<f64> {
    let out = directional_similarity(g, a, b, Direction::Outgoing)?;
    let inc = directional_similarity(g, a, b, Direction::Incoming)?;
    Ok((out + inc) / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlFlowOptions {
    pub theta_ld: f64,
    /// Weights for (directly-out, directly-in, indirectly-out, indirectly-in);
    /// `None` is the plain average.
    pub weights: Option<[f64; 4]>,
    /// Count trace start and end as directly-follows neighbours.
    pub trace_boundaries: bool,
}

impl Default for ControlFlowOptions {
    fn default() -> Self {
        ControlFlowOptions {
            theta_ld: DEFAULT_THETA_LD,
            weights: None,
            trace_boundaries: true,
        }
    }
}

impl ControlFlowOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta_ld) {
            return Err(Error::Config(format!(
                "long-distance threshold must lie in [0, 1], got {}",
                self.theta_ld
            )));
        }
        if let Some(w) = self.weights {
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config(format!("invalid control-flow weights {w:?}")));
            }
        }
        Ok(())
    }
}

/// Both graphs of a log with every label's four neighbour distributions.
#[derive(Debug)]
pub struct ControlFlowContext {
    pub dfg: RelationGraph,
    pub ifg: RelationGraph,
    weights: Option<[f64; 4]>,
    signatures: BTreeMap<ActivityLabel, [Signature<Neighbour>; 4]>,
}

impl ControlFlowContext {
    pub fn new(log: &EventLog, options: &ControlFlowOptions) -> Result<Self> {
        options.validate()?;
        if log.is_empty() {
            return Err(Error::EmptyLog);
        }
        let dfg = build_dfg(log);
        let ifg = build_ifg_from_stats(log, &PrecedenceStats::from_log(log), options.theta_ld);
        let bounds = if options.trace_boundaries {
            boundary_counts(log)
        } else {
            BTreeMap::new()
        };
        let mut signatures = BTreeMap::new();
        for a in log.activities() {
            let sig = |g: &RelationGraph, d| directional_signature(g, a, d).map(|s| s.signature);
            let (starts, ends) = bounds.get(a).copied().unwrap_or_default();
            signatures.insert(
                a.clone(),
                [
                    bounded_signature(&dfg, a, Direction::Outgoing, ends)?.signature,
                    bounded_signature(&dfg, a, Direction::Incoming, starts)?.signature,
                    sig(&ifg, Direction::Outgoing)?,
                    sig(&ifg, Direction::Incoming)?,
                ],
            );
        }
        Ok(ControlFlowContext {
            dfg,
            ifg,
            weights: options.weights,
            signatures,
        })
    }

    /// Directly-out, directly-in, indirectly-out and indirectly-in
    /// dissimilarities of `a` and `b`.
    pub fn breakdown(&self, a: &ActivityLabel, b: &ActivityLabel) -> Result<[f64; 4]> {
        if a == b {
            return Err(Error::Config(format!("cannot compare `{a}` with itself")));
        }
        let sa = self.signatures.get(a).ok_or_else(|| Error::UnknownActivity(a.to_string()))?;
        let sb = self.signatures.get(b).ok_or_else(|| Error::UnknownActivity(b.to_string()))?;
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = signature_dissimilarity(&sa[k], &sb[k])?;
        }
        Ok(out)
    }

    pub fn score(&self, a: &ActivityLabel, b: &ActivityLabel) -> Result<f64> {
        let parts = self.breakdown(a, b)?;
        Ok(match self.weights {
            None => parts.iter().sum::<f64>() / 4.0,
            Some(w) => parts.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / w.iter().sum::<f64>(),
        })
    }

    pub fn matrix(&self) -> Result<SimilarityMatrix> {
        let labels: Vec<ActivityLabel> = self.signatures.keys().cloned().collect();
        SimilarityMatrix::from_fn(Perspective::ControlFlow, labels.clone(), |i, j| {
            self.score(&labels[i], &labels[j]).map(PerspectiveScore::Value)
        })
    }
}

/// Pairwise control-flow dissimilarity, averaging the four directional values.
pub fn control_flow_matrix(log: &EventLog, theta_ld: f64) -> Result<SimilarityMatrix> {
    control_flow_matrix_with(
        log,
        &ControlFlowOptions {
            theta_ld,
            ..ControlFlowOptions::default()
        },
    )
}

pub fn control_flow_matrix_with(log: &EventLog, options: &ControlFlowOptions) -> Result<SimilarityMatrix> {
    ControlFlowContext::new(log, options)?.matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::tests::log_of;

    fn l(s: &str) -> ActivityLabel {
        ActivityLabel::new(s).unwrap()
    }

    #[test]
    fn single_neighbour_has_full_weight() {
        let g = build_dfg(&log_of(&[&["a", "b"]]));
        let s = directional_signature(&g, &l("a"), Direction::Outgoing).unwrap();
        assert_eq!(s.signature.weights(), &[1.0]);
        let s = directional_signature(&g, &l("b"), Direction::Outgoing).unwrap();
        assert!(s.signature.is_empty());
    }

    #[test]
    fn empty_conventions() {
        // b and c are both end activities; a has successors.
        let g = build_dfg(&log_of(&[&["a", "b"], &["a", "c"]]));
        assert_eq!(directional_similarity(&g, &l("b"), &l("c"), Direction::Outgoing).unwrap(), 0.0);
        assert_eq!(directional_similarity(&g, &l("a"), &l("b"), Direction::Outgoing).unwrap(), 1.0);
        assert!(directional_similarity(&g, &l("a"), &l("a"), Direction::Outgoing).is_err());
    }

    #[test]
    fn identical_contexts_score_zero() {
        let log = log_of(&[&["s", "x", "e"], &["s", "y", "e"], &["s", "x", "e"], &["s", "y", "e"]]);
        let m = control_flow_matrix(&log, 0.0).unwrap();
        assert_eq!(m.value(&l("x"), &l("y")).unwrap(), 0.0);
        assert_eq!(follows_similarity(&build_dfg(&log), &l("x"), &l("y")).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_contexts_score_one() {
        let log = log_of(&[&["p", "x", "q"], &["r", "y", "s"]]);
        let m = control_flow_matrix(&log, 0.0).unwrap();
        assert_eq!(m.value(&l("x"), &l("y")).unwrap(), 1.0);
    }

    #[test]
    fn weighted_combination() {
        let log = log_of(&[&["p", "x", "q"], &["p", "y", "s"]]);
        let ctx = ControlFlowContext::new(
            &log,
            &ControlFlowOptions {
                theta_ld: 0.0,
                weights: Some([1.0, 0.0, 0.0, 0.0]),
                trace_boundaries: false,
            },
        )
        .unwrap();
        let parts = ctx.breakdown(&l("x"), &l("y")).unwrap();
        assert_eq!(parts, [1.0, 0.0, 1.0, 0.0]);
        assert_eq!(ctx.score(&l("x"), &l("y")).unwrap(), 1.0);
        let bounded = ControlFlowContext::new(&log, &ControlFlowOptions::default()).unwrap();
        // both x and y follow a trace start through p
        assert_eq!(bounded.breakdown(&l("x"), &l("y")).unwrap()[1], 0.0);
        assert!(ControlFlowOptions {
            theta_ld: 0.5,
            weights: Some([0.0; 4]),
            trace_boundaries: true,
        }
        .validate()
        .is_err());
    }

    #[test]
    fn boundary_keeps_end_mass() {
        let log = log_of(&[&["a", "h", "c"], &["a", "h"], &["a", "b", "c"], &["a", "b", "c"]]);
        let g = build_dfg(&log);
        let (_, ends) = boundary_counts(&log)[&l("h")];
        assert_eq!(ends, 1);
        let s = bounded_signature(&g, &l("h"), Direction::Outgoing, ends).unwrap();
        assert_eq!(s.signature.weights(), &[0.5, 0.5]);
        assert_eq!(s.signature.clusters()[1], Neighbour::Boundary);
        let ctx = ControlFlowContext::new(&log, &ControlFlowOptions::default()).unwrap();
        assert!((ctx.breakdown(&l("h"), &l("b")).unwrap()[0] - 0.5).abs() < 1e-12);
        let plain = ControlFlowContext::new(
            &log,
            &ControlFlowOptions {
                trace_boundaries: false,
                ..ControlFlowOptions::default()
            },
        )
        .unwrap();
        assert_eq!(plain.breakdown(&l("h"), &l("b")).unwrap()[0], 0.0);
    }
}
