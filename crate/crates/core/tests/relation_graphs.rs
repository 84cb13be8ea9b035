mod common;

use std::collections::BTreeMap;

use common::*;
use labelsift::control_flow::{directional_signature, Direction};
use labelsift::event_log::{activity_frequency, EventLog};
use labelsift::graph::{build_dfg, build_ifg, long_distance_significance, PrecedenceStats};
use proptest::prelude::*;

fn random_log() -> impl Strategy<Value = EventLog> {
    let trace = prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 1..8);
    prop::collection::vec(trace, 1..12).prop_map(|traces| log_from(&traces))
}

#[test]
fn running_example_relations() {
    let log = running_example();
    let dfg = build_dfg(&log);
    let a = directional_signature(&dfg, &label("A"), Direction::Outgoing).unwrap();
    assert_eq!(a.signature.weights(), &[0.5, 0.5]);
    let incoming_c: Vec<_> = dfg.incoming(&label("C")).unwrap().into_iter().map(|(l, _)| l).collect();
    assert_eq!(incoming_c, [label("B"), label("H")]);

    let ifg = build_ifg(&log, 0.9).unwrap();
    assert!(ifg.arc_count(&label("D"), &label("G")).is_some());
    assert!(ifg.arc_count(&label("C"), &label("G")).is_none());
    let sig = long_distance_significance(&label("D"), &label("G"), &log).unwrap();
    assert!((sig - 98.0 / 99.0).abs() < 1e-12);
}

#[test]
fn unknown_label_is_an_error() {
    let log = running_example();
    assert!(build_dfg(&log).outgoing(&label("Z")).is_err());
    assert!(long_distance_significance(&label("Z"), &label("A"), &log).is_err());
    assert!(build_ifg(&log, 1.5).is_err());
}

#[test]
fn dot_export_lists_arcs() {
    let dot = build_dfg(&running_example()).to_dot();
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("\"A\" -> \"H\""));
}

proptest! {
    #[test]
    fn dfg_counts_every_adjacent_pair(log in random_log()) {
        let dfg = build_dfg(&log);
        let expected: u64 = log.traces().iter().map(|t| t.events.len() as u64 - 1).sum();
        prop_assert_eq!(dfg.total_count(), expected);
    }

    #[test]
    fn dfg_out_and_in_sums_match_occurrences(log in random_log()) {
        let dfg = build_dfg(&log);
        let freq = activity_frequency(&log);
        let mut ends: BTreeMap<_, u64> = BTreeMap::new();
        let mut starts: BTreeMap<_, u64> = BTreeMap::new();
        for t in log.traces() {
            *ends.entry(t.events.last().unwrap().activity.clone()).or_default() += 1;
            *starts.entry(t.events[0].activity.clone()).or_default() += 1;
        }
        for (a, n) in freq {
            let out: u64 = dfg.outgoing(&a).unwrap().iter().map(|(_, c)| c).sum();
            let inc: u64 = dfg.incoming(&a).unwrap().iter().map(|(_, c)| c).sum();
            prop_assert_eq!(out + ends.get(&a).copied().unwrap_or(0), n as u64);
            prop_assert_eq!(inc + starts.get(&a).copied().unwrap_or(0), n as u64);
        }
    }

    #[test]
    fn ifg_shrinks_as_threshold_rises(log in random_log(), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let loose = build_ifg(&log, lo).unwrap();
        let strict = build_ifg(&log, hi).unwrap();
        for (a, b, n) in strict.arcs() {
            prop_assert_eq!(loose.arc_count(a, b), Some(n));
        }
    }

    #[test]
    fn ifg_at_zero_is_eventually_follows(log in random_log()) {
        let ifg = build_ifg(&log, 0.0).unwrap();
        for a in log.activities() {
            for b in log.activities() {
                let traces = log
                    .traces()
                    .iter()
                    .filter(|t| {
                        let first_a = t.events.iter().position(|e| &e.activity == a);
                        let last_b = t.events.iter().rposition(|e| &e.activity == b);
                        matches!((first_a, last_b), (Some(i), Some(j)) if i < j)
                    })
                    .count() as u64;
                prop_assert_eq!(ifg.arc_count(a, b), (traces > 0).then_some(traces));
            }
        }
    }

    #[test]
    fn significance_stays_below_one(log in random_log()) {
        let stats = PrecedenceStats::from_log(&log);
        for a in log.activities() {
            for b in log.activities() {
                let s = stats.significance(a, b).unwrap();
                prop_assert!((0.0..1.0).contains(&s));
            }
        }
    }

    #[test]
    fn signatures_are_normalized(log in random_log()) {
        let dfg = build_dfg(&log);
        for a in log.activities() {
            for dir in [Direction::Outgoing, Direction::Incoming] {
                let s = directional_signature(&dfg, a, dir).unwrap().signature;
                if !s.is_empty() {
                    prop_assert!((s.total_weight() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
