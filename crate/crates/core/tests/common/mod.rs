#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, FixedOffset, TimeZone};
use labelsift::emd::Signature;
use labelsift::event_log::{ActivityLabel, Event, EventLog, SourceMeta, Trace};
use rand::Rng;

const EPS: f64 = 1e-12;

/// Minimises `c·x` subject to `A x = b`, `x ≥ 0`, `b ≥ 0` with a dense
/// two-phase tableau simplex and Bland's rule. Returns `None` if infeasible.
pub fn simplex_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<f64> {
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    let rhs = n + m;
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; width];
            row[..n].copy_from_slice(&a[i]);
            row[n + i] = 1.0;
            row[rhs] = b[i];
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();

    let phase1: Vec<f64> = (0..n + m).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    run(&mut t, &mut basis, &phase1, n + m);
    let infeasibility: f64 = basis.iter().zip(&t).filter(|(&j, _)| j >= n).map(|(_, r)| r[rhs]).sum();
    if infeasibility > 1e-9 {
        return None;
    }

    // Drive zero-level artificials out of the basis, dropping redundant rows.
    let mut i = 0;
    while i < t.len() {
        if basis[i] >= n {
            match (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                Some(j) => pivot(&mut t, &mut basis, i, j),
                None => {
                    t.remove(i);
                    basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    run(&mut t, &mut basis, c, n);
    Some(basis.iter().zip(&t).map(|(&j, r)| c[j] * r[r.len() - 1]).sum())
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i != row && r[col] != 0.0 {
            let f = r[col];
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
    }
    basis[row] = col;
}

/// Simplex iterations over the first `allowed` columns for cost vector `c`.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], c: &[f64], allowed: usize) {
    let rhs = t.first().map_or(0, |r| r.len() - 1);
    loop {
        let entering = (0..allowed).find(|&j| {
            let reduced = c[j] - basis.iter().zip(t.iter()).map(|(&bj, r)| c[bj] * r[j]).sum::<f64>();
            reduced < -1e-11
        });
        let Some(j) = entering else { return };
        let mut leave: Option<(usize, f64)> = None;
        for (i, r) in t.iter().enumerate() {
            if r[j] > EPS {
                let ratio = r[rhs] / r[j];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - EPS || ((ratio - lr).abs() <= EPS && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((i, _)) = leave else { panic!("unbounded LP") };
        pivot(t, basis, i, j);
    }
}

/// EMD as a linear program: move `min(ΣP, ΣQ)` at minimum cost, divide by it.
pub fn emd_oracle(p: &[f64], q: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> f64 {
    let (m, n) = (p.len(), q.len());
    let flows = m * n;
    let vars = flows + m + n;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..m {
        let mut row = vec![0.0; vars];
        for j in 0..n {
            row[i * n + j] = 1.0;
        }
        row[flows + i] = 1.0;
        a.push(row);
        b.push(p[i]);
    }
    for j in 0..n {
        let mut row = vec![0.0; vars];
        for i in 0..m {
            row[i * n + j] = 1.0;
        }
        row[flows + m + j] = 1.0;
        a.push(row);
        b.push(q[j]);
    }
    let total = p.iter().sum::<f64>().min(q.iter().sum());
    let mut row = vec![0.0; vars];
    row[..flows].fill(1.0);
    a.push(row);
    b.push(total);
    let mut c = vec![0.0; vars];
    for i in 0..m {
        for j in 0..n {
            c[i * n + j] = cost(i, j);
        }
    }
    simplex_min(&a, &b, &c).expect("transport LP is feasible") / total
}

pub fn oracle_for<C>(p: &Signature<C>, q: &Signature<C>, ground: impl Fn(&C, &C) -> f64) -> f64 {
    emd_oracle(p.weights(), q.weights(), &|i, j| ground(&p.clusters()[i], &q.clusters()[j]))
}

/// `k` positive weights summing to one.
pub fn random_weights(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Normalized signature over a random subset of the cluster ids `0..pool`.
pub fn random_label_signature(rng: &mut impl Rng, pool: usize, max_len: usize) -> Signature<usize> {
    let k = rng.random_range(1..=max_len.min(pool));
    let mut ids: Vec<usize> = (0..pool).collect();
    for i in 0..k {
        let j = rng.random_range(i..pool);
        ids.swap(i, j);
    }
    ids.truncate(k);
    Signature::new(ids, random_weights(rng, k)).unwrap()
}

/// Normalized signature over distinct random points in `[lo, hi)`.
pub fn random_real_signature(rng: &mut impl Rng, max_len: usize, lo: f64, hi: f64) -> Signature<f64> {
    let k = rng.random_range(1..=max_len);
    let mut points: Vec<f64> = Vec::with_capacity(k);
    while points.len() < k {
        let x = rng.random_range(lo..hi);
        if !points.contains(&x) {
            points.push(x);
        }
    }
    Signature::new(points, random_weights(rng, k)).unwrap()
}

pub fn label(s: &str) -> ActivityLabel {
    ActivityLabel::new(s).unwrap()
}

fn minute(m: i64) -> DateTime<FixedOffset> {
    FixedOffset::east_opt(0).unwrap().with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap() + Duration::minutes(m)
}

/// Builds a log from label sequences; events are one minute apart.
pub fn log_from(traces: &[Vec<&str>]) -> EventLog {
    let mut id = 0;
    let traces = traces
        .iter()
        .enumerate()
        .map(|(t, seq)| Trace {
            case_id: format!("c{t}"),
            events: seq
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    id += 1;
                    Event {
                        id,
                        activity: label(a),
                        timestamp: minute(i as i64),
                        numeric_values: BTreeMap::new(),
                    }
                })
                .collect(),
        })
        .collect();
    EventLog::from_traces(traces, SourceMeta::memory()).unwrap()
}

/// A log with the relations of the running example: A splits
/// evenly into H and B; H goes on to C (23), D (24) or F (1) and ends the
/// trace twice; B goes on to C or D equally; D is always followed later by G,
/// C never is.
pub fn running_example() -> EventLog {
    let mut traces = Vec::new();
    let mut push = |seq: &[&'static str], n: usize| {
        for _ in 0..n {
            traces.push(seq.to_vec());
        }
    };
    push(&["A", "H", "C", "E"], 23);
    push(&["A", "H", "D", "E", "G"], 24);
    push(&["A", "H", "F", "E"], 1);
    push(&["A", "H"], 2);
    push(&["A", "B", "C", "E"], 25);
    push(&["A", "B", "D", "E", "G"], 25);
    log_from(&traces)
}

/// One single-event trace per value, attribute named after the label.
pub fn numeric_log(data: &[(&str, Vec<f64>)]) -> EventLog {
    let mut id = 0;
    let mut traces = Vec::new();
    for (name, values) in data {
        for v in values {
            id += 1;
            traces.push(Trace {
                case_id: format!("c{id}"),
                events: vec![Event {
                    id,
                    activity: label(name),
                    timestamp: minute(id as i64),
                    numeric_values: BTreeMap::from([(name.to_string(), *v)]),
                }],
            });
        }
    }
    EventLog::from_traces(traces, SourceMeta::memory()).unwrap()
}
