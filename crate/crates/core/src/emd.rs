//! Earth Mover's Distance between weighted signatures.
//!
//! [`emd`] solves the transportation problem exactly with successive shortest
//! augmenting paths, so it works for any non-negative ground distance and for
//! signatures of unequal total mass (only `min(ΣP, ΣQ)` is moved). The two
//! ground distances used by the detector have closed forms:
//! [`emd_unit_ground`] (0/1 cost, total variation) and [`emd_1d`]
//! (`|p − q|` cost on the real line, area between the two CDFs).

use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EmdError {
    #[error("signature has {clusters} clusters but {weights} weights")]
    LengthMismatch { clusters: usize, weights: usize },
    #[error("weight {0} is negative or not finite")]
    InvalidWeight(f64),
    #[error("cluster id at position {0} is not unique")]
    DuplicateCluster(usize),
    #[error("non-empty signature with zero total weight")]
    ZeroMass,
    #[error("EMD undefined: a signature is empty")]
    Undefined,
    #[error("signature not normalized (total weight {0})")]
    Unnormalized(f64),
    #[error("cluster value {0} is not finite")]
    NonFiniteCluster(f64),
    #[error("ground distance returned {0}")]
    InvalidDistance(f64),
    #[error("transport solver failed to converge")]
    NoConvergence,
}

/// Tolerance on total weight for inputs that must be normalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Clusters with non-negative weights. Cluster ids are unique.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Signature<C> {
    clusters: Vec<C>,
    weights: Vec<f64>,
}

impl<C: PartialEq> Signature<C> {
    pub fn new(clusters: Vec<C>, weights: Vec<f64>) -> Result<Self, EmdError> {
        if clusters.len() != weights.len() {
            return Err(EmdError::LengthMismatch {
                clusters: clusters.len(),
                weights: weights.len(),
            });
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(EmdError::InvalidWeight(w));
        }
        if !weights.is_empty() && weights.iter().all(|w| *w == 0.0) {
            return Err(EmdError::ZeroMass);
        }
        for (i, c) in clusters.iter().enumerate() {
            if clusters[..i].contains(c) {
                return Err(EmdError::DuplicateCluster(i));
            }
        }
        Ok(Signature { clusters, weights })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (C, f64)>) -> Result<Self, EmdError> {
        let (clusters, weights) = pairs.into_iter().unzip();
        Signature::new(clusters, weights)
    }
}

impl<C> Signature<C> {
    pub fn empty() -> Self {
        Signature {
            clusters: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn clusters(&self) -> &[C] {
        &self.clusters
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&C, f64)> {
        self.clusters.iter().zip(self.weights.iter().copied())
    }

    /// Weights rescaled to sum to one, provided they already do within
    /// [`NORMALIZATION_TOLERANCE`].
    pub fn normalized_weights(&self) -> Result<Vec<f64>, EmdError> {
        if self.is_empty() {
            return Err(EmdError::Undefined);
        }
        let total = self.total_weight();
        if (total - 1.0).abs() >= NORMALIZATION_TOLERANCE {
            return Err(EmdError::Unnormalized(total));
        }
        Ok(self.weights.iter().map(|w| w / total).collect())
    }
}

/// A transport plan: `entries[i * cols + j]` is the mass moved from the i-th
/// cluster of the source signature to the j-th cluster of the target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Flow {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
    pub total_moved: f64,
}

impl Flow {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        (0..self.cols).map(|j| self.get(i, j)).sum()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, j)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Transport {
    pub value: f64,
    pub flow: Flow,
}

/// 0 for identical clusters, 1 otherwise.
pub fn unit_ground<C: PartialEq>(a: &C, b: &C) -> f64 {
    if a == b {
        0.0
    } else {
        1.0
    }
}

pub fn absolute_ground(a: &f64, b: &f64) -> f64 {
    (a - b).abs()
}

/// Exact EMD: the minimum over feasible flows of `Σ f·d / Σ f`, where a
/// feasible flow is non-negative, respects both weight vectors and moves
/// `min(ΣP, ΣQ)` in total.
pub fn emd<C, D>(p: &Signature<C>, q: &Signature<C>, ground: D) -> Result<Transport, EmdError>
where
    D: Fn(&C, &C) -> f64,
{
    if p.is_empty() || q.is_empty() {
        return Err(EmdError::Undefined);
    }
    let (m, n) = (p.len(), q.len());
    let mut cost = Vec::with_capacity(m * n);
    for a in p.clusters() {
        for b in q.clusters() {
            let d = ground(a, b);
            if !(d.is_finite() && d >= 0.0) {
                return Err(EmdError::InvalidDistance(d));
            }
            cost.push(d);
        }
    }
    let flow = solve_transport(p.weights(), q.weights(), &cost)?;
    let moved: f64 = flow.iter().sum();
    let work: f64 = flow.iter().zip(&cost).map(|(f, c)| f * c).sum();
    Ok(Transport {
        value: work / moved,
        flow: Flow {
            rows: m,
            cols: n,
            entries: flow,
            total_moved: moved,
        },
    })
}

/// Successive shortest augmenting paths on the bipartite residual network.
///
/// Sources are clusters with supply left, sinks are clusters with demand left.
/// Residual arcs are the forward arcs `i → j` (cost `c_ij`, unbounded) and the
/// backward arcs `j → i` (cost `−c_ij`) wherever `f_ij > 0`. Each round pushes
/// along a cheapest source-to-sink path found by Bellman–Ford, which keeps the
/// current flow optimal for its value.
fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Vec<f64>, EmdError> {
    let (m, n) = (supply.len(), demand.len());
    let mut supply = supply.to_vec();
    let mut demand = demand.to_vec();
    let target = supply.iter().sum::<f64>().min(demand.iter().sum());
    let mass_tol = 1e-13 * target.max(f64::MIN_POSITIVE);
    let max_cost = cost.iter().copied().fold(0.0, f64::max);
    let cost_tol = 1e-13 * max_cost.max(1.0);

    let mut flow = vec![0.0; m * n];
    let mut sent = 0.0;
    let nodes = m + n;
    let max_rounds = 16 * nodes * nodes + 64;

    // prev[v]: for a sink-side node, the source-side node it was reached from;
    // for a source-side node, the sink-side node whose backward arc reached it.
    let mut dist = vec![f64::INFINITY; nodes];
    let mut prev = vec![usize::MAX; nodes];

    for _ in 0..max_rounds {
        if target - sent <= mass_tol {
            return Ok(flow);
        }
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        for i in 0..m {
            if supply[i] > mass_tol {
                dist[i] = 0.0;
            }
        }
        for _ in 0..nodes {
            let mut changed = false;
            for i in 0..m {
                if dist[i].is_infinite() {
                    continue;
                }
                for j in 0..n {
                    let nd = dist[i] + cost[i * n + j];
                    if nd < dist[m + j] - cost_tol {
                        dist[m + j] = nd;
                        prev[m + j] = i;
                        changed = true;
                    }
                }
            }
            for j in 0..n {
                if dist[m + j].is_infinite() {
                    continue;
                }
                for i in 0..m {
                    if flow[i * n + j] > mass_tol {
                        let nd = dist[m + j] - cost[i * n + j];
                        if nd < dist[i] - cost_tol {
                            dist[i] = nd;
                            prev[i] = m + j;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let sink = (0..n)
            .filter(|&j| demand[j] > mass_tol && dist[m + j].is_finite())
            .min_by(|&a, &b| dist[m + a].total_cmp(&dist[m + b]));
        let Some(sink) = sink else {
            // Nothing reachable: remaining mass is below tolerance.
            return Ok(flow);
        };

        // Walk back to the source, collecting the path and its bottleneck.
        let mut path = Vec::new();
        let mut bottleneck = demand[sink].min(target - sent);
        let mut j = sink;
        let source = loop {
            if path.len() > 2 * nodes {
                return Err(EmdError::NoConvergence);
            }
            let i = prev[m + j];
            path.push((i, j, true));
            match prev[i] {
                usize::MAX => break i,
                back => {
                    let jb = back - m;
                    bottleneck = bottleneck.min(flow[i * n + jb]);
                    path.push((i, jb, false));
                    j = jb;
                }
            }
        };
        bottleneck = bottleneck.min(supply[source]);

        for &(i, j, forward) in &path {
            let cell = &mut flow[i * n + j];
            if forward {
                *cell += bottleneck;
            } else {
                *cell -= bottleneck;
                if *cell < mass_tol {
                    *cell = 0.0;
                }
            }
        }
        supply[source] -= bottleneck;
        demand[sink] -= bottleneck;
        if supply[source] < mass_tol {
            supply[source] = 0.0;
        }
        if demand[sink] < mass_tol {
            demand[sink] = 0.0;
        }
        sent += bottleneck;
    }
    Err(EmdError::NoConvergence)
}

/// EMD under the 0/1 ground distance for normalized signatures:
/// `1 − Σ_shared min(w_P, w_Q)`.
pub fn emd_unit_ground<C: PartialEq>(p: &Signature<C>, q: &Signature<C>) -> Result<f64, EmdError> {
    let wp = p.normalized_weights()?;
    let wq = q.normalized_weights()?;
    let mut shared = 0.0;
    for (i, c) in p.clusters().iter().enumerate() {
        if let Some(j) = q.clusters().iter().position(|d| d == c) {
            shared += wp[i].min(wq[j]);
        }
    }
    Ok((1.0 - shared).max(0.0))
}

/// EMD under `|p − q|` for normalized signatures over the real line: the
/// area between the two cumulative distribution functions.
pub fn emd_1d(p: &Signature<f64>, q: &Signature<f64>) -> Result<f64, EmdError> {
    let wp = p.normalized_weights()?;
    let wq = q.normalized_weights()?;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(p.len() + q.len());
    for (x, w) in p.clusters().iter().zip(wp) {
        points.push((*x, w));
    }
    for (x, w) in q.clusters().iter().zip(wq) {
        points.push((*x, -w));
    }
    if let Some(&(x, _)) = points.iter().find(|(x, _)| !x.is_finite()) {
        return Err(EmdError::NonFiniteCluster(x));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut area = 0.0;
    let mut cdf_gap = 0.0;
    for pair in points.windows(2) {
        cdf_gap += pair[0].1;
        area += cdf_gap.abs() * (pair[1].0 - pair[0].0);
    }
    Ok(area)
}
