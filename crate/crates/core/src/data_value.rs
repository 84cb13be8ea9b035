//! Data-value dissimilarity between activity labels.
//!
//! Activities with numeric data are first grouped by agglomerative clustering
//! of their (25th, 75th) percentile vectors. Only labels in the same group are
//! compared in detail: both datasets are binned into histograms that share
//! bin count and edges, and the EMD between them (ground distance `|p − q|`
//! between bin left edges) is divided by the shared value range.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::emd::{emd_1d, Signature};
use crate::error::{Error, Result};
use crate::event_log::{dominant_attribute, numeric_series_for, ActivityLabel, EventLog};
use crate::matrix::{Perspective, PerspectiveScore, SimilarityMatrix};

pub const DEFAULT_THETA_A: f64 = 10.0;

/// Rule for the number of histogram bins given a sample size `n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinRule {
    /// `⌈log₂ n⌉ + 1`
    #[default]
    SturgesCeil,
    /// `⌊log₂ n⌋ + 1`
    SturgesFloor,
}

impl BinRule {
    pub fn bins(self, n: usize) -> usize {
        if n <= 1 {
            return 1;
        }
        let log2 = (n as f64).log2();
        let k = match self {
            BinRule::SturgesCeil => log2.ceil(),
            BinRule::SturgesFloor => log2.floor(),
        };
        k as usize + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataValueOptions {
    /// Distance threshold for percentile-vector clustering.
    pub theta_a: f64,
    /// Fraction of sorted values dropped from each end, in `[0, 0.5)`.
    pub trim: f64,
    pub bin_rule: BinRule,
    /// Per-activity choice of numeric attribute; otherwise the attribute with
    /// the most recorded values is used.
    pub attribute_overrides: BTreeMap<String, String>,
}

impl Default for DataValueOptions {
    fn default() -> Self {
        DataValueOptions {
            theta_a: DEFAULT_THETA_A,
            trim: 0.0,
            bin_rule: BinRule::default(),
            attribute_overrides: BTreeMap::new(),
        }
    }
}

impl DataValueOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_a.is_finite() && self.theta_a > 0.0) {
            return Err(Error::Config(format!("theta_a must be positive, got {}", self.theta_a)));
        }
        if !(0.0..0.5).contains(&self.trim) {
            return Err(Error::Config(format!("trim must lie in [0, 0.5), got {}", self.trim)));
        }
        Ok(())
    }
}

/// Drops `⌊trim·n⌋` values from each end of a sorted list. `None` when
/// nothing is left.
pub fn trim_sorted(sorted: &[f64], trim: f64) -> Option<Vec<f64>> {
    let cut = (trim * sorted.len() as f64).floor() as usize;
    if 2 * cut >= sorted.len() {
        return None;
    }
    Some(sorted[cut..sorted.len() - cut].to_vec())
}

fn sorted_values(log: &EventLog, a: &ActivityLabel, attribute: Option<&str>, trim: f64) -> Result<Option<Vec<f64>>> {
    log.require(a)?;
    let Some(attribute) = attribute else {
        return Ok(None);
    };
    let mut values = numeric_series_for(log, a, attribute)?;
    values.sort_by(f64::total_cmp);
    Ok(trim_sorted(&values, trim))
}

/// Sorted values of `a`'s dominant numeric attribute with `⌊trim·n⌋` values
/// dropped from each end; `None` when `a` has no usable numeric data.
pub fn extract_trimmed(log: &EventLog, a: &ActivityLabel, trim: f64) -> Result<Option<Vec<f64>>> {
    sorted_values(log, a, dominant_attribute(log, a).as_deref(), trim)
}

/// Linear-interpolation percentile of sorted data, `p` in `[0, 1]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PercentileVector {
    pub activity: ActivityLabel,
    pub q1: f64,
    pub q3: f64,
    pub n: usize,
}

impl PercentileVector {
    fn distance(&self, other: &PercentileVector) -> f64 {
        (self.q1 - other.q1).hypot(self.q3 - other.q3)
    }
}

pub fn percentile_vector(activity: ActivityLabel, sorted: &[f64]) -> PercentileVector {
    PercentileVector {
        activity,
        q1: percentile(sorted, 0.25),
        q3: percentile(sorted, 0.75),
        n: sorted.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActivityCluster {
    /// Sorted member labels.
    pub members: Vec<ActivityLabel>,
}

/// Average-linkage agglomerative clustering of percentile vectors under
/// Euclidean distance. Clusters merge while their distance is below
/// `theta_a`; among equally close pairs the lexicographically smallest
/// (by smallest member label) merges first.
pub fn cluster_activities(vectors: &[PercentileVector], theta_a: f64) -> Result<Vec<ActivityCluster>> {
    if !(theta_a.is_finite() && theta_a > 0.0) {
        return Err(Error::Config(format!("theta_a must be positive, got {theta_a}")));
    }
    let mut order: Vec<&PercentileVector> = vectors.iter().collect();
    order.sort_by(|a, b| a.activity.cmp(&b.activity));

    let mut clusters: Vec<Vec<ActivityLabel>> = order.iter().map(|v| vec![v.activity.clone()]).collect();
    let mut dist: Vec<Vec<f64>> = order
        .iter()
        .map(|a| order.iter().map(|b| a.distance(b)).collect())
        .collect();

    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                if best.is_none_or(|(_, _, d)| dist[i][j] < d) {
                    best = Some((i, j, dist[i][j]));
                }
            }
        }
        let Some((i, j, d)) = best else { break };
        if d >= theta_a {
            break;
        }
        // Lance–Williams update for average linkage.
        let (ni, nj) = (clusters[i].len() as f64, clusters[j].len() as f64);
        for k in 0..clusters.len() {
            if k != i && k != j {
                let merged = (ni * dist[i][k] + nj * dist[j][k]) / (ni + nj);
                dist[i][k] = merged;
                dist[k][i] = merged;
            }
        }
        let absorbed = clusters.remove(j);
        clusters[i].extend(absorbed);
        clusters[i].sort();
        dist.remove(j);
        for row in &mut dist {
            row.remove(j);
        }
    }
    Ok(clusters.into_iter().map(|members| ActivityCluster { members }).collect())
}

/// Two histograms over the same bins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramPair {
    pub bin_count: usize,
    pub min: f64,
    pub max: f64,
    pub width: f64,
    /// Left edge of each bin.
    pub edges: Vec<f64>,
    pub weights_a: Vec<f64>,
    pub weights_b: Vec<f64>,
}

impl HistogramPair {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn signatures(&self) -> Result<(Signature<f64>, Signature<f64>)> {
        Ok((
            Signature::new(self.edges.clone(), self.weights_a.clone())?,
            Signature::new(self.edges.clone(), self.weights_b.clone())?,
        ))
    }
}

fn bin_fractions(values: &[f64], min: f64, width: f64, k: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for &v in values {
        let idx = if width > 0.0 {
            (((v - min) / width).floor() as usize).min(k - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    counts.iter().map(|&c| c as f64 / values.len() as f64).collect()
}

/// Bins both datasets over their joint range with `rule.bins(min(|a|, |b|))`
/// equal-width bins.
pub fn histogram_pair(va: &[f64], vb: &[f64], rule: BinRule) -> Result<HistogramPair> {
    if va.is_empty() || vb.is_empty() {
        return Err(Error::Config("histograms need non-empty datasets".into()));
    }
    let (min, max) = va
        .iter()
        .chain(vb)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = max - min;
    let k = if range > 0.0 { rule.bins(va.len().min(vb.len())) } else { 1 };
    let width = range / k as f64;
    Ok(HistogramPair {
        bin_count: k,
        min,
        max,
        width,
        edges: (0..k).map(|i| min + i as f64 * width).collect(),
        weights_a: bin_fractions(va, min, width, k),
        weights_b: bin_fractions(vb, min, width, k),
    })
}

/// Range-normalized histogram EMD in `[0, 1]`; 0 when every value is equal.
pub fn histogram_dissimilarity(va: &[f64], vb: &[f64], rule: BinRule) -> Result<f64> {
    let hist = histogram_pair(va, vb, rule)?;
    if hist.range() <= 0.0 {
        return Ok(0.0);
    }
    let (sa, sb) = hist.signatures()?;
    Ok((emd_1d(&sa, &sb)? / hist.range()).clamp(0.0, 1.0))
}

/// Per-activity numeric datasets and their percentile clusters.
#[derive(Debug)]
pub struct DataValueContext {
    rule: BinRule,
    values: BTreeMap<ActivityLabel, Option<Vec<f64>>>,
    cluster_of: BTreeMap<ActivityLabel, usize>,
    pub clusters: Vec<ActivityCluster>,
}

impl DataValueContext {
    pub fn new(log: &EventLog, options: &DataValueOptions) -> Result<Self> {
        options.validate()?;
        let mut values = BTreeMap::new();
        let mut vectors = Vec::new();
        for a in log.activities() {
            let attribute = options
                .attribute_overrides
                .get(a.as_str())
                .cloned()
                .or_else(|| dominant_attribute(log, a));
            let data = sorted_values(log, a, attribute.as_deref(), options.trim)?;
            if let Some(sorted) = &data {
                vectors.push(percentile_vector(a.clone(), sorted));
            }
            values.insert(a.clone(), data);
        }
        let clusters = cluster_activities(&vectors, options.theta_a)?;
        let cluster_of = clusters
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.members.iter().map(move |m| (m.clone(), i)))
            .collect();
        Ok(DataValueContext {
            rule: options.bin_rule,
            values,
            cluster_of,
            clusters,
        })
    }

    pub fn score(&self, a: &ActivityLabel, b: &ActivityLabel) -> Result<PerspectiveScore> {
        let va = self.values.get(a).ok_or_else(|| Error::UnknownActivity(a.to_string()))?;
        let vb = self.values.get(b).ok_or_else(|| Error::UnknownActivity(b.to_string()))?;
        Ok(match (va, vb) {
            (None, None) => PerspectiveScore::NotApplicable,
            (Some(_), None) | (None, Some(_)) => PerspectiveScore::Value(1.0),
            (Some(va), Some(vb)) => {
                if self.cluster_of[a] != self.cluster_of[b] {
                    PerspectiveScore::Value(1.0)
                } else {
                    PerspectiveScore::Value(histogram_dissimilarity(va, vb, self.rule)?)
                }
            }
        })
    }

    pub fn matrix(&self) -> Result<SimilarityMatrix> {
        let labels: Vec<ActivityLabel> = self.values.keys().cloned().collect();
        SimilarityMatrix::from_fn(Perspective::DataValue, labels.clone(), |i, j| {
            self.score(&labels[i], &labels[j])
        })
    }
}

pub fn data_value_matrix(log: &EventLog, theta_a: f64, trim: f64) -> Result<SimilarityMatrix> {
    data_value_matrix_with(
        log,
        &DataValueOptions {
            theta_a,
            trim,
            ..DataValueOptions::default()
        },
    )
}

pub fn data_value_matrix_with(log: &EventLog, options: &DataValueOptions) -> Result<SimilarityMatrix> {
    DataValueContext::new(log, options)?.matrix()
}
