//! Synthetic-perturbation evaluation: plant redundant labels by renaming a
//! share of events, run the detector, and score it against the planted pairs.

pub mod synthetic;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{detect, DetectionReport, DetectorConfig};
use crate::error::{Error, Result};
use crate::event_log::{activity_frequency, ActivityLabel, EventLog};
use crate::semantic::SemanticProvider;

/// Suffix appended to a label to name its synthetic variant.
pub const VARIANT_SUFFIX: &str = "_syn";

/// `⌈pct% · n⌉`, robust to the float error in `pct · n / 100`.
pub fn percent_ceil(pct: f64, n: usize) -> usize {
    let exact = pct * n as f64 / 100.0;
    (exact - 1e-9).ceil().max(0.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSetting {
    /// Percentage of labels to select, in `(0, 100]`.
    pub select_pct: f64,
    /// Percentage of each selected label's events to rename, in `(0, 100]`.
    pub rename_pct: f64,
    pub seed: u64,
    pub replicate: usize,
}

impl PerturbationSetting {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("select_pct", self.select_pct), ("rename_pct", self.rename_pct)] {
            if !(v > 0.0 && v <= 100.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 100], got {v}")));
            }
        }
        Ok(())
    }
}

/// Unordered label pairs known to be redundant.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// (original, synthetic variant) pairs planted by [`perturb`].
    pub synthetic: Vec<(ActivityLabel, ActivityLabel)>,
    /// Pairs declared redundant by the user.
    pub known: Vec<(ActivityLabel, ActivityLabel)>,
}

fn unordered(a: &ActivityLabel, b: &ActivityLabel) -> (ActivityLabel, ActivityLabel) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

impl GroundTruth {
    pub fn pairs(&self) -> BTreeSet<(ActivityLabel, ActivityLabel)> {
        self.synthetic
            .iter()
            .chain(&self.known)
            .filter(|(a, b)| a != b)
            .map(|(a, b)| unordered(a, b))
            .collect()
    }

    pub fn with_known(mut self, known: &[(ActivityLabel, ActivityLabel)]) -> Self {
        self.known.extend_from_slice(known);
        self
    }

    /// Writes `label_a,label_b` rows, planted pairs first.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label_a", "label_b"])?;
        for (a, b) in self.synthetic.iter().chain(&self.known) {
            w.write_record([a.as_str(), b.as_str()])?;
        }
        w.flush().map_err(|e| Error::io("<ground truth output>", e))?;
        Ok(())
    }
}

/// Reads `label_a,label_b` rows (header required, `#` comment lines allowed).
pub fn read_pairs_csv(text: &str) -> Result<Vec<(ActivityLabel, ActivityLabel)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let (Some(a), Some(b)) = (record.get(0), record.get(1)) else {
            return Err(Error::Row {
                line,
                message: "expected two labels".into(),
            });
        };
        let label = |s: &str| {
            ActivityLabel::new(s).map_err(|_| Error::Row {
                line,
                message: "empty label".into(),
            })
        };
        pairs.push((label(a)?, label(b)?));
    }
    Ok(pairs)
}

pub fn load_pairs_csv(path: impl AsRef<Path>) -> Result<Vec<(ActivityLabel, ActivityLabel)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_pairs_csv(&text)
}

/// Plants synthetic redundant labels.
///
/// `⌈x% · |labels|⌉` labels are drawn uniformly without replacement; for each,
/// `⌈y% · count⌉` of its events (uniformly, without replacement) are renamed
/// to `<label>_syn`. A label is only eligible when this renames at least one
/// event and leaves at least one under the original name; ineligible draws
/// are replaced by the next draw. Timestamps, values and trace membership are
/// untouched.
pub fn perturb(log: &EventLog, setting: &PerturbationSetting) -> Result<(EventLog, GroundTruth)> {
    setting.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(setting.seed);
    let freq = activity_frequency(log);
    let target = percent_ceil(setting.select_pct, freq.len());

    let mut candidates: Vec<&ActivityLabel> = freq.keys().collect();
    candidates.shuffle(&mut rng);
    let selected: Vec<&ActivityLabel> = candidates
        .into_iter()
        .filter(|a| {
            let k = percent_ceil(setting.rename_pct, freq[*a]);
            k >= 1 && k < freq[*a]
        })
        .take(target)
        .collect();
    if selected.len() < target {
        return Err(Error::Perturbation(format!(
            "need {target} labels whose events can be split at {}%, only {} qualify",
            setting.rename_pct,
            selected.len()
        )));
    }

    plant_variants(log, &selected, setting.rename_pct, &mut rng)
}

/// Renames `⌈pct% · count⌉` uniformly chosen events of `label` to a fresh
/// variant label. Used to plant a single known duplicate.
pub fn plant_variant(log: &EventLog, label: &ActivityLabel, rename_pct: f64, seed: u64) -> Result<(EventLog, GroundTruth)> {
    log.require(label)?;
    if !(rename_pct > 0.0 && rename_pct <= 100.0) {
        return Err(Error::Config(format!("rename_pct must lie in (0, 100], got {rename_pct}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    plant_variants(log, &[label], rename_pct, &mut rng)
}

fn plant_variants(
    log: &EventLog,
    selected: &[&ActivityLabel],
    rename_pct: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(EventLog, GroundTruth)> {
    // Positions of every event per label, in log order.
    let mut positions: BTreeMap<&ActivityLabel, Vec<(usize, usize)>> = BTreeMap::new();
    for (ti, trace) in log.traces().iter().enumerate() {
        for (ei, e) in trace.events.iter().enumerate() {
            positions.entry(&e.activity).or_default().push((ti, ei));
        }
    }

    let mut taken: HashSet<String> = log.activities().iter().map(|a| a.to_string()).collect();
    let mut renames: BTreeMap<(usize, usize), ActivityLabel> = BTreeMap::new();
    let mut truth = GroundTruth::default();
    for &original in selected {
        let mut variant = format!("{original}{VARIANT_SUFFIX}");
        let mut n = 2;
        while taken.contains(&variant) {
            variant = format!("{original}{VARIANT_SUFFIX}{n}");
            n += 1;
        }
        taken.insert(variant.clone());
        let variant = ActivityLabel::new(variant)?;

        let spots = &positions[original];
        let k = percent_ceil(rename_pct, spots.len());
        let mut chosen = index::sample(rng, spots.len(), k).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            renames.insert(spots[i], variant.clone());
        }
        truth.synthetic.push((original.clone(), variant));
    }

    let perturbed = log.map_labels(|ti, ei, e| renames.get(&(ti, ei)).cloned().unwrap_or_else(|| e.activity.clone()))?;
    Ok((perturbed, truth))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl Metrics {
    /// Precision and recall are 0 when their denominator is 0, and so is the
    /// f-score when precision + recall is 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f_score = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f_score,
        }
    }
}

pub fn score_pairs(detected: &[(ActivityLabel, ActivityLabel)], truth: &GroundTruth) -> Metrics {
    let detected: BTreeSet<_> = detected.iter().map(|(a, b)| unordered(a, b)).collect();
    let truth = truth.pairs();
    let tp = detected.intersection(&truth).count();
    Metrics::from_counts(tp, detected.len() - tp, truth.len() - tp)
}

pub fn score(report: &DetectionReport, truth: &GroundTruth) -> Metrics {
    score_pairs(&report.redundant_pairs, truth)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub select_pcts: Vec<f64>,
    pub rename_pcts: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
}

impl GridSpec {
    /// 5 × 7 settings × 5 replicates.
    pub fn standard(master_seed: u64) -> Self {
        GridSpec {
            select_pcts: vec![20.0, 40.0, 60.0, 80.0, 100.0],
            rename_pcts: vec![1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            replicates: 5,
            master_seed,
        }
    }

    pub fn run_count(&self) -> usize {
        self.select_pcts.len() * self.rename_pcts.len() * self.replicates
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one grid run: `splitmix64(master ^ splitmix64(xi << 40 | yi << 20 | r))`
/// over the setting's indices in the grid.
pub fn run_seed(master: u64, x_index: usize, y_index: usize, replicate: usize) -> u64 {
    let cell = ((x_index as u64) << 40) | ((y_index as u64) << 20) | replicate as u64;
    splitmix64(master ^ splitmix64(cell))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub x: f64,
    pub y: f64,
    pub replicate: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub x: f64,
    pub y: f64,
    pub runs: usize,
    pub mean_f_score: f64,
    /// Population standard deviation (0 for a single replicate).
    pub std_f_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub summary: Vec<GridSummary>,
}

impl GridResult {
    pub fn mean_f_score(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.metrics.f_score).sum::<f64>() / self.rows.len() as f64
    }

    pub fn write_raw_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "replicate", "seed", "tp", "fp", "fn", "precision", "recall", "f_score"])?;
        for r in &self.rows {
            let m = &r.metrics;
            w.write_record([
                r.x.to_string(),
                r.y.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                m.tp.to_string(),
                m.fp.to_string(),
                m.fn_.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f_score.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<grid output>", e))?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "runs", "mean_f_score", "std_f_score"])?;
        for s in &self.summary {
            w.write_record([
                s.x.to_string(),
                s.y.to_string(),
                s.runs.to_string(),
                s.mean_f_score.to_string(),
                s.std_f_score.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<grid output>", e))?;
        Ok(())
    }
}

/// Perturb → detect → score for every (x, y, replicate). Runs execute in
/// parallel; rows come back in (x, y, replicate) order.
pub fn run_grid(
    log: &EventLog,
    spec: &GridSpec,
    cfg: &DetectorConfig,
    known: &[(ActivityLabel, ActivityLabel)],
    provider: Option<&dyn SemanticProvider>,
) -> Result<GridResult> {
    cfg.validate()?;
    if spec.replicates == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    let mut cells = Vec::with_capacity(spec.run_count());
    for (xi, &x) in spec.select_pcts.iter().enumerate() {
        for (yi, &y) in spec.rename_pcts.iter().enumerate() {
            for r in 0..spec.replicates {
                cells.push(PerturbationSetting {
                    select_pct: x,
                    rename_pct: y,
                    seed: run_seed(spec.master_seed, xi, yi, r),
                    replicate: r,
                });
            }
        }
    }
    for c in &cells {
        c.validate()?;
    }

    let rows = cells
        .par_iter()
        .map(|setting| {
            let (perturbed, truth) = perturb(log, setting)?;
            let truth = truth.with_known(known);
            let report = detect(&perturbed, cfg, provider)?;
            Ok(GridRow {
                x: setting.select_pct,
                y: setting.rename_pct,
                replicate: setting.replicate,
                seed: setting.seed,
                metrics: score(&report, &truth),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = rows
        .chunks(spec.replicates)
        .map(|chunk| {
            let n = chunk.len() as f64;
            let mean = chunk.iter().map(|r| r.metrics.f_score).sum::<f64>() / n;
            let var = chunk.iter().map(|r| (r.metrics.f_score - mean).powi(2)).sum::<f64>() / n;
            GridSummary {
                x: chunk[0].x,
                y: chunk[0].y,
                runs: chunk.len(),
                mean_f_score: mean,
                std_f_score: var.sqrt(),
            }
        })
        .collect();
    Ok(GridResult { rows, summary })
}
