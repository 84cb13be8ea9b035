use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::event_log::ActivityLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perspective {
    ControlFlow,
    DataValue,
    Semantic,
}

impl Perspective {
    pub const ALL: [Perspective; 3] = [Perspective::ControlFlow, Perspective::DataValue, Perspective::Semantic];

    pub fn name(self) -> &'static str {
        match self {
            Perspective::ControlFlow => "control_flow",
            Perspective::DataValue => "data_value",
            Perspective::Semantic => "semantic",
        }
    }
}

impl fmt::Display for Perspective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A dissimilarity in `[0, 1]` (0 = most similar), or no score at all.
///
/// Serializes as a number, or as the string `"NA"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PerspectiveScore {
    Value(f64),
    NotApplicable,
}

impl PerspectiveScore {
    pub fn value(self) -> Option<f64> {
        match self {
            PerspectiveScore::Value(v) => Some(v),
            PerspectiveScore::NotApplicable => None,
        }
    }
}

impl fmt::Display for PerspectiveScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerspectiveScore::Value(v) => write!(f, "{v}"),
            PerspectiveScore::NotApplicable => f.write_str("NA"),
        }
    }
}

impl Serialize for PerspectiveScore {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PerspectiveScore::Value(v) => s.serialize_f64(*v),
            PerspectiveScore::NotApplicable => s.serialize_str("NA"),
        }
    }
}

impl<'de> Deserialize<'de> for PerspectiveScore {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(PerspectiveScore::Value(v)),
            Raw::Text(t) if t == "NA" => Ok(PerspectiveScore::NotApplicable),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("unexpected score `{t}`"))),
        }
    }
}

/// Symmetric pairwise dissimilarities over a sorted label set; the diagonal
/// is not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    kind: Perspective,
    labels: Vec<ActivityLabel>,
    entries: Vec<PerspectiveScore>,
}

fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl SimilarityMatrix {
    /// Evaluates `score(i, j)` for every `i < j` in parallel. Results are
    /// stored in a fixed order, so the matrix does not depend on scheduling.
    pub fn from_fn<F>(kind: Perspective, labels: Vec<ActivityLabel>, score: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<PerspectiveScore> + Sync,
    {
        let n = labels.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let entries = pairs
            .into_par_iter()
            .map(|(i, j)| score(i, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimilarityMatrix { kind, labels, entries })
    }

    pub fn kind(&self) -> Perspective {
        self.kind
    }

    pub fn labels(&self) -> &[ActivityLabel] {
        &self.labels
    }

    fn position(&self, a: &ActivityLabel) -> Option<usize> {
        self.labels.binary_search(a).ok()
    }

    /// Score for an unordered pair of distinct labels.
    pub fn get(&self, a: &ActivityLabel, b: &ActivityLabel) -> Option<PerspectiveScore> {
        let (i, j) = (self.position(a)?, self.position(b)?);
        match i.cmp(&j) {
            std::cmp::Ordering::Less => Some(self.entries[condensed_index(self.labels.len(), i, j)]),
            std::cmp::Ordering::Greater => Some(self.entries[condensed_index(self.labels.len(), j, i)]),
            std::cmp::Ordering::Equal => None,
        }
    }

    /// Value for a pair, failing if either label is unknown or the score is NA.
    pub fn value(&self, a: &ActivityLabel, b: &ActivityLabel) -> Result<f64> {
        self.get(a, b)
            .ok_or_else(|| Error::UnknownActivity(format!("{a} / {b}")))?
            .value()
            .ok_or_else(|| Error::Config(format!("no {} score for ({a}, {b})", self.kind)))
    }

    /// All pairs `(a, b, score)` with `a < b`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (&ActivityLabel, &ActivityLabel, PerspectiveScore)> {
        let n = self.labels.len();
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .map(move |(i, j)| (&self.labels[i], &self.labels[j], self.entries[condensed_index(n, i, j)]))
    }

    /// Writes `label_a,label_b,score` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["label_a", "label_b", "score"])?;
        for (a, b, s) in self.pairs() {
            w.write_record([a.as_str(), b.as_str(), &s.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<matrix output>", e))?;
        Ok(())
    }
}
