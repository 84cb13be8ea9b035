//! Label-text similarity providers.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::event_log::{ActivityLabel, EventLog};
use crate::matrix::{Perspective, PerspectiveScore, SimilarityMatrix};

/// Similarity of two label strings in `[0, 1]`; 1 means identical.
///
/// Implementations must be deterministic and symmetric, and return 1 for a
/// label compared with itself.
pub trait SemanticProvider: Send + Sync {
    fn name(&self) -> &str;
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// Splits a label into lowercase word tokens: on anything that is not a
/// letter or digit, and on camelCase boundaries.
pub fn tokenize(label: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in label.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        let chars: Vec<char> = word.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if i > 0 && c.is_uppercase() {
                let prev = chars[i - 1];
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                // fooBar | HTTPServer
                if prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower) {
                    tokens.push(std::mem::take(&mut current));
                }
            }
            current.extend(c.to_lowercase());
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

fn normalize(label: &str) -> String {
    tokenize(label).join(" ")
}

/// `1 − levenshtein / max_len` on the normalized labels (lowercase tokens
/// joined by single spaces).
pub fn edit_similarity(a: &str, b: &str) -> f64 {
    let (na, nb) = (normalize(a), normalize(b));
    let max_len = na.chars().count().max(nb.chars().count());
    if max_len == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(&na, &nb) as f64 / max_len as f64
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EditProvider;

impl SemanticProvider for EditProvider {
    fn name(&self) -> &str {
        "edit"
    }

    fn similarity(&self, a: &str, b: &str) -> f64 {
        edit_similarity(a, b)
    }
}

/// Word vectors keyed by lowercase token, all of one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl VectorTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses `token v1 … vd` lines, with an optional leading `d=<dim>` line.
    /// Zero vectors are dropped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut vectors = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row_err = |message: String| Error::Row {
                line: lineno as u64 + 1,
                message,
            };
            if let Some(d) = line.strip_prefix("d=") {
                if lineno != 0 {
                    return Err(row_err("dimension header must be the first line".into()));
                }
                dim = Some(d.trim().parse().map_err(|_| row_err(format!("bad dimension `{d}`")))?);
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap_or_default().to_lowercase();
            let values = parts
                .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| row_err(format!("bad vector for `{token}`")))?;
            let expected = *dim.get_or_insert(values.len());
            if values.len() != expected || expected == 0 {
                return Err(row_err(format!(
                    "vector for `{token}` has dimension {}, expected {expected}",
                    values.len()
                )));
            }
            if values.iter().all(|v| *v == 0.0) {
                log::warn!("dropping zero vector for `{token}`");
                continue;
            }
            vectors.insert(token, values);
        }
        Ok(VectorTable {
            dim: dim.unwrap_or(0),
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Mean of the known token vectors of a label, if any token is known.
    fn mean_vector(&self, label: &str) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        let mut known = 0usize;
        for token in tokenize(label) {
            if let Some(v) = self.get(&token) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                known += 1;
            }
        }
        (known > 0).then(|| sum.into_iter().map(|s| s / known as f64).collect())
    }
}

/// Cosine of the mean token vectors, clipped to `[0, 1]`. Falls back to
/// [`edit_similarity`] when either label has no token in the table.
pub fn vector_similarity(a: &str, b: &str, table: &VectorTable) -> f64 {
    if a == b {
        return 1.0;
    }
    let (Some(va), Some(vb)) = (table.mean_vector(a), table.mean_vector(b)) else {
        return edit_similarity(a, b);
    };
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    let na = va.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return edit_similarity(a, b);
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

#[derive(Clone, Debug)]
pub struct VectorProvider {
    table: VectorTable,
}

impl VectorProvider {
    pub fn new(table: VectorTable) -> Self {
        VectorProvider { table }
    }
}

impl SemanticProvider for VectorProvider {
    fn name(&self) -> &str {
        "vectors"
    }

    fn similarity(&self, a: &str, b: &str) -> f64 {
        vector_similarity(a, b, &self.table)
    }
}

/// Pairwise `1 − similarity` over the log's labels.
pub fn semantic_matrix(log: &EventLog, provider: &dyn SemanticProvider) -> Result<SimilarityMatrix> {
    let labels: Vec<ActivityLabel> = log.activities().iter().cloned().collect();
    SimilarityMatrix::from_fn(Perspective::Semantic, labels.clone(), |i, j| {
        let s = provider.similarity(labels[i].as_str(), labels[j].as_str());
        Ok(PerspectiveScore::Value((1.0 - s).clamp(0.0, 1.0)))
    })
}
