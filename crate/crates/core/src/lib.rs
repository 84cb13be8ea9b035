//! Detection of redundant activity labels in process-mining event logs.
//!
//! Two labels are redundant when they are spelled differently but record the
//! same real-world activity. Candidate pairs are scored from up to three
//! perspectives, each a dissimilarity in `[0, 1]`:
//!
//! * [`control_flow`]: neighbour distributions in the directly- and
//!   indirectly-follows graphs, compared with Earth Mover's Distance;
//! * [`data_value`]: histograms of the labels' numeric values, compared with
//!   one-dimensional EMD after percentile-based pre-clustering;
//! * [`semantic`]: similarity of the label text.
//!
//! [`detector`] turns the scores into verdicts with threshold rules, and
//! [`evaluation`] measures detection quality on logs with planted duplicates.

pub mod control_flow;
pub mod data_value;
pub mod detector;
pub mod emd;
pub mod error;
pub mod evaluation;
pub mod event_log;
pub mod graph;
pub mod matrix;
pub mod semantic;

pub use detector::{detect, DetectionReport, DetectorConfig};
pub use error::{Error, Result};
pub use event_log::{ActivityLabel, EventLog};
pub use matrix::{Perspective, PerspectiveScore, SimilarityMatrix};
