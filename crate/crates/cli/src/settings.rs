//! Detector settings shared by `detect` and `evaluate`.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use labelsift::detector::{Combination, LowFrequencyOverride};
use labelsift::semantic::{EditProvider, SemanticProvider, VectorProvider, VectorTable};
use labelsift::DetectorConfig;

use crate::config::{FileConfig, Threshold};
use crate::error::CliError;

pub const KEYS: &[&str] = &[
    "theta-c",
    "theta-d",
    "theta-s",
    "combination",
    "low-freq",
    "low-freq-combination",
    "theta-ld",
    "theta-a",
    "trim",
    "group",
    "strict-na",
    "trace-boundaries",
    "semantic-provider",
    "vectors",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Edit,
    Vectors,
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Args, Debug, Default)]
pub struct DetectorArgs {
    /// Control-flow threshold, or `off`
    #[arg(long)]
    pub theta_c: Option<Threshold>,

    /// Data-value threshold, or `off`
    #[arg(long)]
    pub theta_d: Option<Threshold>,

    /// Semantic threshold, or `off` (the default)
    #[arg(long)]
    pub theta_s: Option<Threshold>,

    /// How many perspectives must agree: all, any or at-least:K
    #[arg(long)]
    pub combination: Option<Combination>,

    /// Relative frequency below which a label counts as rare
    #[arg(long)]
    pub low_freq: Option<f64>,

    /// Combination used for pairs with a rare label (default: any)
    #[arg(long)]
    pub low_freq_combination: Option<Combination>,

    /// Long-distance dependency threshold for the indirect graph
    #[arg(long)]
    pub theta_ld: Option<f64>,

    /// Distance below which two labels' quartile vectors are clustered
    #[arg(long)]
    pub theta_a: Option<f64>,

    /// Share of extreme values trimmed from each data distribution
    #[arg(long)]
    pub trim: Option<f64>,

    /// Merge redundant pairs into groups
    #[arg(long)]
    pub group: bool,

    /// Count inapplicable scores as failures instead of skipping them
    #[arg(long)]
    pub strict_na: bool,

    /// Leave trace starts and ends out of the directly-follows signatures
    #[arg(long)]
    pub no_trace_boundaries: bool,

    /// Label similarity measure
    #[arg(long, value_enum)]
    pub semantic_provider: Option<ProviderKind>,

    /// Word-vector file for `--semantic-provider vectors`
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

/// Resolved detector settings; the provider is loaded later.
pub struct Settings {
    pub config: DetectorConfig,
    provider: Option<ProviderKind>,
    vectors: Option<PathBuf>,
}

impl Settings {
    pub fn resolve(args: DetectorArgs, file: &FileConfig) -> Result<Self, CliError> {
        let mut cfg = DetectorConfig::default();
        if let Some(Threshold(t)) = file.pick(args.theta_c, "theta-c")? {
            cfg.theta_c = t;
        }
        if let Some(Threshold(t)) = file.pick(args.theta_d, "theta-d")? {
            cfg.theta_d = t;
        }
        if let Some(Threshold(t)) = file.pick(args.theta_s, "theta-s")? {
            cfg.theta_s = t;
        }
        if let Some(c) = file.pick(args.combination, "combination")? {
            cfg.combination = c;
        }
        let f_low = file.pick(args.low_freq, "low-freq")?;
        let low_comb = file.pick(args.low_freq_combination, "low-freq-combination")?;
        if f_low.is_some() || low_comb.is_some() {
            let d = LowFrequencyOverride::default();
            cfg.low_frequency = Some(LowFrequencyOverride {
                f_low: f_low.unwrap_or(d.f_low),
                combination: low_comb.unwrap_or(d.combination),
            });
        }
        if let Some(v) = file.pick(args.theta_ld, "theta-ld")? {
            cfg.theta_ld = v;
        }
        if let Some(v) = file.pick(args.theta_a, "theta-a")? {
            cfg.theta_a = v;
        }
        if let Some(v) = file.pick(args.trim, "trim")? {
            cfg.trim = v;
        }
        if let Some(v) = file.flag(args.group, "group")? {
            cfg.group_transitively = v;
        }
        if let Some(v) = file.flag(args.strict_na, "strict-na")? {
            cfg.strict_na = v;
        }
        if args.no_trace_boundaries {
            cfg.trace_boundaries = false;
        } else if let Some(v) = file.get("trace-boundaries")? {
            cfg.trace_boundaries = v;
        }
        cfg.validate()?;

        let provider = file.pick(args.semantic_provider, "semantic-provider")?;
        let vectors = file.pick(args.vectors, "vectors")?;
        let provider = match (provider, &vectors) {
            (None, Some(_)) => Some(ProviderKind::Vectors),
            (None, None) if cfg.theta_s.is_some() => Some(ProviderKind::Edit),
            (Some(ProviderKind::Vectors), None) => {
                return Err(CliError::config("--semantic-provider vectors needs --vectors"));
            }
            (p, _) => p,
        };
        Ok(Settings {
            config: cfg,
            provider,
            vectors,
        })
    }

    /// Loads the semantic provider, if the semantic perspective is on.
    pub fn provider(&self) -> Result<Option<Box<dyn SemanticProvider>>, CliError> {
        if self.config.theta_s.is_none() {
            return Ok(None);
        }
        Ok(match (self.provider, &self.vectors) {
            (Some(ProviderKind::Vectors), Some(path)) => {
                Some(Box::new(VectorProvider::new(VectorTable::load(path)?)))
            }
            _ => Some(Box::new(EditProvider)),
        })
    }
}
