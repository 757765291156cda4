//! Boosted decision trees with orthogonal or oblique (LDA) splits.
//!
//! Trees are trained greedily on weighted data; RealBoost combines them
//! additively, optionally harvesting hard negatives between stages, and a
//! soft cascade of per-prefix rejection thresholds can be calibrated on
//! positives.

mod cascade;
mod data;
mod io;
mod oblique;
mod split;
mod train;
mod tree;

use thiserror::Error;

use crate::linstats::LinStatsError;

pub use cascade::{calibrate_cascade, CascadeMode};
pub use data::{FeatureGeometry, TrainingSet};
pub use io::{decode_ensemble, dump_ensemble, encode_ensemble, parse_ensemble_dump, ENSEMBLE_MAGIC};
pub use oblique::{best_oblique_split, patch_shape, ObliqueCandidate, SigmaSource};
pub use split::{best_orthogonal_split, SplitResult};
pub use train::{train_realboost, train_tree, NegativeSource, TrainOutcome, TrainStats};
pub use tree::{leaf_value, BoostedEnsemble, Node, Split, Tree};

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("invalid boosting configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),
    #[error("node holds a single class or constant features; make a leaf")]
    DegenerateNode,
    #[error("oblique splits need a feature geometry")]
    MissingGeometry,
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cascade calibration needs at least one positive")]
    EmptyPositives,
    #[error("ensemble format: {0}")]
    Format(String),
    #[error(transparent)]
    LinStats(#[from] LinStatsError),
    #[error("negative source failed: {0}")]
    Source(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitPolicy {
    Orthogonal,
    /// LDA splits with Σ taken from the window covariance of the training
    /// windows.
    ObliquePerPatch,
    /// LDA splits with one fixed Σ per channel.
    ObliqueShared,
}

impl SplitPolicy {
    pub fn name(self) -> &'static str {
        match self {
            SplitPolicy::Orthogonal => "orthogonal",
            SplitPolicy::ObliquePerPatch => "oblique_per_patch",
            SplitPolicy::ObliqueShared => "oblique_shared",
        }
    }

    pub fn is_oblique(self) -> bool {
        self != SplitPolicy::Orthogonal
    }
}

impl std::str::FromStr for SplitPolicy {
    type Err = BoostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "orthogonal" => Ok(SplitPolicy::Orthogonal),
            "oblique_per_patch" => Ok(SplitPolicy::ObliquePerPatch),
            "oblique_shared" => Ok(SplitPolicy::ObliqueShared),
            _ => Err(BoostError::InvalidConfig(format!("unknown split policy {s:?}"))),
        }
    }
}

/// How often LDA projections of oblique candidates are recomputed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpdatePeriod {
    /// Fresh means and projections at every node of every tree.
    PerNode,
    /// Recompute at the start of every `T`-th tree, reused by all nodes.
    Trees(usize),
    /// Computed once before the first tree.
    Never,
}

impl std::fmt::Display for UpdatePeriod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UpdatePeriod::PerNode => write!(f, "node"),
            UpdatePeriod::Trees(t) => write!(f, "{t}"),
            UpdatePeriod::Never => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for UpdatePeriod {
    type Err = BoostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "node" => Ok(UpdatePeriod::PerNode),
            "inf" | "never" => Ok(UpdatePeriod::Never),
            _ => match s.parse::<usize>() {
                Ok(t) if t >= 1 => Ok(UpdatePeriod::Trees(t)),
                _ => Err(BoostError::InvalidConfig(format!(
                    "update period must be `node`, `inf` or a positive integer, got {s:?}"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostConfig {
    pub num_trees: usize,
    pub max_depth: usize,
    pub split_policy: SplitPolicy,
    pub update_period: UpdatePeriod,
    pub epsilon: f64,
    /// Oblique patch side `m`.
    pub patch_size: usize,
    /// Cumulative tree counts after which negatives are harvested. Entries
    /// at or beyond `num_trees` are ignored.
    pub bootstrap_schedule: Vec<usize>,
    pub negatives_cap: usize,
    /// Most negatives harvested from one image per round.
    pub per_image_cap: usize,
    /// Windows scoring at least this much are harvested as hard negatives.
    pub harvest_threshold: f64,
    /// Leaf smoothing β; `None` means `1/n`.
    pub leaf_smoothing: Option<f64>,
    pub cascade: CascadeMode,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            num_trees: 2048,
            max_depth: 3,
            split_policy: SplitPolicy::Orthogonal,
            update_period: UpdatePeriod::Trees(16),
            epsilon: 0.1,
            patch_size: 5,
            bootstrap_schedule: vec![32, 128, 512, 2048],
            negatives_cap: 10_000,
            per_image_cap: 25,
            harvest_threshold: 0.0,
            leaf_smoothing: None,
            cascade: CascadeMode::Calibrated { delta: 0.05 },
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<(), BoostError> {
        let bad = |m: String| Err(BoostError::InvalidConfig(m));
        if self.num_trees == 0 {
            return bad("num_trees must be at least 1".into());
        }
        if self.max_depth == 0 || self.max_depth > 16 {
            return bad(format!("max_depth {} outside 1..=16", self.max_depth));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if self.patch_size == 0 {
            return bad("patch size must be at least 1".into());
        }
        if let UpdatePeriod::Trees(0) = self.update_period {
            return bad("update period must be at least 1".into());
        }
        if self.bootstrap_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return bad("bootstrap schedule must be strictly increasing".into());
        }
        if self.negatives_cap == 0 || self.per_image_cap == 0 {
            return bad("negative caps must be positive".into());
        }
        if let Some(b) = self.leaf_smoothing {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("leaf smoothing {b} must be positive"));
            }
        }
        if self.harvest_threshold.is_nan() {
            return bad("harvest threshold is NaN".into());
        }
        self.cascade.validate()
    }

    /// `boost.*` key/value snapshot stored in trained models.
    pub fn entries(&self) -> Vec<(String, String)> {
        let schedule: Vec<String> = self.bootstrap_schedule.iter().map(usize::to_string).collect();
        [
            ("num_trees", self.num_trees.to_string()),
            ("max_depth", self.max_depth.to_string()),
            ("split_policy", self.split_policy.name().to_string()),
            ("update_period", self.update_period.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("patch_size", self.patch_size.to_string()),
            ("bootstrap_schedule", schedule.join(",")),
            ("negatives_cap", self.negatives_cap.to_string()),
            ("per_image_cap", self.per_image_cap.to_string()),
            ("harvest_threshold", self.harvest_threshold.to_string()),
            ("leaf_smoothing", self.leaf_smoothing.map_or("auto".to_string(), |b| b.to_string())),
            ("cascade", self.cascade.to_string()),
            ("seed", self.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (format!("boost.{k}"), v))
        .collect()
    }
}
