//! Flat `section.key = value` run configuration.
//!
//! Values are applied in order onto the defaults, so a file can be layered
//! over defaults and command-line overrides layered over the file by calling
//! [`RunConfig::set`] again. Blank lines and `#` comments are ignored.

use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::boost::{BoostConfig, CascadeMode, SplitPolicy, UpdatePeriod};
use crate::channels::ChannelConfig;
use crate::detect::{DetectorConfig, Overlap};
use crate::eval::EvalConfig;
use crate::filterbank::{FilterBankConfig, FilterVariant};
use crate::pipeline::PipelineConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`, found {content:?}")]
    Syntax { line: usize, content: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub channels: ChannelConfig,
    pub use_filters: bool,
    pub filters: FilterBankConfig,
    pub autocorr_radius: usize,
    pub boost: BoostConfig,
    pub detector: DetectorConfig,
    pub initial_negatives: usize,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            seed: p.seed,
            channels: p.channels,
            use_filters: p.filters.is_some(),
            filters: p.filters.unwrap_or_default(),
            autocorr_radius: p.autocorr_radius,
            boost: p.boost,
            detector: p.detector,
            initial_negatives: p.initial_negatives,
            eval: EvalConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
            reason: "expected true or false".into(),
        }),
    }
}

impl RunConfig {
    /// Every recognised key, in the order [`RunConfig::entries`] lists them.
    pub fn keys() -> Vec<String> {
        RunConfig::default().entries().into_iter().map(|(k, _)| k).collect()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "channels.shrink" => self.channels.shrink = parse(key, v)?,
            "channels.orientation_bins" => self.channels.num_orientation_bins = parse(key, v)?,
            "channels.norm_constant" => self.channels.gradient_norm_constant = parse(key, v)?,
            "channels.norm_radius" => self.channels.norm_radius = parse(key, v)?,
            "filters.enabled" => self.use_filters = parse_bool(key, v)?,
            "filters.m" => self.filters.m = parse(key, v)?,
            "filters.k" => self.filters.k = parse(key, v)?,
            "filters.variant" => self.filters.variant = parse::<FilterVariant>(key, v)?,
            "filters.seed" => self.filters.seed = parse(key, v)?,
            "filters.downsample" => self.filters.downsample = parse_bool(key, v)?,
            "filters.autocorr_radius" => self.autocorr_radius = parse(key, v)?,
            "boost.num_trees" => self.boost.num_trees = parse(key, v)?,
            "boost.max_depth" => self.boost.max_depth = parse(key, v)?,
            "boost.split_policy" => self.boost.split_policy = parse::<SplitPolicy>(key, v)?,
            "boost.update_period" => self.boost.update_period = parse::<UpdatePeriod>(key, v)?,
            "boost.epsilon" => self.boost.epsilon = parse(key, v)?,
            "boost.patch_size" => self.boost.patch_size = parse(key, v)?,
            "boost.bootstrap_schedule" => {
                self.boost.bootstrap_schedule = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|s| parse(key, s.trim())).collect::<Result<_, _>>()?
                }
            }
            "boost.negatives_cap" => self.boost.negatives_cap = parse(key, v)?,
            "boost.per_image_cap" => self.boost.per_image_cap = parse(key, v)?,
            "boost.harvest_threshold" => self.boost.harvest_threshold = parse(key, v)?,
            "boost.leaf_smoothing" => self.boost.leaf_smoothing = if v == "auto" { None } else { Some(parse(key, v)?) },
            "boost.cascade" => self.boost.cascade = parse::<CascadeMode>(key, v)?,
            "train.initial_negatives" => self.initial_negatives = parse(key, v)?,
            "detector.window_h" => self.detector.window_h = parse(key, v)?,
            "detector.window_w" => self.detector.window_w = parse(key, v)?,
            "detector.stride" => self.detector.stride = parse(key, v)?,
            "detector.scales_per_octave" => self.detector.scales_per_octave = parse(key, v)?,
            "detector.min_scale" => self.detector.min_scale = parse(key, v)?,
            "detector.max_scale" => self.detector.max_scale = parse(key, v)?,
            "detector.nms_threshold" => self.detector.nms_threshold = parse(key, v)?,
            "detector.nms_mode" => self.detector.nms_mode = parse::<Overlap>(key, v)?,
            "detector.threshold" => self.detector.threshold = parse(key, v)?,
            "detector.use_cascade" => self.detector.use_cascade = parse_bool(key, v)?,
            "eval.iou_threshold" => self.eval.iou_threshold = parse(key, v)?,
            "eval.min_height" => self.eval.min_height = parse(key, v)?,
            "eval.ref_points" => self.eval.ref_points = parse(key, v)?,
            "eval.fppi_min" => self.eval.fppi_min = parse(key, v)?,
            "eval.fppi_max" => self.eval.fppi_max = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                content: raw.into(),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.apply_text(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn entries(&self) -> Vec<(String, String)> {
        let b = |x: bool| x.to_string();
        let mut out: Vec<(String, String)> = vec![
            ("seed".into(), self.seed.to_string()),
            ("channels.shrink".into(), self.channels.shrink.to_string()),
            ("channels.orientation_bins".into(), self.channels.num_orientation_bins.to_string()),
            ("channels.norm_constant".into(), self.channels.gradient_norm_constant.to_string()),
            ("channels.norm_radius".into(), self.channels.norm_radius.to_string()),
            ("filters.enabled".into(), b(self.use_filters)),
            ("filters.m".into(), self.filters.m.to_string()),
            ("filters.k".into(), self.filters.k.to_string()),
            ("filters.variant".into(), self.filters.variant.name().into()),
            ("filters.seed".into(), self.filters.seed.to_string()),
            ("filters.downsample".into(), b(self.filters.downsample)),
            ("filters.autocorr_radius".into(), self.autocorr_radius.to_string()),
        ];
        out.extend(self.boost.entries().into_iter().filter(|(k, _)| k != "boost.seed"));
        out.push(("train.initial_negatives".into(), self.initial_negatives.to_string()));
        let d = &self.detector;
        out.extend([
            ("detector.window_h".into(), d.window_h.to_string()),
            ("detector.window_w".into(), d.window_w.to_string()),
            ("detector.stride".into(), d.stride.to_string()),
            ("detector.scales_per_octave".into(), d.scales_per_octave.to_string()),
            ("detector.min_scale".into(), d.min_scale.to_string()),
            ("detector.max_scale".into(), d.max_scale.to_string()),
            ("detector.nms_threshold".into(), d.nms_threshold.to_string()),
            ("detector.nms_mode".into(), d.nms_mode.name().into()),
            ("detector.threshold".into(), d.threshold.to_string()),
            ("detector.use_cascade".into(), b(d.use_cascade)),
        ]);
        let e = &self.eval;
        out.extend([
            ("eval.iou_threshold".into(), e.iou_threshold.to_string()),
            ("eval.min_height".into(), e.min_height.to_string()),
            ("eval.ref_points".into(), e.ref_points.to_string()),
            ("eval.fppi_min".into(), e.fppi_min.to_string()),
            ("eval.fppi_max".into(), e.fppi_max.to_string()),
        ]);
        out
    }

    /// Text that [`RunConfig::parse`] reads back to an equal value.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut boost = self.boost.clone();
        boost.seed = self.seed;
        PipelineConfig {
            channels: self.channels.clone(),
            filters: self.use_filters.then(|| self.filters.clone()),
            autocorr_radius: self.autocorr_radius,
            boost,
            detector: self.detector.clone(),
            initial_negatives: self.initial_negatives,
            seed: self.seed,
        }
    }

    /// All field and cross-field checks; errors are configuration errors.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = self.pipeline();
        p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.eval.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
