//! Dataset-level training, detection and evaluation.
//!
//! A [`Model`] bundles the channel settings, an optional decorrelation
//! filter bank (LDCF; without one the detector is plain ACF), the window
//! layout and the boosted ensemble. Models serialize into the ensemble's
//! binary format with the extra settings stored as metadata.

use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;

use crate::boost::{decode_ensemble, encode_ensemble, train_realboost, BoostConfig, BoostError, BoostedEnsemble, NegativeSource, SigmaSource, TrainStats, TrainingSet};
use crate::channels::{compute_channels, ChannelConfig, ChannelStack};
use crate::detect::{build_pyramid, cell_size, feature_stack, nms, resize_bilinear, scan, window_geometry, Detection, DetectError, DetectorConfig, Overlap, PyramidLevel};
use crate::eval::{evaluate, log_average_mr_with, EvalConfig, EvalCurve, ScoredBox};
use crate::filterbank::{derive_filters, format_filterbank, parse_filterbank, FilterBank, FilterBankConfig};
use crate::imgio::{load_annotations, load_image, DatasetIndex, GroundTruthBox, Image};
use crate::linstats::{estimate_autocorr_fft, Autocorrelation};
use crate::{rng, Error, Result};

/// Everything needed to train one detector.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub channels: ChannelConfig,
    /// Decorrelation filters; `None` trains plain ACF.
    pub filters: Option<FilterBankConfig>,
    /// Autocorrelation radius for filter estimation; at least `m - 1`.
    pub autocorr_radius: usize,
    pub boost: BoostConfig,
    pub detector: DetectorConfig,
    /// Random negative windows drawn before the first bootstrap round.
    pub initial_negatives: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            channels: ChannelConfig::default(),
            filters: Some(FilterBankConfig::default()),
            autocorr_radius: 4,
            boost: BoostConfig::default(),
            detector: DetectorConfig::default(),
            initial_negatives: 5000,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn cell(&self) -> usize {
        self.channels.shrink * if self.filters.as_ref().is_some_and(|f| f.downsample) { 2 } else { 1 }
    }

    pub fn validate(&self) -> Result<()> {
        self.channels.validate()?;
        if let Some(f) = &self.filters {
            f.validate()?;
            if self.autocorr_radius + 1 < f.m {
                return Err(crate::config::ConfigError::Invalid(format!(
                    "autocorrelation radius {} cannot cover {}x{} filters (needs at least {})",
                    self.autocorr_radius,
                    f.m,
                    f.m,
                    f.m - 1
                ))
                .into());
            }
        }
        self.boost.validate()?;
        self.detector.validate(self.cell())?;
        if self.initial_negatives == 0 {
            return Err(crate::config::ConfigError::Invalid("initial negatives must be positive".into()).into());
        }
        Ok(())
    }
}

/// In-memory training data: annotated positive images and object-free
/// negative images.
#[derive(Clone, Debug, Default)]
pub struct TrainData {
    pub positives: Vec<(Image, Vec<GroundTruthBox>)>,
    pub negatives: Vec<Image>,
}

impl TrainData {
    pub fn load(index: &DatasetIndex) -> Result<Self> {
        let positives = index
            .positives
            .par_iter()
            .map(|e| Ok((load_image(&e.image)?, load_annotations(&e.annotation)?)))
            .collect::<Result<Vec<_>>>()?;
        let negatives = index.negatives.par_iter().map(|p| Ok(load_image(p)?)).collect::<Result<Vec<_>>>()?;
        Ok(Self { positives, negatives })
    }
}

/// Annotated images to run the detector on.
pub fn load_test_set(index: &DatasetIndex) -> Result<Vec<(Image, Vec<GroundTruthBox>)>> {
    index
        .positives
        .par_iter()
        .map(|e| Ok((load_image(&e.image)?, load_annotations(&e.annotation)?)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub channels: ChannelConfig,
    pub filters: Option<FilterBank>,
    pub detector: DetectorConfig,
    pub ensemble: BoostedEnsemble,
}

const MODEL_KEYS: &[&str] = &[
    "channels.shrink",
    "channels.orientation_bins",
    "channels.norm_constant",
    "channels.norm_radius",
    "detector.window_h",
    "detector.window_w",
    "detector.stride",
    "detector.scales_per_octave",
    "detector.min_scale",
    "detector.max_scale",
    "detector.nms_threshold",
    "detector.nms_mode",
    "detector.threshold",
    "detector.use_cascade",
];

impl Model {
    pub fn kind(&self) -> &'static str {
        if self.filters.is_some() {
            "ldcf"
        } else {
            "acf"
        }
    }

    pub fn cell(&self) -> usize {
        cell_size(&self.channels, self.filters.as_ref())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut ens = self.ensemble.clone();
        let c = &self.channels;
        let d = &self.detector;
        let values = [
            c.shrink.to_string(),
            c.num_orientation_bins.to_string(),
            c.gradient_norm_constant.to_string(),
            c.norm_radius.to_string(),
            d.window_h.to_string(),
            d.window_w.to_string(),
            d.stride.to_string(),
            d.scales_per_octave.to_string(),
            d.min_scale.to_string(),
            d.max_scale.to_string(),
            d.nms_threshold.to_string(),
            d.nms_mode.name().to_string(),
            d.threshold.to_string(),
            d.use_cascade.to_string(),
        ];
        for (k, v) in MODEL_KEYS.iter().zip(values) {
            ens.metadata.insert(format!("model.{k}"), v);
        }
        ens.metadata.insert("model.kind".into(), self.kind().into());
        if let Some(fb) = &self.filters {
            ens.metadata.insert("model.filterbank".into(), format_filterbank(fb));
        }
        encode_ensemble(&ens)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut ens = decode_ensemble(bytes)?;
        let bad = |m: String| Error::from(BoostError::Format(m));
        let mut take = |k: &str| ens.metadata.remove(&format!("model.{k}"));
        let mut vals = Vec::with_capacity(MODEL_KEYS.len());
        for k in MODEL_KEYS {
            vals.push(take(k).ok_or_else(|| bad(format!("model is missing {k}")))?);
        }
        let kind = take("kind").ok_or_else(|| bad("model is missing its kind".into()))?;
        let fb_text = take("filterbank");
        fn num<T: std::str::FromStr>(s: &str, key: &str) -> Result<T> {
            s.parse().map_err(|_| Error::from(BoostError::Format(format!("bad value {s:?} for {key}"))))
        }
        let channels = ChannelConfig {
            shrink: num(&vals[0], MODEL_KEYS[0])?,
            num_orientation_bins: num(&vals[1], MODEL_KEYS[1])?,
            gradient_norm_constant: num(&vals[2], MODEL_KEYS[2])?,
            norm_radius: num(&vals[3], MODEL_KEYS[3])?,
        };
        let detector = DetectorConfig {
            window_h: num(&vals[4], MODEL_KEYS[4])?,
            window_w: num(&vals[5], MODEL_KEYS[5])?,
            stride: num(&vals[6], MODEL_KEYS[6])?,
            scales_per_octave: num(&vals[7], MODEL_KEYS[7])?,
            min_scale: num(&vals[8], MODEL_KEYS[8])?,
            max_scale: num(&vals[9], MODEL_KEYS[9])?,
            nms_threshold: num(&vals[10], MODEL_KEYS[10])?,
            nms_mode: vals[11].parse::<Overlap>().map_err(|_| bad(format!("bad NMS mode {:?}", vals[11])))?,
            threshold: num(&vals[12], MODEL_KEYS[12])?,
            use_cascade: num(&vals[13], MODEL_KEYS[13])?,
        };
        let filters = match (kind.as_str(), fb_text) {
            ("ldcf", Some(t)) => Some(parse_filterbank(&t)?),
            ("acf", None) => None,
            (k, _) => return Err(bad(format!("inconsistent model kind {k:?}"))),
        };
        let model = Model {
            channels,
            filters,
            detector,
            ensemble: ens,
        };
        model.channels.validate()?;
        model.detector.validate(model.cell())?;
        Ok(model)
    }

    pub fn pyramid(&self, img: &Image) -> Result<Vec<PyramidLevel>, DetectError> {
        build_pyramid(img, &self.channels, self.filters.as_ref(), &self.detector)
    }

    /// Detections on `img` after NMS; images smaller than the window give
    /// none.
    pub fn detect(&self, img: &Image) -> Result<Vec<Detection>, DetectError> {
        match self.pyramid(img) {
            Ok(levels) => crate::detect::detect(&levels, &self.ensemble, &self.detector),
            Err(DetectError::ImageTooSmall { .. }) => Ok(Vec::new()),
            Err(e) => Err(e),
        }
    }
}

/// Channel stacks of every training image, the sample the autocorrelation
/// is estimated from.
pub fn estimate_autocorrelation(data: &TrainData, channels: &ChannelConfig, radius: usize) -> Result<Autocorrelation> {
    let images: Vec<&Image> = data.positives.iter().map(|(i, _)| i).chain(&data.negatives).collect();
    let stacks = images.par_iter().map(|img| compute_channels(img, channels)).collect::<Result<Vec<ChannelStack>, _>>()?;
    let usable: Vec<ChannelStack> = stacks.into_iter().filter(|s| s.width() > 2 * radius && s.height() > 2 * radius).collect();
    Ok(estimate_autocorr_fft(&usable, radius)?)
}

/// Feature vector of the window covering `b`, taken from `img` resampled so
/// that the box height matches the window. `None` when the window would
/// leave the image.
pub fn box_features(img: &Image, b: &GroundTruthBox, channels: &ChannelConfig, fb: Option<&FilterBank>, det: &DetectorConfig) -> Result<Option<Vec<f64>>, DetectError> {
    let cell = cell_size(channels, fb);
    let s = det.window_h as f64 / b.h;
    let (w, h) = ((img.width() as f64 * s).round() as usize, (img.height() as f64 * s).round() as usize);
    if w < det.window_w || h < det.window_h {
        return Ok(None);
    }
    let (sx, sy) = (w as f64 / img.width() as f64, h as f64 / img.height() as f64);
    // centre the window on the box centre
    let cx = (b.x + b.w / 2.0) * sx - det.window_w as f64 / 2.0;
    let cy = (b.y + b.h / 2.0) * sy - det.window_h as f64 / 2.0;
    let (gx, gy) = ((cx / cell as f64).round(), (cy / cell as f64).round());
    let stack = feature_stack(&resize_bilinear(img, w, h), channels, fb)?;
    let geom = window_geometry(stack.num_channels(), cell, det);
    if gx < 0.0 || gy < 0.0 || gx as usize + geom.width > stack.width() || gy as usize + geom.height > stack.height() {
        return Ok(None);
    }
    let mut out = Vec::with_capacity(geom.dim());
    stack.extract_window(gx as usize, gy as usize, geom.width, geom.height, &mut out);
    Ok(Some(out))
}

/// Cached pyramids of negative images, scanned for hard negatives.
pub struct NegativePool<'a> {
    levels: Vec<Vec<PyramidLevel>>,
    det: &'a DetectorConfig,
}

impl<'a> NegativePool<'a> {
    pub fn new(images: &[Image], channels: &ChannelConfig, fb: Option<&FilterBank>, det: &'a DetectorConfig) -> Result<Self, DetectError> {
        let levels = images
            .iter()
            .map(|img| match build_pyramid(img, channels, fb, det) {
                Err(DetectError::ImageTooSmall { .. }) => Ok(Vec::new()),
                other => other,
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { levels, det })
    }

    /// `count` windows drawn uniformly: image `k mod N`, then a random level
    /// and a random stride-aligned position.
    pub fn random_windows(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let images: Vec<&Vec<PyramidLevel>> = self.levels.iter().filter(|l| !l.is_empty()).collect();
        if images.is_empty() {
            return Vec::new();
        }
        let mut r = rng::stream(seed, "initial-negatives");
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let levels = images[k % images.len()];
            let l = &levels[r.gen_range(0..levels.len())];
            let cell = l.stack.shrink();
            let step = self.det.stride / cell;
            let geom = window_geometry(l.stack.num_channels(), cell, self.det);
            let nx = (l.stack.width() - geom.width) / step + 1;
            let ny = (l.stack.height() - geom.height) / step + 1;
            let (x, y) = (r.gen_range(0..nx) * step, r.gen_range(0..ny) * step);
            let mut buf = Vec::with_capacity(geom.dim());
            l.stack.extract_window(x, y, geom.width, geom.height, &mut buf);
            out.push(buf);
        }
        out
    }
}

impl NegativeSource for NegativePool<'_> {
    fn harvest(&mut self, ens: &BoostedEnsemble, round: usize, threshold: f64, per_image_cap: usize, max_total: usize) -> Result<Vec<Vec<f64>>, BoostError> {
        let mut all: Vec<(f64, Vec<f64>)> = Vec::new();
        for levels in self.levels.iter().filter(|l| !l.is_empty()) {
            let mut hits = scan(levels, ens, self.det, threshold, false, true).map_err(|e| BoostError::InvalidTrainingSet(e.to_string()))?;
            hits.sort_by(|a, b| b.det.score.total_cmp(&a.det.score));
            all.extend(hits.into_iter().take(per_image_cap).map(|h| (h.det.score, h.features.expect("features kept"))));
        }
        all.sort_by(|a, b| b.0.total_cmp(&a.0));
        all.truncate(max_total);
        info!("bootstrap round {round}: {} hard negatives", all.len());
        Ok(all.into_iter().map(|(_, f)| f).collect())
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub model: Model,
    pub stats: TrainStats,
    pub positives_used: usize,
    pub positives_skipped: usize,
}

/// Filters (if configured), positive windows, random then hard negatives,
/// boosting.
pub fn train(data: &TrainData, cfg: &PipelineConfig) -> Result<TrainReport> {
    train_with(data, cfg, None)
}

/// As [`train`], with `filters` used as given instead of being estimated
/// from the training images. Ignored when `cfg.filters` is `None`.
pub fn train_with(data: &TrainData, cfg: &PipelineConfig, filters: Option<FilterBank>) -> Result<TrainReport> {
    cfg.validate()?;
    if data.positives.iter().all(|(_, b)| b.iter().all(|b| b.ignore)) {
        return Err(BoostError::EmptyPositives.into());
    }
    if data.negatives.is_empty() {
        return Err(BoostError::InvalidTrainingSet("no negative images".into()).into());
    }
    let filters = match (&cfg.filters, filters) {
        (None, _) => None,
        (Some(_), Some(fb)) => {
            let want = cfg.channels.labels();
            if fb.sources() != want {
                return Err(crate::filterbank::FilterError::LabelMismatch {
                    expected: want,
                    found: fb.sources(),
                }
                .into());
            }
            Some(fb)
        }
        (Some(fc), None) => {
            let ac = estimate_autocorrelation(data, &cfg.channels, cfg.autocorr_radius)?;
            Some(derive_filters(&ac, fc)?)
        }
    };
    let fb = filters.as_ref();
    let jobs: Vec<(&Image, &GroundTruthBox)> = data.positives.iter().flat_map(|(img, boxes)| boxes.iter().filter(|b| !b.ignore).map(move |b| (img, b))).collect();
    let pos = jobs.par_iter().map(|(img, b)| box_features(img, b, &cfg.channels, fb, &cfg.detector)).collect::<Result<Vec<_>, _>>()?;
    let skipped = pos.iter().filter(|p| p.is_none()).count();
    let pos: Vec<Vec<f64>> = pos.into_iter().flatten().collect();
    if skipped > 0 {
        warn!("{skipped} positive boxes do not fit a window and were skipped");
    }
    if pos.is_empty() {
        return Err(BoostError::EmptyPositives.into());
    }

    let mut pool = NegativePool::new(&data.negatives, &cfg.channels, fb, &cfg.detector)?;
    let neg = pool.random_windows(cfg.initial_negatives.min(cfg.boost.negatives_cap), cfg.seed);
    if neg.is_empty() {
        return Err(BoostError::InvalidTrainingSet("negative images are all smaller than the window".into()).into());
    }
    let mut labels = vec![1i8; pos.len()];
    labels.extend(std::iter::repeat(-1i8).take(neg.len()));
    let n_pos = pos.len();
    let rows: Vec<Vec<f64>> = pos.into_iter().chain(neg).collect();
    let geom = window_geometry(rows_channels(&cfg.channels, fb), cfg.cell(), &cfg.detector);
    let ts = TrainingSet::from_rows(&rows, labels, Some(geom))?;
    drop(rows);
    info!("training on {} positives and {} negatives, {} features", n_pos, ts.len() - n_pos, ts.dim());

    let mut boost = cfg.boost.clone();
    boost.seed = cfg.seed;
    let sigma = boost.split_policy.is_oblique().then_some(SigmaSource::PerPatch);
    let outcome = train_realboost(&ts, &boost, sigma.as_ref(), Some(&mut pool))?;
    if outcome.stats.no_negatives_harvested {
        warn!("a bootstrap round found no hard negatives");
    }
    Ok(TrainReport {
        model: Model {
            channels: cfg.channels.clone(),
            filters,
            detector: cfg.detector.clone(),
            ensemble: outcome.ensemble,
        },
        stats: outcome.stats,
        positives_used: n_pos,
        positives_skipped: skipped,
    })
}

fn rows_channels(channels: &ChannelConfig, fb: Option<&FilterBank>) -> usize {
    fb.map_or(channels.labels().len(), FilterBank::output_count)
}

pub fn to_scored(dets: &[Detection]) -> Vec<ScoredBox> {
    dets.iter()
        .map(|d| ScoredBox {
            x: d.x,
            y: d.y,
            w: d.w,
            h: d.h,
            score: d.score,
        })
        .collect()
}

/// Detections for each image, in order.
pub fn detect_all(model: &Model, images: &[&Image]) -> Result<Vec<Vec<Detection>>> {
    images.iter().map(|img| Ok(model.detect(img)?)).collect()
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub curve: EvalCurve,
    pub log_average_miss_rate: f64,
    pub detections: Vec<Vec<Detection>>,
}

pub fn evaluate_model(model: &Model, test: &[(Image, Vec<GroundTruthBox>)], cfg: &EvalConfig) -> Result<EvalReport> {
    let images: Vec<&Image> = test.iter().map(|(i, _)| i).collect();
    let detections = detect_all(model, &images)?;
    let scored: Vec<Vec<ScoredBox>> = detections.iter().map(|d| to_scored(d)).collect();
    let gts: Vec<Vec<GroundTruthBox>> = test.iter().map(|(_, g)| g.clone()).collect();
    let curve = evaluate(&scored, &gts, cfg)?;
    let lamr = log_average_mr_with(&curve, cfg)?;
    Ok(EvalReport {
        curve,
        log_average_miss_rate: lamr,
        detections,
    })
}

/// Greedy NMS re-exported for callers that post-process raw windows.
pub fn suppress(dets: &[Detection], det: &DetectorConfig) -> Vec<Detection> {
    nms(dets, det.nms_threshold, det.nms_mode)
}
