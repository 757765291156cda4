//! Detection evaluation: greedy matching, miss rate against false positives
//! per image, and the log-average miss rate.

use thiserror::Error;

use crate::imgio::GroundTruthBox;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ground-truth boxes to evaluate against (miss rate undefined)")]
    NoGroundTruth,
    #[error("evaluation needs at least one image")]
    NoImages,
    #[error("curve has no operating points")]
    EmptyCurve,
    #[error("invalid evaluation setting: {0}")]
    InvalidConfig(String),
    #[error("detections and ground truth cover {dets} and {gts} images")]
    ImageCountMismatch { dets: usize, gts: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    /// Ground truth shorter than this is treated as ignore; shorter
    /// detections are dropped.
    pub min_height: f64,
    pub ref_points: usize,
    pub fppi_min: f64,
    pub fppi_max: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            min_height: 0.0,
            ref_points: 9,
            fppi_min: 1e-2,
            fppi_max: 1.0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(EvalError::InvalidConfig(format!("IoU threshold {} outside (0, 1]", self.iou_threshold)));
        }
        if self.ref_points == 0 || !(self.fppi_min > 0.0 && self.fppi_min <= self.fppi_max && self.fppi_max.is_finite()) {
            return Err(EvalError::InvalidConfig("reference FPPI range is invalid".into()));
        }
        if !(self.min_height >= 0.0) {
            return Err(EvalError::InvalidConfig("min height must be non-negative".into()));
        }
        Ok(())
    }
}

/// Box with a score; `x, y` is the top-left corner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchLabel {
    TruePositive,
    FalsePositive,
    /// Matched an ignore region; counts as neither.
    Ignored,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageMatch {
    /// Label per detection, in input order.
    pub labels: Vec<MatchLabel>,
    pub scores: Vec<f64>,
    /// Per ground-truth box, whether a detection claimed it. Ignore boxes
    /// are never marked.
    pub gt_matched: Vec<bool>,
    /// Number of non-ignore ground-truth boxes.
    pub num_gt: usize,
}

pub fn iou(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> f64 {
    let iw = (a.0 + a.2).min(b.0 + b.2) - a.0.max(b.0);
    let ih = (a.1 + a.3).min(b.1 + b.3) - a.1.max(b.1);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    inter / (a.2 * a.3 + b.2 * b.3 - inter)
}

/// Greedy matching in descending score order (stable for ties). Each
/// detection takes the unmatched non-ignore box of highest IoU (lowest
/// index on ties) at or above `iou_threshold`; failing that, any ignore box
/// at or above the threshold absorbs it.
pub fn match_detections(dets: &[ScoredBox], gts: &[GroundTruthBox], iou_threshold: f64) -> ImageMatch {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    let mut labels = vec![MatchLabel::FalsePositive; dets.len()];
    let mut gt_matched = vec![false; gts.len()];
    for i in order {
        let d = &dets[i];
        let db = (d.x, d.y, d.w, d.h);
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt.ignore || gt_matched[g] {
                continue;
            }
            let o = iou(db, (gt.x, gt.y, gt.w, gt.h));
            if o >= iou_threshold && best.map_or(true, |(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        if let Some((g, _)) = best {
            gt_matched[g] = true;
            labels[i] = MatchLabel::TruePositive;
        } else if gts.iter().any(|gt| gt.ignore && iou(db, (gt.x, gt.y, gt.w, gt.h)) >= iou_threshold) {
            labels[i] = MatchLabel::Ignored;
        }
    }
    ImageMatch {
        labels,
        scores: dets.iter().map(|d| d.score).collect(),
        gt_matched,
        num_gt: gts.iter().filter(|g| !g.ignore).count(),
    }
}

/// Operating points ordered by descending score threshold, so FPPI is
/// non-decreasing along the list.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalCurve {
    pub fppi: Vec<f64>,
    pub miss_rate: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub num_images: usize,
    pub num_gt: usize,
}

impl EvalCurve {
    pub fn len(&self) -> usize {
        self.fppi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fppi.is_empty()
    }

    /// `fppi,miss_rate` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fppi,miss_rate\n");
        for (f, m) in self.fppi.iter().zip(&self.miss_rate) {
            s.push_str(&format!("{f},{m}\n"));
        }
        s
    }
}

/// One point per distinct detection score: detections scoring at least that
/// score are kept. No detections gives the single point (0, 1).
pub fn curve(matches: &[ImageMatch]) -> Result<EvalCurve, EvalError> {
    if matches.is_empty() {
        return Err(EvalError::NoImages);
    }
    let num_gt: usize = matches.iter().map(|m| m.num_gt).sum();
    if num_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let mut scored: Vec<(f64, bool)> = matches
        .iter()
        .flat_map(|m| {
            m.labels
                .iter()
                .zip(&m.scores)
                .filter(|(l, _)| **l != MatchLabel::Ignored)
                .map(|(l, &s)| (s, *l == MatchLabel::TruePositive))
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let images = matches.len() as f64;
    let mut c = EvalCurve {
        fppi: Vec::new(),
        miss_rate: Vec::new(),
        thresholds: Vec::new(),
        num_images: matches.len(),
        num_gt,
    };
    if scored.is_empty() {
        c.fppi.push(0.0);
        c.miss_rate.push(1.0);
        c.thresholds.push(f64::INFINITY);
        return Ok(c);
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, &(s, is_tp)) in scored.iter().enumerate() {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        if scored.get(i + 1).map_or(true, |n| n.0 != s) {
            c.fppi.push(fp as f64 / images);
            c.miss_rate.push((num_gt - tp) as f64 / num_gt as f64);
            c.thresholds.push(s);
        }
    }
    Ok(c)
}

/// Reference FPPI values log-spaced over `[fppi_min, fppi_max]`.
pub fn reference_points(cfg: &EvalConfig) -> Vec<f64> {
    let (a, b) = (cfg.fppi_min.log10(), cfg.fppi_max.log10());
    let n = cfg.ref_points;
    (0..n)
        .map(|i| if n == 1 { 10f64.powf(a) } else { 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64) })
        .collect()
}

/// Geometric mean of the miss rates at the reference FPPI values. Each
/// reference takes the last point with FPPI at or below it (miss rate 1 if
/// there is none); zeros are floored at 1e-10.
pub fn log_average_mr_with(c: &EvalCurve, cfg: &EvalConfig) -> Result<f64, EvalError> {
    cfg.validate()?;
    if c.is_empty() {
        return Err(EvalError::EmptyCurve);
    }
    let samples: Vec<f64> = reference_points(cfg)
        .into_iter()
        .map(|r| {
            c.fppi
                .iter()
                .zip(&c.miss_rate)
                .filter(|(f, _)| **f <= r)
                .last()
                .map_or(1.0, |(_, &m)| m)
                .max(1e-10)
        })
        .collect();
    // equal samples are grouped so a constant curve averages exactly
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &m in &samples {
        match distinct.iter_mut().find(|(v, _)| *v == m) {
            Some(e) => e.1 += 1,
            None => distinct.push((m, 1)),
        }
    }
    let n = samples.len() as f64;
    let mean_log: f64 = distinct.iter().map(|&(v, k)| k as f64 / n * v.ln()).sum();
    Ok(mean_log.exp())
}

pub fn log_average_mr(c: &EvalCurve) -> Result<f64, EvalError> {
    log_average_mr_with(c, &EvalConfig::default())
}

/// Matches every image and builds the curve. `dets[i]` and `gts[i]` belong
/// to the same image.
pub fn evaluate(dets: &[Vec<ScoredBox>], gts: &[Vec<GroundTruthBox>], cfg: &EvalConfig) -> Result<EvalCurve, EvalError> {
    cfg.validate()?;
    if dets.len() != gts.len() {
        return Err(EvalError::ImageCountMismatch {
            dets: dets.len(),
            gts: gts.len(),
        });
    }
    let matches: Vec<ImageMatch> = dets
        .iter()
        .zip(gts)
        .map(|(d, g)| {
            let d: Vec<ScoredBox> = d.iter().copied().filter(|b| b.h >= cfg.min_height).collect();
            let g: Vec<GroundTruthBox> = g
                .iter()
                .map(|b| GroundTruthBox {
                    ignore: b.ignore || b.h < cfg.min_height,
                    ..*b
                })
                .collect();
            match_detections(&d, &g, cfg.iou_threshold)
        })
        .collect();
    curve(&matches)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sb(x: f64, y: f64, w: f64, h: f64, score: f64) -> ScoredBox {
        ScoredBox { x, y, w, h, score }
    }

    fn gt(x: f64, y: f64, w: f64, h: f64) -> GroundTruthBox {
        GroundTruthBox::new(x, y, w, h)
    }

    #[test]
    fn exact_match_and_lone_false_positive() {
        let m = match_detections(&[sb(0.0, 0.0, 10.0, 20.0, 1.0)], &[gt(0.0, 0.0, 10.0, 20.0)], 0.5);
        assert_eq!(m.labels, vec![MatchLabel::TruePositive]);
        assert_eq!(m.gt_matched, vec![true]);
        let m = match_detections(&[sb(0.0, 0.0, 10.0, 20.0, 1.0)], &[], 0.5);
        assert_eq!(m.labels, vec![MatchLabel::FalsePositive]);
    }

    #[test]
    fn two_detections_one_box() {
        // IoU 0.6: width 10 boxes offset so that inter/union = 0.6 → shift 2.5
        let g = gt(0.0, 0.0, 10.0, 10.0);
        let d1 = sb(2.5, 0.0, 10.0, 10.0, 2.0);
        let d2 = sb(0.0, 2.9032258064516128, 10.0, 10.0, 1.0);
        assert!((iou((d1.x, d1.y, d1.w, d1.h), (0.0, 0.0, 10.0, 10.0)) - 0.6).abs() < 1e-12);
        assert!((iou((d2.x, d2.y, d2.w, d2.h), (0.0, 0.0, 10.0, 10.0)) - 0.55).abs() < 1e-12);
        let m = match_detections(&[d2, d1], &[g], 0.5);
        assert_eq!(m.labels, vec![MatchLabel::FalsePositive, MatchLabel::TruePositive]);
    }

    #[test]
    fn ignore_regions_absorb() {
        let mut ig = gt(0.0, 0.0, 10.0, 10.0);
        ig.ignore = true;
        let m = match_detections(&[sb(0.0, 0.0, 10.0, 10.0, 1.0), sb(0.5, 0.0, 10.0, 10.0, 0.5)], &[ig], 0.5);
        assert_eq!(m.labels, vec![MatchLabel::Ignored, MatchLabel::Ignored]);
        assert_eq!(m.num_gt, 0);
        assert!(matches!(curve(&[m]), Err(EvalError::NoGroundTruth)));
    }

    #[test]
    fn perfect_and_silent_detectors() {
        let g = vec![gt(0.0, 0.0, 10.0, 10.0)];
        let perfect = match_detections(&[sb(0.0, 0.0, 10.0, 10.0, 1.0)], &g, 0.5);
        let c = curve(&[perfect]).unwrap();
        assert_eq!((c.fppi[0], c.miss_rate[0]), (0.0, 0.0));
        let silent = match_detections(&[], &g, 0.5);
        let c = curve(&[silent]).unwrap();
        assert_eq!((c.fppi.clone(), c.miss_rate.clone()), (vec![0.0], vec![1.0]));
        assert_eq!(log_average_mr(&c).unwrap(), 1.0);
    }

    #[test]
    fn three_image_hand_sweep() {
        // image 0: one box, dets 0.9 (hit) and 0.3 (miss)
        // image 1: two boxes, det 0.7 hits the first, 0.5 is a false positive
        // image 2: no boxes, det 0.5 false positive
        let gts = vec![
            vec![gt(0.0, 0.0, 10.0, 10.0)],
            vec![gt(0.0, 0.0, 10.0, 10.0), gt(50.0, 50.0, 10.0, 10.0)],
            vec![],
        ];
        let dets = vec![
            vec![sb(0.0, 0.0, 10.0, 10.0, 0.9), sb(30.0, 0.0, 10.0, 10.0, 0.3)],
            vec![sb(0.0, 0.0, 10.0, 10.0, 0.7), sb(20.0, 20.0, 10.0, 10.0, 0.5)],
            vec![sb(0.0, 0.0, 10.0, 10.0, 0.5)],
        ];
        let c = evaluate(&dets, &gts, &EvalConfig::default()).unwrap();
        // thresholds 0.9, 0.7, 0.5, 0.3
        assert_eq!(c.thresholds, vec![0.9, 0.7, 0.5, 0.3]);
        assert_eq!(c.fppi, vec![0.0, 0.0, 2.0 / 3.0, 1.0]);
        assert_eq!(c.miss_rate, vec![2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }

    fn constant_curve(mr: f64) -> EvalCurve {
        EvalCurve {
            fppi: vec![0.0, 0.5, 2.0],
            miss_rate: vec![mr; 3],
            thresholds: vec![3.0, 2.0, 1.0],
            num_images: 1,
            num_gt: 1,
        }
    }

    #[test]
    fn log_average_constants() {
        assert_eq!(log_average_mr(&constant_curve(0.5)).unwrap(), 0.5);
        assert_eq!(log_average_mr(&constant_curve(1.0)).unwrap(), 1.0);
        let empty = EvalCurve {
            fppi: vec![],
            miss_rate: vec![],
            thresholds: vec![],
            num_images: 1,
            num_gt: 1,
        };
        assert!(matches!(log_average_mr(&empty), Err(EvalError::EmptyCurve)));
    }

    #[test]
    fn log_average_hand_fixture() {
        let refs = reference_points(&EvalConfig::default());
        assert_eq!(refs.len(), 9);
        assert!((refs[4] - 0.1).abs() < 1e-15);
        // a point just at or below each reference, with halving miss rates
        let rates = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625];
        let c = EvalCurve {
            fppi: refs.clone(),
            miss_rate: rates.to_vec(),
            thresholds: (0..9).map(|i| -(i as f64)).collect(),
            num_images: 1,
            num_gt: 1,
        };
        // geometric mean of 2^0 .. 2^-8 is 2^-4
        let got = log_average_mr(&c).unwrap();
        assert!((got - 0.0625).abs() < 1e-15, "{got}");
        // zero miss rate is floored rather than sending the mean to zero
        let mut z = c.clone();
        z.miss_rate[8] = 0.0;
        let got = log_average_mr(&z).unwrap();
        let want = (rates[..8].iter().map(|r: &f64| r.ln()).sum::<f64>() + 1e-10f64.ln()) / 9.0;
        assert!((got - want.exp()).abs() < 1e-15);
    }

    #[test]
    fn adding_false_positive_never_helps() {
        let gts = vec![vec![gt(0.0, 0.0, 10.0, 10.0), gt(40.0, 0.0, 10.0, 10.0)]];
        let base = vec![vec![sb(0.0, 0.0, 10.0, 10.0, 0.9), sb(80.0, 0.0, 10.0, 10.0, 0.5), sb(40.0, 0.0, 10.0, 10.0, 0.2)]];
        let mut more = base.clone();
        more[0].push(sb(100.0, 0.0, 10.0, 10.0, 0.6));
        let cfg = EvalConfig::default();
        let a = log_average_mr(&evaluate(&base, &gts, &cfg).unwrap()).unwrap();
        let b = log_average_mr(&evaluate(&more, &gts, &cfg).unwrap()).unwrap();
        assert!(b >= a);
        let doubled = log_average_mr(&evaluate(&[base.clone(), base].concat(), &[gts.clone(), gts].concat(), &cfg).unwrap()).unwrap();
        assert_eq!(doubled, a);
    }
}
