//! Multiscale sliding-window detection.
//!
//! Each pyramid level resamples the image bilinearly and recomputes its
//! channels (and filter responses) from scratch. Windows are scanned on a
//! grid of cells; a cell is `shrink` pixels, times two when the filter bank
//! downsamples.

mod nms;
mod text;

use rayon::prelude::*;
use thiserror::Error;

use crate::boost::{BoostedEnsemble, FeatureGeometry};
use crate::channels::{compute_channels, ChannelConfig, ChannelError, ChannelStack};
use crate::filterbank::{apply_filterbank, FilterBank, FilterError};
use crate::imgio::Image;

pub use nms::{nms, overlap, Overlap};
pub use text::{format_detections, format_sig, parse_detections, DetectionRecord};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
    #[error("image {width}x{height} is smaller than the {win_w}x{win_h} window at every allowed scale")]
    ImageTooSmall { width: usize, height: usize, win_w: usize, win_h: usize },
    #[error("model does not fit the channels: {0}")]
    GeometryMismatch(String),
    #[error("malformed detections at line {line}: {content:?}")]
    Format { line: usize, content: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorConfig {
    /// Window height in pixels.
    pub window_h: usize,
    /// Window width in pixels.
    pub window_w: usize,
    /// Window step in pixels at each level; a multiple of the cell size.
    pub stride: usize,
    pub scales_per_octave: usize,
    /// Smallest image scale scanned; 0 scans down to the window size.
    pub min_scale: f64,
    /// Largest image scale; values above 1 upsample.
    pub max_scale: f64,
    pub nms_threshold: f64,
    pub nms_mode: Overlap,
    /// Windows scoring at least this are reported.
    pub threshold: f64,
    pub use_cascade: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window_h: 128,
            window_w: 64,
            stride: 4,
            scales_per_octave: 8,
            min_scale: 0.0,
            max_scale: 1.0,
            nms_threshold: 0.65,
            nms_mode: Overlap::MinArea,
            threshold: 0.0,
            use_cascade: true,
        }
    }
}

impl DetectorConfig {
    /// Checks the fields against a cell size of `cell` pixels.
    pub fn validate(&self, cell: usize) -> Result<(), DetectError> {
        let bad = |m: String| Err(DetectError::InvalidConfig(m));
        if cell == 0 || self.window_h == 0 || self.window_w == 0 {
            return bad("window and cell sizes must be positive".into());
        }
        if self.window_h % cell != 0 || self.window_w % cell != 0 {
            return bad(format!(
                "window {}x{} is not divisible by the {cell}-pixel cell",
                self.window_w, self.window_h
            ));
        }
        if self.stride == 0 || self.stride % cell != 0 {
            return bad(format!("stride {} must be a positive multiple of the {cell}-pixel cell", self.stride));
        }
        if self.scales_per_octave == 0 {
            return bad("scales per octave must be at least 1".into());
        }
        if !(self.max_scale > 0.0 && self.max_scale.is_finite()) || !(self.min_scale >= 0.0) || self.min_scale > self.max_scale {
            return bad(format!("scale range [{}, {}] is invalid", self.min_scale, self.max_scale));
        }
        if !(self.nms_threshold > 0.0 && self.nms_threshold <= 1.0) {
            return bad(format!("NMS threshold {} outside (0, 1]", self.nms_threshold));
        }
        if self.threshold.is_nan() {
            return bad("decision threshold is NaN".into());
        }
        Ok(())
    }
}

/// A scored box in original image pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
    /// Pyramid scale the window was found at.
    pub scale: f64,
}

impl Detection {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PyramidLevel {
    /// Nominal scale `2^(-j/scales_per_octave)`.
    pub scale: f64,
    /// Actual horizontal and vertical resampling ratios after rounding.
    pub sx: f64,
    pub sy: f64,
    pub stack: ChannelStack,
}

/// Cell size in pixels of the features produced by `channels` and `fb`.
pub fn cell_size(channels: &ChannelConfig, fb: Option<&FilterBank>) -> usize {
    channels.shrink * fb.map_or(1, FilterBank::downsample_factor)
}

/// Channels of `img` at its own resolution, filtered when `fb` is given.
pub fn feature_stack(img: &Image, channels: &ChannelConfig, fb: Option<&FilterBank>) -> Result<ChannelStack, DetectError> {
    let stack = compute_channels(img, channels)?;
    match fb {
        Some(fb) => Ok(apply_filterbank(&stack, fb)?),
        None => Ok(stack),
    }
}

/// Layout of a window's feature vector.
pub fn window_geometry(channels: usize, cell: usize, det: &DetectorConfig) -> FeatureGeometry {
    FeatureGeometry {
        channels,
        height: det.window_h / cell,
        width: det.window_w / cell,
        shrink: cell,
    }
}

/// Bilinear resampling with pixel centres aligned; results are rounded to
/// the nearest 8-bit value.
pub fn resize_bilinear(img: &Image, new_w: usize, new_h: usize) -> Image {
    let (w, h, planes) = (img.width(), img.height(), img.planes());
    if (new_w, new_h) == (w, h) {
        return img.clone();
    }
    let taps = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        let ratio = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * ratio - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = src.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, src - i0 as f64)
            })
            .collect()
    };
    let xs = taps(new_w, w);
    let ys = taps(new_h, h);
    let src = img.data();
    let mut data = Vec::with_capacity(new_w * new_h * planes);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for p in 0..planes {
                let at = |x: usize, y: usize| f64::from(src[(y * w + x) * planes + p]);
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image::new(new_w, new_h, planes, data).expect("resized extent is positive")
}

/// Scales `2^(-j/n)` inside `[min_scale, max_scale]` at which the resampled
/// image still holds one window, largest first.
pub fn pyramid_scales(width: usize, height: usize, det: &DetectorConfig) -> Vec<f64> {
    let n = det.scales_per_octave as f64;
    let j0 = (-n * det.max_scale.log2() - 1e-9).ceil() as i64;
    let mut out = Vec::new();
    for j in j0.. {
        let s = (-(j as f64) / n).exp2();
        let (w, h) = scaled_extent(width, height, s);
        if s < det.min_scale * (1.0 - 1e-12) || w < det.window_w || h < det.window_h {
            break;
        }
        out.push(s);
    }
    out
}

fn scaled_extent(width: usize, height: usize, s: f64) -> (usize, usize) {
    ((width as f64 * s).round() as usize, (height as f64 * s).round() as usize)
}

pub fn build_pyramid(img: &Image, channels: &ChannelConfig, fb: Option<&FilterBank>, det: &DetectorConfig) -> Result<Vec<PyramidLevel>, DetectError> {
    det.validate(cell_size(channels, fb))?;
    let scales = pyramid_scales(img.width(), img.height(), det);
    if scales.is_empty() {
        return Err(DetectError::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            win_w: det.window_w,
            win_h: det.window_h,
        });
    }
    scales
        .par_iter()
        .map(|&scale| {
            let (w, h) = scaled_extent(img.width(), img.height(), scale);
            let resized = resize_bilinear(img, w, h);
            Ok(PyramidLevel {
                scale,
                sx: w as f64 / img.width() as f64,
                sy: h as f64 / img.height() as f64,
                stack: feature_stack(&resized, channels, fb)?,
            })
        })
        .collect()
}

fn check_geometry(levels: &[PyramidLevel], ens: &BoostedEnsemble, det: &DetectorConfig) -> Result<FeatureGeometry, DetectError> {
    let first = levels.first().ok_or_else(|| DetectError::GeometryMismatch("empty pyramid".into()))?;
    let cell = first.stack.shrink();
    det.validate(cell)?;
    let want = window_geometry(first.stack.num_channels(), cell, det);
    if let Some(l) = levels.iter().find(|l| l.stack.shrink() != cell || l.stack.num_channels() != want.channels) {
        return Err(DetectError::GeometryMismatch(format!("level at scale {} differs from the first level", l.scale)));
    }
    match ens.geometry {
        Some(g) if g == want => Ok(want),
        Some(g) => Err(DetectError::GeometryMismatch(format!(
            "model expects {} channels of {}x{} cells ({} px), channels give {} of {}x{} ({} px)",
            g.channels, g.width, g.height, g.shrink, want.channels, want.width, want.height, want.shrink
        ))),
        None if ens.dim == want.dim() => Ok(want),
        None => Err(DetectError::GeometryMismatch(format!("model dimension {} but windows have {}", ens.dim, want.dim()))),
    }
}

/// A scanned window that passed the threshold.
pub(crate) struct Hit {
    pub det: Detection,
    pub features: Option<Vec<f64>>,
}

/// Scores every stride-aligned window; returns those with score at least
/// `threshold` (and not rejected early when `use_cascade`), in
/// (level, y, x) order.
pub(crate) fn scan(levels: &[PyramidLevel], ens: &BoostedEnsemble, det: &DetectorConfig, threshold: f64, use_cascade: bool, keep_features: bool) -> Result<Vec<Hit>, DetectError> {
    let geom = check_geometry(levels, ens, det)?;
    let cell = geom.shrink;
    let step = det.stride / cell;
    let jobs: Vec<(usize, usize)> = levels
        .iter()
        .enumerate()
        .flat_map(|(li, l)| {
            let rows = if l.stack.height() >= geom.height { (l.stack.height() - geom.height) / step + 1 } else { 0 };
            (0..rows).map(move |r| (li, r * step))
        })
        .collect();
    let hits: Vec<Vec<Hit>> = jobs
        .par_iter()
        .map(|&(li, y)| {
            let l = &levels[li];
            let mut buf = Vec::with_capacity(geom.dim());
            let mut out = Vec::new();
            if l.stack.width() < geom.width {
                return out;
            }
            for x in (0..=l.stack.width() - geom.width).step_by(step) {
                l.stack.extract_window(x, y, geom.width, geom.height, &mut buf);
                let (score, rejected) = ens.score_unchecked(&buf, use_cascade);
                if rejected.is_none() && score >= threshold {
                    out.push(Hit {
                        det: Detection {
                            x: (x * cell) as f64 / l.sx,
                            y: (y * cell) as f64 / l.sy,
                            w: det.window_w as f64 / l.sx,
                            h: det.window_h as f64 / l.sy,
                            score,
                            scale: l.scale,
                        },
                        features: keep_features.then(|| buf.clone()),
                    });
                }
            }
            out
        })
        .collect();
    Ok(hits.into_iter().flatten().collect())
}

/// Windows scoring at least `det.threshold`, after NMS.
pub fn detect(levels: &[PyramidLevel], ens: &BoostedEnsemble, det: &DetectorConfig) -> Result<Vec<Detection>, DetectError> {
    let hits = scan(levels, ens, det, det.threshold, det.use_cascade, false)?;
    let dets: Vec<Detection> = hits.into_iter().map(|h| h.det).collect();
    Ok(nms(&dets, det.nms_threshold, det.nms_mode))
}
