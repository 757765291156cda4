//! Planted-pattern detection dataset.
//!
//! Backgrounds are smooth, strongly correlated luminance clutter plus
//! per-pixel noise. Objects are a faint zero-mean template (a bright
//! vertical body with a head, flanked by darker margins) added to the
//! clutter at cell-aligned positions, so low-frequency clutter carries no
//! signal while the object lives at mid frequencies.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::RunConfig;
use crate::imgio::{format_annotations, save_image, GroundTruthBox, Image, ImgIoError};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataConfig {
    pub window_h: usize,
    pub window_w: usize,
    pub train_positives: usize,
    pub train_negatives: usize,
    pub test_images: usize,
    /// Extent of training positive images (one object each).
    pub pos_size: (usize, usize),
    /// Extent of negative and test images.
    pub scene_size: (usize, usize),
    pub max_objects: usize,
    /// Standard deviation (gray levels) of the smooth clutter.
    pub clutter_amplitude: f64,
    /// Gaussian correlation length of the clutter in pixels.
    pub clutter_scale: f64,
    /// Per-pixel white noise standard deviation.
    pub noise_amplitude: f64,
    /// Peak template contrast in gray levels.
    pub object_amplitude: f64,
    /// Positions are multiples of this many pixels.
    pub align: usize,
}

impl Default for SynthDataConfig {
    fn default() -> Self {
        Self {
            window_h: 32,
            window_w: 16,
            train_positives: 100,
            train_negatives: 100,
            test_images: 100,
            pos_size: (32, 48),
            scene_size: (64, 64),
            max_objects: 2,
            clutter_amplitude: 30.0,
            clutter_scale: 6.0,
            noise_amplitude: 12.0,
            object_amplitude: 14.0,
            align: 4,
        }
    }
}

/// Overrides for end-to-end runs on the generated dataset: small windows,
/// 256 depth-2 trees, and no soft cascade, since thresholds calibrated on
/// 100 training positives sit far above held-out positive scores.
pub const DESK_CONFIG: &str = "\
boost.num_trees = 256
boost.max_depth = 2
boost.bootstrap_schedule = 32,128
boost.negatives_cap = 5000
boost.cascade = none
train.initial_negatives = 2000
detector.window_h = 32
detector.window_w = 16
detector.threshold = -inf
";

/// Defaults with [`DESK_CONFIG`] applied.
pub fn desk_config() -> RunConfig {
    RunConfig::parse(DESK_CONFIG).expect("desk config parses")
}

/// Images with their ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub train_positives: Vec<(Image, Vec<GroundTruthBox>)>,
    pub train_negatives: Vec<Image>,
    pub test: Vec<(Image, Vec<GroundTruthBox>)>,
}

/// Zero-mean object template, row-major `window_h × window_w`, peak 1.
pub fn template(h: usize, w: usize) -> Vec<f64> {
    let mut t = vec![0.0; h * w];
    let cx = (w as f64 - 1.0) / 2.0;
    for y in 0..h {
        for x in 0..w {
            let fx = (x as f64 - cx) / (w as f64 / 2.0);
            let fy = y as f64 / h as f64;
            // head: top fifth, narrow; body: below, wider; darker margins
            let v = if fy < 0.22 {
                if fx.abs() < 0.3 {
                    1.0
                } else {
                    -0.6
                }
            } else if fx.abs() < 0.45 {
                0.8
            } else {
                -0.8
            };
            t[y * w + x] = v;
        }
    }
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    t.iter_mut().for_each(|v| *v -= mean);
    let peak = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    t.iter_mut().for_each(|v| *v /= peak);
    t
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Unit-variance smooth field: white noise blurred by a separable Gaussian
/// with wrap-around borders.
fn smooth_field(w: usize, h: usize, sigma: f64, r: &mut ChaCha8Rng) -> Vec<f64> {
    let white: Vec<f64> = (0..w * h).map(|_| r.sample(StandardNormal)).collect();
    let k = gaussian_kernel(sigma);
    let rad = (k.len() / 2) as isize;
    let wrap = |i: isize, n: usize| i.rem_euclid(n as isize) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k.iter().enumerate().map(|(j, kv)| kv * white[y * w + wrap(x as isize + j as isize - rad, w)]).sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k.iter().enumerate().map(|(j, kv)| kv * tmp[wrap(y as isize + j as isize - rad, h) * w + x]).sum();
        }
    }
    // Σk² per axis is the variance left by the blur
    let gain: f64 = k.iter().map(|v| v * v).sum::<f64>();
    out.iter_mut().for_each(|v| *v /= gain);
    out
}

fn scene(cfg: &SynthDataConfig, w: usize, h: usize, boxes: &[GroundTruthBox], r: &mut ChaCha8Rng) -> Image {
    let lum = smooth_field(w, h, cfg.clutter_scale, r);
    let chroma_a = smooth_field(w, h, cfg.clutter_scale * 2.0, r);
    let chroma_b = smooth_field(w, h, cfg.clutter_scale * 2.0, r);
    let tpl = template(cfg.window_h, cfg.window_w);
    let mut base: Vec<f64> = lum.iter().map(|v| 128.0 + cfg.clutter_amplitude * v).collect();
    for b in boxes {
        let (bx, by) = (b.x as usize, b.y as usize);
        for y in 0..cfg.window_h {
            for x in 0..cfg.window_w {
                base[(by + y) * w + bx + x] += cfg.object_amplitude * tpl[y * cfg.window_w + x];
            }
        }
    }
    let mut data = Vec::with_capacity(w * h * 3);
    for i in 0..w * h {
        let chroma = [0.3 * chroma_a[i], -0.3 * chroma_a[i] + 0.3 * chroma_b[i], -0.3 * chroma_b[i]];
        for c in chroma {
            let n: f64 = r.sample(StandardNormal);
            let v = base[i] + cfg.clutter_amplitude * c + cfg.noise_amplitude * n;
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    Image::new(w, h, 3, data).expect("positive extent")
}

/// Up to `count` non-overlapping aligned boxes inside `w × h`.
fn place(cfg: &SynthDataConfig, w: usize, h: usize, count: usize, r: &mut ChaCha8Rng) -> Vec<GroundTruthBox> {
    let a = cfg.align.max(1);
    let nx = (w - cfg.window_w) / a + 1;
    let ny = (h - cfg.window_h) / a + 1;
    let mut boxes: Vec<GroundTruthBox> = Vec::new();
    for _ in 0..count {
        for _attempt in 0..50 {
            let x = (r.gen_range(0..nx) * a) as f64;
            let y = (r.gen_range(0..ny) * a) as f64;
            let (bw, bh) = (cfg.window_w as f64, cfg.window_h as f64);
            let clear = boxes.iter().all(|b| x + bw <= b.x || b.x + b.w <= x || y + bh <= b.y || b.y + b.h <= y);
            if clear {
                boxes.push(GroundTruthBox::new(x, y, bw, bh));
                break;
            }
        }
    }
    boxes
}

pub fn generate(cfg: &SynthDataConfig, seed: u64) -> SynthDataset {
    let (pw, ph) = cfg.pos_size;
    let (sw, sh) = cfg.scene_size;
    assert!(pw >= cfg.window_w && ph >= cfg.window_h && sw >= cfg.window_w && sh >= cfg.window_h, "images must hold a window");
    let train_positives = (0..cfg.train_positives)
        .map(|i| {
            let mut r = rng::substream(seed, "synthdata-pos", i as u64);
            let boxes = place(cfg, pw, ph, 1, &mut r);
            (scene(cfg, pw, ph, &boxes, &mut r), boxes)
        })
        .collect();
    let train_negatives = (0..cfg.train_negatives)
        .map(|i| {
            let mut r = rng::substream(seed, "synthdata-neg", i as u64);
            scene(cfg, sw, sh, &[], &mut r)
        })
        .collect();
    let test = (0..cfg.test_images)
        .map(|i| {
            let mut r = rng::substream(seed, "synthdata-test", i as u64);
            let n = r.gen_range(0..=cfg.max_objects);
            let boxes = place(cfg, sw, sh, n, &mut r);
            (scene(cfg, sw, sh, &boxes, &mut r), boxes)
        })
        .collect();
    SynthDataset {
        train_positives,
        train_negatives,
        test,
    }
}

fn write_all(dir: &Path, items: &[(Image, Vec<GroundTruthBox>)], annot: Option<&Path>) -> Result<(), ImgIoError> {
    for (i, (img, boxes)) in items.iter().enumerate() {
        let name = format!("img{i:04}");
        save_image(&dir.join(format!("{name}.ppm")), img)?;
        if let Some(a) = annot {
            let path = a.join(format!("{name}.txt"));
            std::fs::write(&path, format_annotations(boxes)).map_err(|source| ImgIoError::Io { path, source })?;
        }
    }
    Ok(())
}

/// Writes `train/{pos,pos-annot,neg}` and `test/{pos,pos-annot}` under
/// `root`, the layout `scan_dataset` reads.
pub fn write_dataset(ds: &SynthDataset, root: &Path) -> Result<(), ImgIoError> {
    let mk = |p: &Path| std::fs::create_dir_all(p).map_err(|source| ImgIoError::Io { path: p.to_path_buf(), source });
    let (tp, ta, tn) = (root.join("train/pos"), root.join("train/pos-annot"), root.join("train/neg"));
    let (sp, sa) = (root.join("test/pos"), root.join("test/pos-annot"));
    for d in [&tp, &ta, &tn, &sp, &sa] {
        mk(d)?;
    }
    write_all(&tp, &ds.train_positives, Some(&ta))?;
    let negs: Vec<(Image, Vec<GroundTruthBox>)> = ds.train_negatives.iter().map(|i| (i.clone(), Vec::new())).collect();
    write_all(&tn, &negs, None)?;
    write_all(&sp, &ds.test, Some(&sa))
}
