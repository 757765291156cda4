//! Aggregate channel features.
//!
//! `compute_channels` produces ten planes per image: `L`, `U`, `V`
//! (rescaled CIE LUV), `M` (normalized gradient magnitude) and `O1..O6`
//! (unsigned orientation histogram of the raw magnitude), then aggregates
//! them by block mean with the configured shrink factor.

mod gradient;
mod io;
mod luv;

use thiserror::Error;

use crate::imgio::Image;

pub use gradient::{gradients, normalize_magnitude, orientation_histogram, triangle_smooth};
pub use io::{decode_stack, encode_stack, STACK_MAGIC};
pub use luv::{linear_rgb_to_luv, rgb_to_luv};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("expected a 3-plane color image, got {planes} plane(s)")]
    NotColorImage { planes: usize },
    #[error("plane {width}x{height} is smaller than the required {min}x{min}")]
    PlaneTooSmall { width: usize, height: usize, min: usize },
    #[error("invalid aggregation factor {0}")]
    InvalidFactor(usize),
    #[error("invalid channel config: {0}")]
    InvalidConfig(String),
    #[error("invalid channel stack: {0}")]
    InvalidStack(String),
    #[error("malformed channel stack file: {0}")]
    Format(String),
}

/// Real-valued `width × height` grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ChannelError> {
        if data.len() != width * height {
            return Err(ChannelError::InvalidStack(format!(
                "plane data length {} != {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Block mean over `factor × factor` blocks; trailing rows/columns that
    /// do not fill a block are cropped.
    fn block_mean(&self, factor: usize) -> Plane {
        let (w, h) = (self.width / factor, self.height / factor);
        let norm = (factor * factor) as f64;
        Plane::from_fn(w, h, |x, y| {
            let mut acc = 0.0;
            for dy in 0..factor {
                let row = (y * factor + dy) * self.width + x * factor;
                for dx in 0..factor {
                    acc += self.data[row + dx];
                }
            }
            acc / norm
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelConfig {
    pub shrink: usize,
    pub num_orientation_bins: usize,
    pub gradient_norm_constant: f64,
    pub norm_radius: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            shrink: 2,
            num_orientation_bins: 6,
            gradient_norm_constant: 0.005,
            norm_radius: 2,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if ![1, 2, 4].contains(&self.shrink) {
            return Err(ChannelError::InvalidConfig(format!(
                "shrink must be 1, 2 or 4 (got {})",
                self.shrink
            )));
        }
        if self.num_orientation_bins < 2 {
            return Err(ChannelError::InvalidConfig(format!(
                "need at least 2 orientation bins (got {})",
                self.num_orientation_bins
            )));
        }
        if !(self.gradient_norm_constant > 0.0 && self.gradient_norm_constant.is_finite()) {
            return Err(ChannelError::InvalidConfig(
                "gradient normalization constant must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = ["L", "U", "V", "M"].iter().map(|s| s.to_string()).collect();
        labels.extend((1..=self.num_orientation_bins).map(|b| format!("O{b}")));
        labels
    }
}

/// Per-pixel feature planes sharing one extent.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStack {
    width: usize,
    height: usize,
    shrink: usize,
    labels: Vec<String>,
    planes: Vec<Plane>,
}

impl ChannelStack {
    pub fn new(labels: Vec<String>, planes: Vec<Plane>, shrink: usize) -> Result<Self, ChannelError> {
        if labels.len() != planes.len() || planes.is_empty() {
            return Err(ChannelError::InvalidStack(format!(
                "{} labels for {} planes",
                labels.len(),
                planes.len()
            )));
        }
        let (w, h) = (planes[0].width, planes[0].height);
        if planes.iter().any(|p| p.width != w || p.height != h) {
            return Err(ChannelError::InvalidStack("planes differ in extent".into()));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(ChannelError::InvalidStack("duplicate channel labels".into()));
        }
        if planes.iter().any(|p| p.data.iter().any(|v| !v.is_finite())) {
            return Err(ChannelError::InvalidStack("non-finite plane value".into()));
        }
        if shrink == 0 {
            return Err(ChannelError::InvalidStack("shrink must be positive".into()));
        }
        Ok(Self {
            width: w,
            height: h,
            shrink,
            labels,
            planes,
        })
    }

    /// Single-plane stack, convenient for statistics on raw grids.
    pub fn single(label: &str, plane: Plane) -> Result<Self, ChannelError> {
        Self::new(vec![label.to_string()], vec![plane], 1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shrink(&self) -> usize {
        self.shrink
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn num_channels(&self) -> usize {
        self.planes.len()
    }

    pub fn plane(&self, label: &str) -> Option<&Plane> {
        self.labels.iter().position(|l| l == label).map(|i| &self.planes[i])
    }

    pub fn into_parts(self) -> (Vec<String>, Vec<Plane>, usize) {
        (self.labels, self.planes, self.shrink)
    }

    /// Copies the `win_w × win_h` window at `(x0, y0)` into `out`,
    /// channel-major then row-major.
    pub fn extract_window(&self, x0: usize, y0: usize, win_w: usize, win_h: usize, out: &mut Vec<f64>) {
        out.clear();
        for p in &self.planes {
            for y in y0..y0 + win_h {
                let row = y * self.width;
                out.extend_from_slice(&p.data[row + x0..row + x0 + win_w]);
            }
        }
    }
}

/// Computes the ten channels at full resolution and aggregates them by
/// `cfg.shrink`. Gray images are treated as RGB with equal components.
pub fn compute_channels(img: &Image, cfg: &ChannelConfig) -> Result<ChannelStack, ChannelError> {
    cfg.validate()?;
    let full = compute_full_resolution(img, cfg)?;
    aggregate(&full, cfg.shrink)
}

/// The ten channels before aggregation (`shrink = 1`).
pub fn compute_full_resolution(img: &Image, cfg: &ChannelConfig) -> Result<ChannelStack, ChannelError> {
    cfg.validate()?;
    let rgb = img.to_rgb();
    let [l, u, v] = rgb_to_luv(&rgb)?;
    let (mag, ori) = gradients(&l)?;
    let hist = orientation_histogram(&mag, &ori, cfg.num_orientation_bins);
    let m = normalize_magnitude(&mag, cfg.norm_radius, cfg.gradient_norm_constant);
    let mut planes = vec![l, u, v, m];
    planes.extend(hist);
    ChannelStack::new(cfg.labels(), planes, 1)
}

/// Block-mean aggregation. Powers of two are applied as repeated halvings
/// so that aggregating by 2 twice is identical to aggregating by 4.
pub fn aggregate(stack: &ChannelStack, factor: usize) -> Result<ChannelStack, ChannelError> {
    if factor == 0 || stack.width / factor == 0 || stack.height / factor == 0 {
        return Err(ChannelError::InvalidFactor(factor));
    }
    if factor == 1 {
        return Ok(stack.clone());
    }
    let steps: Vec<usize> = if factor.is_power_of_two() {
        vec![2; factor.trailing_zeros() as usize]
    } else {
        vec![factor]
    };
    let mut planes = stack.planes.clone();
    for &f in &steps {
        planes = planes.iter().map(|p| p.block_mean(f)).collect();
    }
    ChannelStack::new(stack.labels.clone(), planes, stack.shrink * factor)
}
