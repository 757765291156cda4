//! Per-channel decorrelation filters and their convolutional application.
//!
//! A filter is an `m×m` grid stored row-major: tap `(dx, dy)` for
//! `dx, dy ∈ -r..=r` (`r = m/2`) sits at index `(dy + r)·m + (dx + r)`. This
//! is the patch order of [`crate::linstats::patch_covariance`], so an
//! eigenvector of the patch covariance is a filter without reordering.

use std::fmt::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::channels::{aggregate, ChannelError, ChannelStack, Plane};
use crate::linstats::{patch_covariance, sym_eig, Autocorrelation, LinStatsError};
use crate::rng;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("k = {k} exceeds m² = {max}")]
    KTooLarge { k: usize, max: usize },
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
    #[error("stack channels {found:?} do not match filter bank sources {expected:?}")]
    LabelMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("plane {width}x{height} smaller than filter size {m}")]
    PlaneTooSmall { width: usize, height: usize, m: usize },
    #[error("filter bank format: {0}")]
    Format(String),
    #[error(transparent)]
    LinStats(#[from] LinStatsError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FilterVariant {
    /// Eigenvectors of the `k` largest eigenvalues.
    TopK,
    /// Eigenvectors of the `k` smallest eigenvalues, smallest first.
    SmallestK,
    /// `k` orthonormalized Gaussian random filters.
    Random,
    /// Top-k filters of the `L` channel applied to every channel.
    Constant,
    /// Top-k on L, U, V; identity elsewhere.
    LuvOnly,
    /// Top-k on gradient channels; identity on L, U, V.
    GradOnly,
}

impl FilterVariant {
    pub const ALL: [FilterVariant; 6] = [
        FilterVariant::TopK,
        FilterVariant::SmallestK,
        FilterVariant::Random,
        FilterVariant::Constant,
        FilterVariant::LuvOnly,
        FilterVariant::GradOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterVariant::TopK => "top_k",
            FilterVariant::SmallestK => "smallest_k",
            FilterVariant::Random => "random",
            FilterVariant::Constant => "constant",
            FilterVariant::LuvOnly => "luv_only",
            FilterVariant::GradOnly => "grad_only",
        }
    }
}

impl std::str::FromStr for FilterVariant {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FilterVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| FilterError::InvalidConfig(format!("unknown filter variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterBankConfig {
    pub m: usize,
    pub k: usize,
    pub variant: FilterVariant,
    pub seed: u64,
    /// Block-mean downsample by 2 after filtering.
    pub downsample: bool,
}

impl Default for FilterBankConfig {
    fn default() -> Self {
        Self {
            m: 5,
            k: 4,
            variant: FilterVariant::TopK,
            seed: 0,
            downsample: true,
        }
    }
}

impl FilterBankConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.m == 0 || self.m % 2 == 0 {
            return Err(FilterError::InvalidConfig(format!("filter size m = {} must be odd", self.m)));
        }
        if self.k == 0 {
            return Err(FilterError::InvalidConfig("k must be at least 1".into()));
        }
        if self.k > self.m * self.m {
            return Err(FilterError::KTooLarge {
                k: self.k,
                max: self.m * self.m,
            });
        }
        Ok(())
    }
}

/// Filters attached to one source channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelFilters {
    pub source: String,
    /// Row-major `m×m` grids.
    pub filters: Vec<Vec<f64>>,
    /// Eigenvalues matching `filters`, when filters are eigenvectors.
    pub eigenvalues: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    pub m: usize,
    pub k: usize,
    pub variant: FilterVariant,
    pub downsample: bool,
    pub channels: Vec<ChannelFilters>,
}

impl FilterBank {
    pub fn sources(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.source.clone()).collect()
    }

    pub fn output_count(&self) -> usize {
        self.channels.iter().map(|c| c.filters.len()).sum()
    }

    pub fn output_labels(&self) -> Vec<String> {
        self.channels
            .iter()
            .flat_map(|c| (1..=c.filters.len()).map(move |j| format!("{}:f{j}", c.source)))
            .collect()
    }

    /// Factor by which [`apply_filterbank`] shrinks its input.
    pub fn downsample_factor(&self) -> usize {
        if self.downsample {
            2
        } else {
            1
        }
    }
}

pub fn delta_filter(m: usize) -> Vec<f64> {
    let mut f = vec![0.0; m * m];
    f[(m / 2) * m + m / 2] = 1.0;
    f
}

fn is_luv(label: &str) -> bool {
    matches!(label, "L" | "U" | "V")
}

fn eigen_filters(ac: &Autocorrelation, label: &str, cfg: &FilterBankConfig, smallest: bool) -> Result<ChannelFilters, FilterError> {
    let sigma = patch_covariance(ac, label, cfg.m)?;
    let eig = sym_eig(&sigma)?;
    let d = eig.dim();
    let cols: Vec<usize> = if smallest {
        (0..cfg.k).map(|i| d - 1 - i).collect()
    } else {
        (0..cfg.k).collect()
    };
    Ok(ChannelFilters {
        source: label.to_string(),
        filters: cols.iter().map(|&j| eig.vector(j)).collect(),
        eigenvalues: Some(cols.iter().map(|&j| eig.values[j]).collect()),
    })
}

fn random_filters(label: &str, cfg: &FilterBankConfig, index: usize) -> ChannelFilters {
    let d = cfg.m * cfg.m;
    let mut r = rng::substream(cfg.seed, "filterbank-random", index as u64);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cfg.k);
    while basis.len() < cfg.k {
        let mut v: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
        // two Gram-Schmidt passes for orthogonality at rounding level
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= dot * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    ChannelFilters {
        source: label.to_string(),
        filters: basis,
        eigenvalues: None,
    }
}

fn identity_filters(label: &str, m: usize) -> ChannelFilters {
    ChannelFilters {
        source: label.to_string(),
        filters: vec![delta_filter(m)],
        eigenvalues: None,
    }
}

pub fn derive_filters(ac: &Autocorrelation, cfg: &FilterBankConfig) -> Result<FilterBank, FilterError> {
    cfg.validate()?;
    let labels = ac.labels();
    let constant = if cfg.variant == FilterVariant::Constant {
        let source = if ac.channel_index("L").is_some() { "L" } else { labels[0].as_str() };
        Some(eigen_filters(ac, source, cfg, false)?)
    } else {
        None
    };
    let channels = labels
        .iter()
        .enumerate()
        .map(|(i, label)| match cfg.variant {
            FilterVariant::TopK => eigen_filters(ac, label, cfg, false),
            FilterVariant::SmallestK => eigen_filters(ac, label, cfg, true),
            FilterVariant::Random => Ok(random_filters(label, cfg, i)),
            FilterVariant::Constant => {
                let mut c = constant.clone().expect("constant filters computed");
                c.source = label.clone();
                Ok(c)
            }
            FilterVariant::LuvOnly if !is_luv(label) => Ok(identity_filters(label, cfg.m)),
            FilterVariant::GradOnly if is_luv(label) => Ok(identity_filters(label, cfg.m)),
            FilterVariant::LuvOnly | FilterVariant::GradOnly => eigen_filters(ac, label, cfg, false),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FilterBank {
        m: cfg.m,
        k: cfg.k,
        variant: cfg.variant,
        downsample: cfg.downsample,
        channels,
    })
}

/// Same-size correlation with replicated borders:
/// `out(x, y) = Σ f(dx, dy) · in(clamp(x + dx), clamp(y + dy))`.
pub fn correlate(plane: &Plane, filter: &[f64], m: usize) -> Plane {
    let (w, h) = (plane.width(), plane.height());
    if filter == delta_filter(m).as_slice() {
        return plane.clone();
    }
    let r = (m / 2) as isize;
    // padded copy makes the inner loop branch-free
    let pw = w + 2 * r as usize;
    let ph = h + 2 * r as usize;
    let mut padded = vec![0.0; pw * ph];
    for py in 0..ph {
        let sy = (py as isize - r).clamp(0, h as isize - 1) as usize;
        for px in 0..pw {
            let sx = (px as isize - r).clamp(0, w as isize - 1) as usize;
            padded[py * pw + px] = plane.data()[sy * w + sx];
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let row = &mut out[y * w..(y + 1) * w];
        for fy in 0..m {
            let src = &padded[(y + fy) * pw..(y + fy) * pw + pw];
            for fx in 0..m {
                let c = filter[fy * m + fx];
                if c == 0.0 {
                    continue;
                }
                for (o, s) in row.iter_mut().zip(&src[fx..fx + w]) {
                    *o += c * s;
                }
            }
        }
    }
    Plane::from_vec(w, h, out).expect("dimensions preserved")
}

pub fn apply_filterbank(stack: &ChannelStack, fb: &FilterBank) -> Result<ChannelStack, FilterError> {
    let sources = fb.sources();
    if stack.labels() != sources.as_slice() {
        return Err(FilterError::LabelMismatch {
            expected: sources,
            found: stack.labels().to_vec(),
        });
    }
    if stack.width() < fb.m || stack.height() < fb.m {
        return Err(FilterError::PlaneTooSmall {
            width: stack.width(),
            height: stack.height(),
            m: fb.m,
        });
    }
    let jobs: Vec<(&Plane, &Vec<f64>)> = stack
        .planes()
        .iter()
        .zip(&fb.channels)
        .flat_map(|(p, c)| c.filters.iter().map(move |f| (p, f)))
        .collect();
    let planes: Vec<Plane> = jobs.par_iter().map(|(p, f)| correlate(p, f, fb.m)).collect();
    let out = ChannelStack::new(fb.output_labels(), planes, stack.shrink())?;
    if fb.downsample {
        Ok(aggregate(&out, 2)?)
    } else {
        Ok(out)
    }
}

const HEADER: &str = "ldcf-filterbank v1";

pub fn format_filterbank(fb: &FilterBank) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "m {}", fb.m);
    let _ = writeln!(out, "k {}", fb.k);
    let _ = writeln!(out, "variant {}", fb.variant.name());
    let _ = writeln!(out, "downsample {}", u8::from(fb.downsample));
    let _ = writeln!(out, "channels {}", fb.sources().join(" "));
    for c in &fb.channels {
        let _ = writeln!(out, "channel {} {}", c.source, c.filters.len());
        match &c.eigenvalues {
            Some(ev) => {
                let ev: Vec<String> = ev.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "eigenvalues {}", ev.join(" "));
            }
            None => {
                let _ = writeln!(out, "eigenvalues -");
            }
        }
        for f in &c.filters {
            for row in f.chunks(fb.m) {
                let row: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
    }
    out
}

fn ferr(msg: impl Into<String>) -> FilterError {
    FilterError::Format(msg.into())
}

pub fn parse_filterbank(text: &str) -> Result<FilterBank, FilterError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut next = || lines.next().ok_or_else(|| ferr("unexpected end of input"));
    if next()? != HEADER {
        return Err(ferr(format!("expected header `{HEADER}`")));
    }
    fn field<'a>(line: &'a str, key: &str) -> Result<&'a str, FilterError> {
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::trim)
            .ok_or_else(|| ferr(format!("expected `{key}`, found {line:?}")))
    }
    fn num<T: std::str::FromStr>(s: &str) -> Result<T, FilterError> {
        s.parse().map_err(|_| ferr(format!("bad number {s:?}")))
    }
    let m: usize = num(field(next()?, "m")?)?;
    let k: usize = num(field(next()?, "k")?)?;
    let variant: FilterVariant = field(next()?, "variant")?.parse()?;
    let downsample = match field(next()?, "downsample")? {
        "1" => true,
        "0" => false,
        other => return Err(ferr(format!("bad downsample flag {other:?}"))),
    };
    FilterBankConfig {
        m,
        k,
        variant,
        seed: 0,
        downsample,
    }
    .validate()?;
    let sources: Vec<String> = field(next()?, "channels")?.split_whitespace().map(String::from).collect();
    let mut channels = Vec::with_capacity(sources.len());
    for src in &sources {
        let head: Vec<&str> = field(next()?, "channel")?.split_whitespace().collect();
        if head.len() != 2 || head[0] != src {
            return Err(ferr(format!("expected channel {src}")));
        }
        let count: usize = num(head[1])?;
        if count == 0 || count > m * m {
            return Err(ferr(format!("bad filter count {count}")));
        }
        let ev = field(next()?, "eigenvalues")?;
        let eigenvalues = if ev == "-" {
            None
        } else {
            let v: Vec<f64> = ev.split_whitespace().map(num).collect::<Result<_, _>>()?;
            if v.len() != count {
                return Err(ferr("eigenvalue count mismatch"));
            }
            Some(v)
        };
        let mut filters = Vec::with_capacity(count);
        for _ in 0..count {
            let mut f = Vec::with_capacity(m * m);
            for _ in 0..m {
                let row: Vec<f64> = next()?.split_whitespace().map(num).collect::<Result<_, _>>()?;
                if row.len() != m {
                    return Err(ferr(format!("filter row needs {m} values")));
                }
                f.extend(row);
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(ferr("non-finite filter tap"));
            }
            filters.push(f);
        }
        channels.push(ChannelFilters {
            source: src.clone(),
            filters,
            eigenvalues,
        });
    }
    Ok(FilterBank {
        m,
        k,
        variant,
        downsample,
        channels,
    })
}
