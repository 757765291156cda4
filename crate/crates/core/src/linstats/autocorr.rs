//! Stationary autocovariance of channel planes.
//!
//! For each plane the mean is removed and the linear (non-circular)
//! autocovariance sum `S(Δx, Δy) = Σ c(p) c(p + Δ)` over all pixel pairs
//! inside the plane is formed, together with the pair count
//! `N(Δ) = (W - |Δx|)(H - |Δy|)`. Per-image sums are pooled over the image
//! list, `C(Δ) = Σ S / Σ N`, then symmetrized so `C(Δ) = C(-Δ)` exactly.
//!
//! Two routes compute `S`: an FFT route (zero padding to `(H+R)×(W+R)`,
//! squared magnitude spectrum, inverse transform) and a direct double loop
//! used as the reference.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::LinStatsError;
use crate::channels::{ChannelStack, Plane};

/// Per-channel autocovariance grid for offsets `|Δx|, |Δy| ≤ R`.
///
/// Grids are stored row-major over `Δy = -R..=R` (rows) and
/// `Δx = -R..=R` (columns). Pair counts are shared by all channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Autocorrelation {
    radius: usize,
    labels: Vec<String>,
    grids: Vec<Vec<f64>>,
    counts: Vec<u64>,
}

impl Autocorrelation {
    pub fn new(radius: usize, labels: Vec<String>, grids: Vec<Vec<f64>>, counts: Vec<u64>) -> Result<Self, LinStatsError> {
        let side = 2 * radius + 1;
        if labels.len() != grids.len() || labels.is_empty() {
            return Err(LinStatsError::ChannelMismatch(format!(
                "{} labels for {} grids",
                labels.len(),
                grids.len()
            )));
        }
        if counts.len() != side * side || grids.iter().any(|g| g.len() != side * side) {
            return Err(LinStatsError::DimensionMismatch {
                expected: side * side,
                found: counts.len(),
            });
        }
        Ok(Self {
            radius,
            labels,
            grids,
            counts,
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn grids(&self) -> &[Vec<f64>] {
        &self.grids
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    fn index(&self, dx: isize, dy: isize) -> Option<usize> {
        let r = self.radius as isize;
        if dx.abs() > r || dy.abs() > r {
            return None;
        }
        Some(((dy + r) * (2 * r + 1) + dx + r) as usize)
    }

    /// `C(Δx, Δy)` for the channel at `channel`, or `None` outside the radius.
    pub fn get(&self, channel: usize, dx: isize, dy: isize) -> Option<f64> {
        self.index(dx, dy).map(|i| self.grids[channel][i])
    }

    pub fn count(&self, dx: isize, dy: isize) -> Option<u64> {
        self.index(dx, dy).map(|i| self.counts[i])
    }

    /// Builds an autocorrelation from an analytic stationary model
    /// `C(Δx, Δy)`; counts are set to 1.
    pub fn from_fn(radius: usize, labels: Vec<String>, f: impl Fn(usize, isize, isize) -> f64) -> Self {
        let r = radius as isize;
        let grids = (0..labels.len())
            .map(|c| {
                let mut g = Vec::new();
                for dy in -r..=r {
                    for dx in -r..=r {
                        g.push(f(c, dx, dy));
                    }
                }
                g
            })
            .collect();
        let side = 2 * radius + 1;
        Self {
            radius,
            labels,
            grids,
            counts: vec![1; side * side],
        }
    }

    pub fn max_abs_diff(&self, other: &Autocorrelation) -> f64 {
        self.grids
            .iter()
            .flatten()
            .zip(other.grids.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Route {
    Fft,
    Brute,
}

pub fn estimate_autocorr_fft(images: &[ChannelStack], radius: usize) -> Result<Autocorrelation, LinStatsError> {
    estimate(images, radius, Route::Fft)
}

pub fn estimate_autocorr_brute(images: &[ChannelStack], radius: usize) -> Result<Autocorrelation, LinStatsError> {
    estimate(images, radius, Route::Brute)
}

fn estimate(images: &[ChannelStack], radius: usize, route: Route) -> Result<Autocorrelation, LinStatsError> {
    let first = images.first().ok_or(LinStatsError::EmptyImageList)?;
    let labels = first.labels().to_vec();
    let min = 2 * radius + 1;
    for s in images {
        if s.labels() != labels.as_slice() {
            return Err(LinStatsError::ChannelMismatch(format!(
                "expected channels {:?}, found {:?}",
                labels,
                s.labels()
            )));
        }
        if s.width() < min || s.height() < min {
            return Err(LinStatsError::PlaneTooSmall {
                width: s.width(),
                height: s.height(),
                min,
            });
        }
    }
    let side = 2 * radius + 1;
    let nch = labels.len();

    // per image: per channel sums, computed in parallel, pooled in index order
    let per_image: Vec<Vec<Vec<f64>>> = images
        .par_iter()
        .map(|s| {
            let mut planner = FftPlanner::new();
            let plans = match route {
                Route::Fft => Some(FftPlans::new(&mut planner, s.width() + radius, s.height() + radius)),
                Route::Brute => None,
            };
            s.planes()
                .iter()
                .map(|p| match &plans {
                    Some(plans) => plans.sums(p, radius),
                    None => brute_sums(p, radius),
                })
                .collect()
        })
        .collect();

    let mut sums = vec![vec![0.0; side * side]; nch];
    let mut counts = vec![0u64; side * side];
    for (s, img) in images.iter().zip(&per_image) {
        for (acc, channel) in sums.iter_mut().zip(img) {
            for (a, v) in acc.iter_mut().zip(channel) {
                *a += v;
            }
        }
        for (i, c) in counts.iter_mut().enumerate() {
            let dy = (i / side) as isize - radius as isize;
            let dx = (i % side) as isize - radius as isize;
            *c += pair_count(s.width(), s.height(), dx, dy);
        }
    }

    let grids = sums
        .into_iter()
        .map(|s| {
            let mut g: Vec<f64> = s.iter().zip(&counts).map(|(v, &n)| v / n as f64).collect();
            // C(Δ) and C(-Δ) sit at mirrored grid positions
            let len = g.len();
            for i in 0..len / 2 {
                let j = len - 1 - i;
                let v = 0.5 * (g[i] + g[j]);
                g[i] = v;
                g[j] = v;
            }
            g
        })
        .collect();
    Autocorrelation::new(radius, labels, grids, counts)
}

fn pair_count(w: usize, h: usize, dx: isize, dy: isize) -> u64 {
    ((w - dx.unsigned_abs()) * (h - dy.unsigned_abs())) as u64
}

fn centered(p: &Plane) -> Vec<f64> {
    let mean = p.mean();
    p.data().iter().map(|v| v - mean).collect()
}

/// Direct `O(p·R²)` autocovariance sums of one plane.
pub(crate) fn brute_sums(p: &Plane, radius: usize) -> Vec<f64> {
    let (w, h) = (p.width() as isize, p.height() as isize);
    let c = centered(p);
    let r = radius as isize;
    let mut out = Vec::with_capacity((2 * radius + 1).pow(2));
    for dy in -r..=r {
        for dx in -r..=r {
            let mut acc = 0.0;
            for y in 0.max(-dy)..h.min(h - dy) {
                for x in 0.max(-dx)..w.min(w - dx) {
                    acc += c[(y * w + x) as usize] * c[((y + dy) * w + x + dx) as usize];
                }
            }
            out.push(acc);
        }
    }
    out
}

struct FftPlans {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl FftPlans {
    fn new(planner: &mut FftPlanner<f64>, width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn transform(&self, buf: &mut [Complex<f64>], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        let (w, h) = (self.width, self.height);
        for r in buf.chunks_exact_mut(w) {
            row.process(r);
        }
        let mut column = vec![Complex::new(0.0, 0.0); h];
        for x in 0..w {
            for y in 0..h {
                column[y] = buf[y * w + x];
            }
            col.process(&mut column);
            for y in 0..h {
                buf[y * w + x] = column[y];
            }
        }
    }

    /// Wiener-Khinchin: autocovariance is the inverse transform of the
    /// power spectrum of the zero-padded, mean-removed plane.
    fn sums(&self, p: &Plane, radius: usize) -> Vec<f64> {
        let (pw, ph) = (self.width, self.height);
        let c = centered(p);
        let mut buf = vec![Complex::new(0.0, 0.0); pw * ph];
        for y in 0..p.height() {
            for x in 0..p.width() {
                buf[y * pw + x].re = c[y * p.width() + x];
            }
        }
        self.transform(&mut buf, &self.row_fwd, &self.col_fwd);
        for v in buf.iter_mut() {
            *v = Complex::new(v.norm_sqr(), 0.0);
        }
        self.transform(&mut buf, &self.row_inv, &self.col_inv);
        let norm = (pw * ph) as f64;
        let r = radius as isize;
        let mut out = Vec::with_capacity((2 * radius + 1).pow(2));
        for dy in -r..=r {
            for dx in -r..=r {
                let yy = dy.rem_euclid(ph as isize) as usize;
                let xx = dx.rem_euclid(pw as isize) as usize;
                out.push(buf[yy * pw + xx].re / norm);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn stack(w: usize, h: usize, f: impl FnMut(usize, usize) -> f64) -> ChannelStack {
        ChannelStack::single("x", Plane::from_fn(w, h, f)).unwrap()
    }

    #[test]
    fn constant_plane_is_zero() {
        let imgs = vec![stack(9, 9, |_, _| 3.5)];
        for ac in [estimate_autocorr_fft(&imgs, 2).unwrap(), estimate_autocorr_brute(&imgs, 2).unwrap()] {
            assert!(ac.grids()[0].iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn hand_computed_row_plane() {
        // [0, 1, 0] centers to [-1/3, 2/3, -1/3]
        let p = Plane::from_vec(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let s = brute_sums(&p, 1);
        // row Δy = 0 sits in the middle of the 3x3 grid
        let c0 = s[4] / 3.0;
        let c1 = s[5] / 2.0;
        let cm1 = s[3] / 2.0;
        assert!((c0 - 2.0 / 9.0).abs() < 1e-15);
        assert!((c1 + 2.0 / 9.0).abs() < 1e-15);
        assert!((cm1 + 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn fft_matches_brute_on_fixed_plane() {
        let mut r = rng::stream(9, "ac-fixed");
        let imgs = vec![stack(8, 8, |_, _| r.gen::<f64>())];
        let a = estimate_autocorr_fft(&imgs, 3).unwrap();
        let b = estimate_autocorr_brute(&imgs, 3).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-9);
        assert_eq!(a.counts(), b.counts());
        assert_eq!(a.count(0, 0), Some(64));
        assert_eq!(a.count(-3, 2), Some(5 * 6));
    }

    #[test]
    fn symmetric_and_nonnegative_variance() {
        let mut r = rng::stream(10, "ac-sym");
        let imgs: Vec<_> = (0..3).map(|_| stack(11, 9, |_, _| r.gen::<f64>())).collect();
        let ac = estimate_autocorr_fft(&imgs, 4).unwrap();
        for dy in -4..=4isize {
            for dx in -4..=4isize {
                assert_eq!(ac.get(0, dx, dy), ac.get(0, -dx, -dy));
            }
        }
        assert!(ac.get(0, 0, 0).unwrap() >= 0.0);
    }

    #[test]
    fn white_noise_statistics() {
        let mut r = rng::stream(11, "ac-white");
        let imgs: Vec<_> = (0..50)
            .map(|_| stack(64, 64, |_, _| r.sample::<f64, _>(StandardNormal)))
            .collect();
        let ac = estimate_autocorr_fft(&imgs, 4).unwrap();
        assert!((ac.get(0, 0, 0).unwrap() - 1.0).abs() <= 0.05);
        for dy in -4..=4isize {
            for dx in -4..=4isize {
                if (dx, dy) != (0, 0) {
                    assert!(ac.get(0, dx, dy).unwrap().abs() <= 0.05);
                }
            }
        }
    }

    #[test]
    fn input_errors() {
        assert!(matches!(estimate_autocorr_fft(&[], 2), Err(LinStatsError::EmptyImageList)));
        let small = vec![stack(4, 9, |_, _| 0.0)];
        assert!(matches!(estimate_autocorr_brute(&small, 2), Err(LinStatsError::PlaneTooSmall { .. })));
        let mixed = vec![
            stack(9, 9, |_, _| 0.0),
            ChannelStack::single("y", Plane::zeros(9, 9)).unwrap(),
        ];
        assert!(matches!(estimate_autocorr_fft(&mixed, 2), Err(LinStatsError::ChannelMismatch(_))));
    }
}
