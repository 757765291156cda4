//! Gradient magnitude, unsigned orientation, orientation histograms and
//! magnitude normalization.

use std::f64::consts::PI;

use super::{ChannelError, Plane};

/// Central-difference gradients with replicated borders.
///
/// Returns `(magnitude, orientation)` with orientation folded into `[0, π)`.
pub fn gradients(luma: &Plane) -> Result<(Plane, Plane), ChannelError> {
    let (w, h) = (luma.width(), luma.height());
    if w < 3 || h < 3 {
        return Err(ChannelError::PlaneTooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let mut mag = Plane::zeros(w, h);
    let mut ori = Plane::zeros(w, h);
    for y in 0..h {
        let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let gx = (luma.get(xp, y) - luma.get(xm, y)) * 0.5;
            let gy = (luma.get(x, yp) - luma.get(x, ym)) * 0.5;
            let m = (gx * gx + gy * gy).sqrt();
            mag.set(x, y, m);
            ori.set(x, y, fold_orientation(gy.atan2(gx)));
        }
    }
    Ok((mag, ori))
}

fn fold_orientation(theta: f64) -> f64 {
    let mut t = if theta < 0.0 { theta + PI } else { theta };
    if t >= PI {
        t -= PI;
    }
    t
}

/// Soft orientation histogram: each pixel's magnitude is split linearly
/// between the two nearest of `bins` unsigned bins. Bin `b` is centred on
/// `b·π/bins`; the last bin wraps to the first.
pub fn orientation_histogram(mag: &Plane, ori: &Plane, bins: usize) -> Vec<Plane> {
    let (w, h) = (mag.width(), mag.height());
    let mut out = vec![Plane::zeros(w, h); bins];
    let scale = bins as f64 / PI;
    for i in 0..w * h {
        let m = mag.data()[i];
        if m == 0.0 {
            continue;
        }
        let t = ori.data()[i] * scale;
        let lo = t.floor();
        let frac = t - lo;
        let b0 = (lo as usize) % bins;
        let b1 = (b0 + 1) % bins;
        out[b0].data_mut()[i] += m * (1.0 - frac);
        out[b1].data_mut()[i] += m * frac;
    }
    out
}

/// Separable triangle smoothing with replicated borders; radius `r` uses
/// weights `1, 2, .., r+1, .., 2, 1` normalized to unit sum.
pub fn triangle_smooth(plane: &Plane, radius: usize) -> Plane {
    if radius == 0 {
        return plane.clone();
    }
    let r = radius as isize;
    let weights: Vec<f64> = (-r..=r).map(|d| (r + 1 - d.abs()) as f64).collect();
    let norm: f64 = weights.iter().sum();
    let (w, h) = (plane.width(), plane.height());
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut tmp = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wt) in weights.iter().enumerate() {
                acc += wt * plane.get(clamp(x as isize + k as isize - r, w), y);
            }
            tmp.set(x, y, acc / norm);
        }
    }
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wt) in weights.iter().enumerate() {
                acc += wt * tmp.get(x, clamp(y as isize + k as isize - r, h));
            }
            out.set(x, y, acc / norm);
        }
    }
    out
}

/// `M / (triangle(M) + c)`.
pub fn normalize_magnitude(mag: &Plane, radius: usize, constant: f64) -> Plane {
    let smooth = triangle_smooth(mag, radius);
    let mut out = mag.clone();
    for (v, s) in out.data_mut().iter_mut().zip(smooth.data()) {
        *v /= s + constant;
    }
    out
}
