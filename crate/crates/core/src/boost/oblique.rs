//! Oblique (LDA) split candidates over local patches.
//!
//! Every channel and every stride-1 patch position is a candidate. A
//! patch is `min(m, H) × min(m, W)` cells so that narrow geometries (a
//! single row of two features, say) still yield a full-width patch.

use super::data::DataView;
use super::split::{node_totals, scan_columns, sorted_ids, Column, NO_NODE};
use super::tree::project;
use super::{BoostConfig, BoostError, FeatureGeometry, Split, SplitResult, TrainingSet};
use crate::linstats::{extract_local_sigma, lda_solve, window_covariance, Matrix, WindowCovariance};

/// Source of the covariance used in `w = ((1-ε)Σ + εI)⁻¹(μ₊ - μ₋)`.
#[derive(Clone, Debug, PartialEq)]
pub enum SigmaSource {
    /// Local blocks of the unweighted covariance of all training windows,
    /// estimated per channel.
    PerPatch,
    /// One fixed `ph·pw × ph·pw` matrix per channel, shared by all patch
    /// positions.
    Shared(Vec<Matrix>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObliqueCandidate {
    pub channel: usize,
    pub top: usize,
    pub left: usize,
    pub ph: usize,
    pub pw: usize,
}

pub fn patch_shape(geom: &FeatureGeometry, m: usize) -> (usize, usize) {
    (m.min(geom.height), m.min(geom.width))
}

pub(crate) fn candidates(geom: &FeatureGeometry, m: usize) -> Vec<ObliqueCandidate> {
    let (ph, pw) = patch_shape(geom, m);
    let mut out = Vec::new();
    for channel in 0..geom.channels {
        for top in 0..=geom.height - ph {
            for left in 0..=geom.width - pw {
                out.push(ObliqueCandidate {
                    channel,
                    top,
                    left,
                    ph,
                    pw,
                });
            }
        }
    }
    out
}

/// Covariance lookup prepared once per refresh.
pub(crate) enum SigmaTable<'a> {
    PerPatch(Vec<WindowCovariance>),
    Shared(&'a [Matrix]),
}

impl<'a> SigmaTable<'a> {
    pub fn build(source: &'a SigmaSource, data: &DataView, geom: &FeatureGeometry, m: usize) -> Result<Self, BoostError> {
        let (ph, pw) = patch_shape(geom, m);
        match source {
            SigmaSource::Shared(mats) => {
                if mats.len() != geom.channels {
                    return Err(BoostError::InvalidConfig(format!(
                        "{} shared covariances for {} channels",
                        mats.len(),
                        geom.channels
                    )));
                }
                if let Some(bad) = mats.iter().find(|s| s.rows() != ph * pw || s.cols() != ph * pw) {
                    return Err(BoostError::InvalidConfig(format!(
                        "shared covariance is {}x{}, patch needs {}",
                        bad.rows(),
                        bad.cols(),
                        ph * pw
                    )));
                }
                Ok(SigmaTable::Shared(mats))
            }
            SigmaSource::PerPatch => {
                let plane = geom.plane_len();
                let tables = (0..geom.channels)
                    .map(|c| {
                        let slices: Vec<&[f64]> = (0..data.len())
                            .map(|i| &data.row(i)[c * plane..(c + 1) * plane])
                            .collect();
                        window_covariance(&slices, geom.width, geom.height)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(SigmaTable::PerPatch(tables))
            }
        }
    }

    fn sigma(&self, c: &ObliqueCandidate) -> Result<Matrix, BoostError> {
        match self {
            SigmaTable::Shared(m) => Ok(m[c.channel].clone()),
            SigmaTable::PerPatch(w) => Ok(extract_local_sigma(&w[c.channel], c.top, c.left, c.ph, c.pw)?),
        }
    }
}

/// Weighted class means `(μ₊, μ₋)` over the samples with `member(i)`.
pub(crate) fn class_means(data: &DataView, member: impl Fn(usize) -> bool) -> (Vec<f64>, Vec<f64>) {
    let d = data.dim;
    let mut mp = vec![0.0; d];
    let mut mn = vec![0.0; d];
    let (mut wp, mut wn) = (0.0, 0.0);
    for i in 0..data.len() {
        if !member(i) {
            continue;
        }
        let w = data.weights[i];
        let (acc, tot) = if data.labels[i] > 0 {
            (&mut mp, &mut wp)
        } else {
            (&mut mn, &mut wn)
        };
        *tot += w;
        for (a, x) in acc.iter_mut().zip(data.row(i)) {
            *a += w * x;
        }
    }
    for a in mp.iter_mut() {
        *a /= wp;
    }
    for a in mn.iter_mut() {
        *a /= wn;
    }
    (mp, mn)
}

fn patch_of(v: &[f64], geom: &FeatureGeometry, c: &ObliqueCandidate) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.ph * c.pw);
    for row in 0..c.ph {
        let base = geom.index(c.channel, c.top + row, c.left);
        out.extend_from_slice(&v[base..base + c.pw]);
    }
    out
}

/// LDA direction of every candidate; `None` where the solve fails or the
/// direction is degenerate.
pub(crate) fn directions(
    cands: &[ObliqueCandidate],
    geom: &FeatureGeometry,
    means: &(Vec<f64>, Vec<f64>),
    table: &SigmaTable,
    epsilon: f64,
) -> Result<Vec<Option<Vec<f64>>>, BoostError> {
    cands
        .iter()
        .map(|c| {
            let mp = patch_of(&means.0, geom, c);
            let mn = patch_of(&means.1, geom, c);
            let sigma = if epsilon == 1.0 {
                Matrix::zeros(0, 0)
            } else {
                table.sigma(c)?
            };
            match lda_solve(&mp, &mn, sigma.data(), epsilon) {
                Ok(w) if w.iter().all(|v| v.is_finite()) && w.iter().any(|&v| v != 0.0) => Ok(Some(w)),
                Ok(_) => Ok(None),
                Err(e) => {
                    log::debug!("skipping oblique candidate {c:?}: {e}");
                    Ok(None)
                }
            }
        })
        .collect()
}

/// Projections `z = wᵀx_patch` of every sample for every usable candidate,
/// stored candidate-major.
pub(crate) fn project_all(data: &DataView, geom: &FeatureGeometry, cands: &[ObliqueCandidate], dirs: &[Option<Vec<f64>>]) -> Vec<f64> {
    let n = data.len();
    let mut z = vec![0.0; n * cands.len()];
    for (k, (c, w)) in cands.iter().zip(dirs).enumerate() {
        if let Some(w) = w {
            for i in 0..n {
                z[k * n + i] = project(data.row(i), geom, c.channel, c.top, c.left, c.pw, w);
            }
        }
    }
    z
}

pub(crate) fn make_split(c: &ObliqueCandidate, w: Vec<f64>, threshold: f64) -> Split {
    Split::Oblique {
        channel: c.channel,
        top: c.top,
        left: c.left,
        ph: c.ph,
        pw: c.pw,
        w,
        threshold,
    }
}

/// Oblique search at one node with means and directions computed from the
/// node's own samples.
pub(crate) fn node_search(
    data: &DataView,
    geom: &FeatureGeometry,
    cands: &[ObliqueCandidate],
    table: &SigmaTable,
    epsilon: f64,
    subset: &[usize],
) -> Result<(Option<SplitResult>, usize), BoostError> {
    let n = data.len();
    let mut node_of = vec![NO_NODE; n];
    for &i in subset {
        node_of[i] = 0;
    }
    let totals = node_totals(&node_of, 1, data.labels, data.weights);
    if !(totals[0].0 > 0.0 && totals[0].1 > 0.0) {
        return Ok((None, 0));
    }
    let means = class_means(data, |i| node_of[i] == 0);
    let dirs = directions(cands, geom, &means, table, epsilon)?;
    let usable: Vec<usize> = (0..cands.len()).filter(|&k| dirs[k].is_some()).collect();
    let mut z = vec![0.0; n * usable.len()];
    for (slot, &k) in usable.iter().enumerate() {
        let c = &cands[k];
        let w = dirs[k].as_ref().expect("usable");
        for &i in subset {
            z[slot * n + i] = project(data.row(i), geom, c.channel, c.top, c.left, c.pw, w);
        }
    }
    let orders: Vec<Vec<u32>> = (0..usable.len())
        .map(|s| sorted_ids(&z[s * n..(s + 1) * n], subset.iter().map(|&i| i as u32)))
        .collect();
    let columns: Vec<Column> = (0..usable.len())
        .map(|s| Column {
            values: &z[s * n..(s + 1) * n],
            order: &orders[s],
        })
        .collect();
    let best = scan_columns(&columns, &node_of, &totals, data.labels, data.weights)[0];
    let solves = if epsilon == 1.0 { 0 } else { cands.len() };
    Ok((
        best.map(|b| {
            let k = usable[b.column];
            SplitResult {
                split: make_split(&cands[k], dirs[k].clone().expect("usable"), b.threshold),
                error: b.error,
            }
        }),
        solves,
    ))
}

/// Best oblique split over all channels and patch positions for the
/// samples in `subset`, with class means weighted by the training weights.
pub fn best_oblique_split(ts: &TrainingSet, subset: &[usize], cfg: &BoostConfig, sigma: &SigmaSource) -> Result<SplitResult, BoostError> {
    let geom = ts.geometry().ok_or(BoostError::MissingGeometry)?;
    let data = ts.view();
    let table = SigmaTable::build(sigma, &data, &geom, cfg.patch_size)?;
    let cands = candidates(&geom, cfg.patch_size);
    let (best, _) = node_search(&data, &geom, &cands, &table, cfg.epsilon, subset)?;
    best.ok_or(BoostError::DegenerateNode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::best_orthogonal_split;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn geom(channels: usize, height: usize, width: usize) -> FeatureGeometry {
        FeatureGeometry {
            channels,
            height,
            width,
            shrink: 1,
        }
    }

    fn cfg(m: usize, epsilon: f64) -> BoostConfig {
        BoostConfig {
            patch_size: m,
            epsilon,
            ..BoostConfig::default()
        }
    }

    #[test]
    fn candidate_enumeration() {
        let g = geom(2, 4, 3);
        let c = candidates(&g, 3);
        assert_eq!(c.len(), 2 * 2 * 1);
        assert_eq!(patch_shape(&geom(1, 1, 2), 5), (1, 2));
        assert_eq!(candidates(&geom(1, 1, 2), 5).len(), 1);
    }

    #[test]
    fn identity_sigma_single_pixel_difference() {
        // class means differ only at cell (1,1) of a 3x3 single-channel window
        let g = geom(1, 3, 3);
        let mut r = rng::stream(2, "oblique-one-pixel");
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let y: i8 = if i % 2 == 0 { 1 } else { -1 };
            let mut x: Vec<f64> = vec![0.0; 9];
            x[4] = f64::from(y) + r.gen_range(-0.1..0.1);
            rows.push(x);
            labels.push(y);
        }
        let ts = TrainingSet::from_rows(&rows, labels, Some(g)).unwrap();
        let all: Vec<usize> = (0..ts.len()).collect();
        let shared = SigmaSource::Shared(vec![Matrix::identity(1)]);
        let ob = best_oblique_split(&ts, &all, &cfg(1, 0.0), &shared).unwrap();
        let or = best_orthogonal_split(&ts, &all).unwrap();
        match ob.split {
            Split::Oblique { top, left, ref w, .. } => {
                assert_eq!((top, left), (1, 1));
                assert!(w[0] > 0.0);
            }
            _ => panic!("expected oblique split"),
        }
        assert_eq!(ob.error, or.error);
        for row in &rows {
            assert_eq!(
                ob.split.goes_left(row, Some(&g)),
                or.split.goes_left(row, Some(&g))
            );
        }
    }

    #[test]
    fn correlated_gaussians_closed_form_direction() {
        let g = geom(1, 1, 2);
        let rho: f64 = 0.95;
        let mut r = rng::stream(3, "oblique-2d");
        let (a, b) = ((1.0 + rho).sqrt() / 2f64.sqrt(), (1.0 - rho).sqrt() / 2f64.sqrt());
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..500 {
            let y: i8 = if i % 2 == 0 { 1 } else { -1 };
            let u: f64 = r.sample(StandardNormal);
            let v: f64 = r.sample(StandardNormal);
            let s = 0.3 * f64::from(y);
            rows.push(vec![a * u + b * v + s, a * u - b * v + s]);
            labels.push(y);
        }
        let ts = TrainingSet::from_rows(&rows, labels, Some(g)).unwrap();
        let sigma = Matrix::from_rows(&[[1.0, rho], [rho, 1.0]]);
        let all: Vec<usize> = (0..ts.len()).collect();
        let res = best_oblique_split(&ts, &all, &cfg(5, 0.0), &SigmaSource::Shared(vec![sigma])).unwrap();
        let (mp, mn) = class_means(&ts.view(), |_| true);
        let d = [mp[0] - mn[0], mp[1] - mn[1]];
        let det = 1.0 - rho * rho;
        let want = [(d[0] - rho * d[1]) / det, (d[1] - rho * d[0]) / det];
        let Split::Oblique { w, .. } = res.split else { panic!() };
        let cos = (w[0] * want[0] + w[1] * want[1]) / (w[0].hypot(w[1]) * want[0].hypot(want[1]));
        assert!(cos.min(1.0).acos() <= 1e-6);
    }

    #[test]
    fn full_regularization_ignores_sigma() {
        let g = geom(1, 2, 2);
        let mut r = rng::stream(4, "oblique-eps1");
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| r.gen::<f64>()).collect()).collect();
        let labels: Vec<i8> = (0..30).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let ts = TrainingSet::from_rows(&rows, labels, Some(g)).unwrap();
        let all: Vec<usize> = (0..ts.len()).collect();
        let a = best_oblique_split(&ts, &all, &cfg(2, 1.0), &SigmaSource::PerPatch).unwrap();
        let b = best_oblique_split(
            &ts,
            &all,
            &cfg(2, 1.0),
            &SigmaSource::Shared(vec![Matrix::from_rows(&[
                [5.0, 1.0, 0.0, 0.0],
                [1.0, 5.0, 0.0, 0.0],
                [0.0, 0.0, 5.0, 1.0],
                [0.0, 0.0, 1.0, 5.0],
            ])]),
        )
        .unwrap();
        assert_eq!(a, b);
        let (mp, mn) = class_means(&ts.view(), |_| true);
        let Split::Oblique { w, .. } = a.split else { panic!() };
        let diff: Vec<f64> = mp.iter().zip(&mn).map(|(p, n)| p - n).collect();
        assert_eq!(w, diff);
    }

    #[test]
    fn requires_geometry() {
        let ts = TrainingSet::from_rows(&[vec![0.0], vec![1.0]], vec![-1, 1], None).unwrap();
        assert!(matches!(
            best_oblique_split(&ts, &[0, 1], &cfg(1, 0.1), &SigmaSource::PerPatch),
            Err(BoostError::MissingGeometry)
        ));
    }
}
