//! Threshold search over presorted columns.
//!
//! A column is any per-sample scalar (a raw feature or an oblique
//! projection) together with the sample ids sorted by that scalar. One
//! pass over a column finds the best threshold for every node of a tree
//! level at once. Candidate thresholds lie halfway between consecutive
//! distinct values inside a node; the cost is the weighted error of
//! predicting the majority class on each side,
//! `min(L₊, L₋) + min(R₊, R₋)`. Ties keep the earliest column, then the
//! lowest threshold.

use rayon::prelude::*;

use super::{BoostError, Split, TrainingSet};

pub(crate) const NO_NODE: u32 = u32::MAX;

pub(crate) struct Column<'a> {
    pub values: &'a [f64],
    pub order: &'a [u32],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Candidate {
    pub column: usize,
    pub threshold: f64,
    pub error: f64,
}

/// Split found by a search, with its weighted training error.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitResult {
    pub split: Split,
    pub error: f64,
}

/// Threshold strictly separating `a < b`: their midpoint, or `a` when the
/// midpoint rounds up to `b`.
#[inline]
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let t = 0.5 * a + 0.5 * b;
    if t >= a && t < b {
        t
    } else {
        a
    }
}

/// Stable ascending order of `values` restricted to `ids`.
pub(crate) fn sorted_ids(values: &[f64], ids: impl Iterator<Item = u32>) -> Vec<u32> {
    let mut order: Vec<u32> = ids.collect();
    order.sort_by(|&i, &j| values[i as usize].total_cmp(&values[j as usize]));
    order
}

/// Per-node class weight totals `(W₊, W₋)`.
pub(crate) fn node_totals(node_of: &[u32], nodes: usize, labels: &[i8], weights: &[f64]) -> Vec<(f64, f64)> {
    let mut totals = vec![(0.0, 0.0); nodes];
    for (i, &n) in node_of.iter().enumerate() {
        if n != NO_NODE {
            let t = &mut totals[n as usize];
            if labels[i] > 0 {
                t.0 += weights[i];
            } else {
                t.1 += weights[i];
            }
        }
    }
    totals
}

fn scan_one(
    col_index: usize,
    col: &Column,
    node_of: &[u32],
    totals: &[(f64, f64)],
    labels: &[i8],
    weights: &[f64],
    best: &mut [Option<Candidate>],
) {
    let k = totals.len();
    let mut lp = vec![0.0f64; k];
    let mut ln = vec![0.0f64; k];
    let mut last = vec![f64::NAN; k];
    for &id in col.order {
        let i = id as usize;
        let node = node_of[i];
        if node == NO_NODE {
            continue;
        }
        let n = node as usize;
        let v = col.values[i];
        let prev = last[n];
        if v > prev {
            let (tp, tn) = totals[n];
            let err = lp[n].min(ln[n]) + (tp - lp[n]).min(tn - ln[n]);
            if best[n].map_or(true, |b| err < b.error) {
                best[n] = Some(Candidate {
                    column: col_index,
                    threshold: midpoint(prev, v),
                    error: err,
                });
            }
        }
        if labels[i] > 0 {
            lp[n] += weights[i];
        } else {
            ln[n] += weights[i];
        }
        last[n] = v;
    }
}

/// Best candidate per node over all columns; `None` where no node sample
/// pair has distinct values in any column.
pub(crate) fn scan_columns(
    columns: &[Column],
    node_of: &[u32],
    totals: &[(f64, f64)],
    labels: &[i8],
    weights: &[f64],
) -> Vec<Option<Candidate>> {
    const CHUNK: usize = 32;
    let k = totals.len();
    let partial: Vec<Vec<Option<Candidate>>> = columns
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut best = vec![None; k];
            for (j, col) in chunk.iter().enumerate() {
                scan_one(c * CHUNK + j, col, node_of, totals, labels, weights, &mut best);
            }
            best
        })
        .collect();
    // chunks merged in column order so ties resolve to the lowest column
    let mut best: Vec<Option<Candidate>> = vec![None; k];
    for chunk in partial {
        for (b, c) in best.iter_mut().zip(chunk) {
            if let Some(c) = c {
                if b.map_or(true, |b| c.error < b.error) {
                    *b = Some(c);
                }
            }
        }
    }
    best
}

/// Exhaustive orthogonal split over the samples in `subset`, using the
/// training set's weights.
pub fn best_orthogonal_split(ts: &TrainingSet, subset: &[usize]) -> Result<SplitResult, BoostError> {
    let n = ts.len();
    let mut node_of = vec![NO_NODE; n];
    for &i in subset {
        node_of[i] = 0;
    }
    let totals = node_totals(&node_of, 1, ts.labels(), ts.weights());
    if !(totals[0].0 > 0.0 && totals[0].1 > 0.0) {
        return Err(BoostError::DegenerateNode);
    }
    let cols = ts.columns();
    let orders: Vec<Vec<u32>> = (0..ts.dim())
        .map(|j| sorted_ids(&cols[j * n..(j + 1) * n], subset.iter().map(|&i| i as u32)))
        .collect();
    let columns: Vec<Column> = (0..ts.dim())
        .map(|j| Column {
            values: &cols[j * n..(j + 1) * n],
            order: &orders[j],
        })
        .collect();
    let best = scan_columns(&columns, &node_of, &totals, ts.labels(), ts.weights());
    match best[0] {
        Some(c) => Ok(SplitResult {
            split: Split::Orthogonal {
                feature: c.column,
                threshold: c.threshold,
            },
            error: c.error,
        }),
        None => Err(BoostError::DegenerateNode),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn all(ts: &TrainingSet) -> Vec<usize> {
        (0..ts.len()).collect()
    }

    #[test]
    fn separable_1d() {
        let ts = TrainingSet::from_rows(&[vec![0.0], vec![1.0]], vec![-1, 1], None).unwrap();
        let r = best_orthogonal_split(&ts, &all(&ts)).unwrap();
        assert_eq!(
            r.split,
            Split::Orthogonal {
                feature: 0,
                threshold: 0.5
            }
        );
        assert_eq!(r.error, 0.0);
    }

    #[test]
    fn xor_ties_break_low() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let ts = TrainingSet::from_rows(&rows, vec![1, 1, -1, -1], None).unwrap();
        let r = best_orthogonal_split(&ts, &all(&ts)).unwrap();
        assert_eq!(
            r.split,
            Split::Orthogonal {
                feature: 0,
                threshold: 0.5
            }
        );
        assert_eq!(r.error, 0.5);
    }

    #[test]
    fn degenerate_nodes() {
        let ts = TrainingSet::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![-1, 1, 1], None).unwrap();
        assert!(matches!(best_orthogonal_split(&ts, &[1, 2]), Err(BoostError::DegenerateNode)));
        let flat = TrainingSet::from_rows(&[vec![3.0], vec![3.0]], vec![-1, 1], None).unwrap();
        assert!(matches!(best_orthogonal_split(&flat, &[0, 1]), Err(BoostError::DegenerateNode)));
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(midpoint(a, b), a);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
        assert_eq!(midpoint(-f64::MAX, f64::MAX), 0.0);
    }

    // direct enumeration of every (feature, midpoint) candidate
    fn brute(ts: &TrainingSet, subset: &[usize]) -> (usize, f64, f64) {
        let mut best = (usize::MAX, f64::NAN, f64::INFINITY);
        for f in 0..ts.dim() {
            let mut vals: Vec<f64> = subset.iter().map(|&i| ts.row(i)[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                let (mut lp, mut ln, mut rp, mut rn) = (0.0, 0.0, 0.0, 0.0);
                for &i in subset {
                    let wt = ts.weights()[i];
                    match (ts.row(i)[f] <= t, ts.labels()[i] > 0) {
                        (true, true) => lp += wt,
                        (true, false) => ln += wt,
                        (false, true) => rp += wt,
                        (false, false) => rn += wt,
                    }
                }
                let err = f64::min(lp, ln) + f64::min(rp, rn);
                if err < best.2 {
                    best = (f, t, err);
                }
            }
        }
        best
    }

    #[test]
    fn matches_brute_force_oracle() {
        for seed in 0..20 {
            let mut r = rng::substream(seed, "split-oracle", 0);
            let rows: Vec<Vec<f64>> = (0..20)
                .map(|_| (0..3).map(|_| (r.gen_range(0..8) as f64) * 0.25).collect())
                .collect();
            let mut labels: Vec<i8> = (0..20).map(|_| if r.gen::<bool>() { 1 } else { -1 }).collect();
            labels[0] = 1;
            labels[1] = -1;
            // integer weights summing to 128 keep every partial sum exact,
            // so both searches see identical costs and tie-breaks
            let mut weights: Vec<f64> = (0..19).map(|_| r.gen_range(1..=6) as f64).collect();
            weights.push(128.0 - weights.iter().sum::<f64>());
            let ts = TrainingSet::with_weights(rows.concat(), labels, weights, 3, None).unwrap();
            let got = best_orthogonal_split(&ts, &all(&ts)).unwrap();
            let (f, t, err) = brute(&ts, &all(&ts));
            assert_eq!(
                got,
                SplitResult {
                    split: Split::Orthogonal {
                        feature: f,
                        threshold: t
                    },
                    error: err
                },
                "seed {seed}"
            );
        }
    }
}
