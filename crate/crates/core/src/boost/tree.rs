use std::collections::BTreeMap;

use super::{BoostError, FeatureGeometry};

/// A node test. Samples with `value ≤ threshold` go left.
#[derive(Clone, Debug, PartialEq)]
pub enum Split {
    Orthogonal {
        feature: usize,
        threshold: f64,
    },
    /// Threshold on `z = wᵀx_patch` for the `ph×pw` patch of `channel` whose
    /// top-left cell is `(top, left)`; `w` is row-major over the patch.
    Oblique {
        channel: usize,
        top: usize,
        left: usize,
        ph: usize,
        pw: usize,
        w: Vec<f64>,
        threshold: f64,
    },
}

/// `wᵀx_patch` with a fixed summation order shared by training and scoring.
#[inline]
pub(crate) fn project(x: &[f64], geom: &FeatureGeometry, channel: usize, top: usize, left: usize, pw: usize, w: &[f64]) -> f64 {
    let mut z = 0.0;
    for (row, wr) in w.chunks_exact(pw).enumerate() {
        let base = geom.index(channel, top + row, left);
        for (wv, xv) in wr.iter().zip(&x[base..base + pw]) {
            z += wv * xv;
        }
    }
    z
}

impl Split {
    pub fn threshold(&self) -> f64 {
        match self {
            Split::Orthogonal { threshold, .. } | Split::Oblique { threshold, .. } => *threshold,
        }
    }

    /// Tested value for sample `x`. Oblique splits need the geometry.
    #[inline]
    pub fn value(&self, x: &[f64], geom: Option<&FeatureGeometry>) -> f64 {
        match self {
            Split::Orthogonal { feature, .. } => x[*feature],
            Split::Oblique {
                channel,
                top,
                left,
                pw,
                w,
                ..
            } => project(x, geom.expect("oblique split requires geometry"), *channel, *top, *left, *pw, w),
        }
    }

    #[inline]
    pub fn goes_left(&self, x: &[f64], geom: Option<&FeatureGeometry>) -> bool {
        self.value(x, geom) <= self.threshold()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf { value: f64 },
    Internal { split: Split, left: usize, right: usize },
}

/// Binary tree stored as a node array with the root at index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64], geom: Option<&FeatureGeometry>) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Internal { split, left, right } => {
                    i = if split.goes_left(x, geom) { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn validate(&self, dim: usize, geom: Option<&FeatureGeometry>) -> Result<(), BoostError> {
        let bad = |m: String| Err(BoostError::Format(m));
        if self.nodes.is_empty() {
            return bad("empty tree".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Leaf { value } if !value.is_finite() => return bad(format!("non-finite leaf at node {i}")),
                Node::Leaf { .. } => {}
                Node::Internal { split, left, right } => {
                    // children after parents rules out cycles
                    if *left <= i || *right <= i || *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return bad(format!("bad child index at node {i}"));
                    }
                    if !split.threshold().is_finite() {
                        return bad(format!("non-finite threshold at node {i}"));
                    }
                    match split {
                        Split::Orthogonal { feature, .. } if *feature >= dim => {
                            return bad(format!("feature {feature} out of range at node {i}"));
                        }
                        Split::Oblique {
                            channel,
                            top,
                            left,
                            ph,
                            pw,
                            w,
                            ..
                        } => {
                            let g = match geom {
                                Some(g) => g,
                                None => return Err(BoostError::MissingGeometry),
                            };
                            if *channel >= g.channels
                                || *ph == 0
                                || *pw == 0
                                || top + ph > g.height
                                || left + pw > g.width
                                || w.len() != ph * pw
                                || w.iter().any(|v| !v.is_finite())
                            {
                                return bad(format!("invalid oblique split at node {i}"));
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }
}

/// RealBoost leaf output `½·ln((W₊ + β) / (W₋ + β))`.
pub fn leaf_value(w_pos: f64, w_neg: f64, beta: f64) -> f64 {
    0.5 * ((w_pos + beta) / (w_neg + beta)).ln()
}

/// Additive tree ensemble with per-prefix cascade thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostedEnsemble {
    pub trees: Vec<Tree>,
    /// `thresholds[t]` applies to the score after trees `0..=t`.
    pub thresholds: Vec<f64>,
    pub dim: usize,
    pub geometry: Option<FeatureGeometry>,
    /// Configuration snapshot and any caller metadata, ordered by key.
    pub metadata: BTreeMap<String, String>,
}

impl BoostedEnsemble {
    pub fn new(trees: Vec<Tree>, dim: usize, geometry: Option<FeatureGeometry>) -> Self {
        let thresholds = vec![f64::NEG_INFINITY; trees.len()];
        Self {
            trees,
            thresholds,
            dim,
            geometry,
            metadata: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Full additive score without early rejection; no dimension check.
    #[inline]
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        let g = self.geometry.as_ref();
        self.trees.iter().map(|t| t.predict(x, g)).sum()
    }

    /// Prefix scores after each tree.
    pub fn prefix_scores(&self, x: &[f64]) -> Vec<f64> {
        let g = self.geometry.as_ref();
        let mut acc = 0.0;
        self.trees
            .iter()
            .map(|t| {
                acc += t.predict(x, g);
                acc
            })
            .collect()
    }

    /// Score with optional soft-cascade rejection. On rejection returns the
    /// partial score and the index of the tree after which it happened.
    pub fn score(&self, x: &[f64], use_cascade: bool) -> Result<(f64, Option<usize>), BoostError> {
        if x.len() != self.dim {
            return Err(BoostError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.score_unchecked(x, use_cascade))
    }

    #[inline]
    pub fn score_unchecked(&self, x: &[f64], use_cascade: bool) -> (f64, Option<usize>) {
        let g = self.geometry.as_ref();
        let mut acc = 0.0;
        for (t, tree) in self.trees.iter().enumerate() {
            acc += tree.predict(x, g);
            if use_cascade && acc < self.thresholds[t] {
                return (acc, Some(t));
            }
        }
        (acc, None)
    }

    pub fn validate(&self) -> Result<(), BoostError> {
        if self.thresholds.len() != self.trees.len() {
            return Err(BoostError::Format(format!(
                "{} thresholds for {} trees",
                self.thresholds.len(),
                self.trees.len()
            )));
        }
        if self.thresholds.iter().any(|t| t.is_nan()) {
            return Err(BoostError::Format("NaN cascade threshold".into()));
        }
        if let Some(g) = &self.geometry {
            if g.dim() != self.dim {
                return Err(BoostError::Format("geometry does not match dimension".into()));
            }
        }
        for t in &self.trees {
            t.validate(self.dim, self.geometry.as_ref())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_value_signs() {
        assert!(leaf_value(0.6, 0.1, 0.01) > 0.0);
        assert!(leaf_value(0.1, 0.6, 0.01) < 0.0);
        assert_eq!(leaf_value(0.2, 0.2, 0.5), 0.0);
        assert!(leaf_value(0.0, 0.0, 0.1).is_finite());
    }

    #[test]
    fn single_tree_score() {
        let tree = Tree {
            nodes: vec![
                Node::Internal {
                    split: Split::Orthogonal {
                        feature: 1,
                        threshold: 0.5,
                    },
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: -0.3 },
                Node::Leaf { value: 0.7 },
            ],
        };
        let ens = BoostedEnsemble::new(vec![tree], 2, None);
        assert_eq!(ens.score(&[0.0, 1.0], true).unwrap(), (0.7, None));
        assert_eq!(ens.score(&[0.0, 0.5], false).unwrap(), (-0.3, None));
        assert!(ens.score(&[0.0], false).is_err());
        assert_eq!(ens.trees[0].depth(), 1);
        ens.validate().unwrap();
    }

    #[test]
    fn oblique_projection_indexing() {
        let g = FeatureGeometry {
            channels: 2,
            height: 3,
            width: 3,
            shrink: 1,
        };
        let x: Vec<f64> = (0..18).map(f64::from).collect();
        // channel 1, rows 1..3, cols 1..3 → cells 13, 14, 16, 17
        let s = Split::Oblique {
            channel: 1,
            top: 1,
            left: 1,
            ph: 2,
            pw: 2,
            w: vec![1.0, 10.0, 100.0, 1000.0],
            threshold: 0.0,
        };
        assert_eq!(s.value(&x, Some(&g)), 13.0 + 140.0 + 1600.0 + 17000.0);
    }
}
