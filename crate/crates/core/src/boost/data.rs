use super::BoostError;

/// Layout of a flattened channel window: `channels` planes of
/// `height×width` cells, channel-major then row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FeatureGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub shrink: usize,
}

impl FeatureGeometry {
    pub fn dim(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn index(&self, channel: usize, y: usize, x: usize) -> usize {
        (channel * self.height + y) * self.width + x
    }
}

/// Borrowed training data, used where weights change every round.
#[derive(Clone, Copy)]
pub(crate) struct DataView<'a> {
    pub features: &'a [f64],
    pub dim: usize,
    pub geometry: Option<FeatureGeometry>,
    pub labels: &'a [i8],
    pub weights: &'a [f64],
}

impl DataView<'_> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// Labelled samples with normalized positive weights. A set may hold a
/// single class; boosting needs both.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    features: Vec<f64>,
    labels: Vec<i8>,
    weights: Vec<f64>,
    dim: usize,
    geometry: Option<FeatureGeometry>,
}

impl TrainingSet {
    /// Builds a set with uniform weights. Rows of `features` are samples.
    pub fn new(features: Vec<f64>, labels: Vec<i8>, dim: usize, geometry: Option<FeatureGeometry>) -> Result<Self, BoostError> {
        let n = labels.len();
        let weights = vec![1.0 / n.max(1) as f64; n];
        Self::with_weights(features, labels, weights, dim, geometry)
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<i8>, geometry: Option<FeatureGeometry>) -> Result<Self, BoostError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(BoostError::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Self::new(rows.concat(), labels, dim, geometry)
    }

    /// Weights are normalized to sum to one.
    pub fn with_weights(
        features: Vec<f64>,
        labels: Vec<i8>,
        weights: Vec<f64>,
        dim: usize,
        geometry: Option<FeatureGeometry>,
    ) -> Result<Self, BoostError> {
        let n = labels.len();
        let invalid = |m: String| Err(BoostError::InvalidTrainingSet(m));
        if n < 2 {
            return invalid(format!("need at least 2 samples, got {n}"));
        }
        if dim == 0 {
            return invalid("feature dimension is zero".into());
        }
        if features.len() != n * dim {
            return Err(BoostError::DimensionMismatch {
                expected: n * dim,
                found: features.len(),
            });
        }
        if weights.len() != n {
            return invalid(format!("{} weights for {n} samples", weights.len()));
        }
        if labels.iter().any(|&y| y != 1 && y != -1) {
            return invalid("labels must be +1 or -1".into());
        }
        if features.iter().any(|v| !v.is_finite()) {
            return invalid("features must be finite".into());
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return invalid("weights must be positive and finite".into());
        }
        if let Some(g) = geometry {
            if g.dim() != dim {
                return Err(BoostError::DimensionMismatch {
                    expected: g.dim(),
                    found: dim,
                });
            }
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            features,
            labels,
            weights,
            dim,
            geometry,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn geometry(&self) -> Option<FeatureGeometry> {
        self.geometry
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn count(&self, label: i8) -> usize {
        self.labels.iter().filter(|&&y| y == label).count()
    }

    pub(crate) fn view(&self) -> DataView<'_> {
        DataView {
            features: &self.features,
            dim: self.dim,
            geometry: self.geometry,
            labels: &self.labels,
            weights: &self.weights,
        }
    }

    /// Feature-major copy: column `j` holds feature `j` of every sample.
    pub(crate) fn columns(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n * self.dim];
        for i in 0..n {
            for (j, &v) in self.row(i).iter().enumerate() {
                out[j * n + i] = v;
            }
        }
        out
    }
}
