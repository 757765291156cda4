//! Boosted trees on correlated two-dimensional Gaussians: orthogonal versus
//! oblique splits, and orthogonal splits on transformed features.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::boost::{train_realboost, BoostConfig, BoostError, BoostedEnsemble, CascadeMode, FeatureGeometry, SigmaSource, SplitPolicy, TrainingSet, UpdatePeriod};
use crate::linstats::{sym_eig, transform_features, window_covariance, LinStatsError, TransformMode};
use crate::rng;

/// Two classes sharing one 2×2 covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub mu_pos: [f64; 2],
    pub mu_neg: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub n_train: usize,
    pub n_test: usize,
    pub seeds: Vec<u64>,
}

impl Default for SynthSpec {
    /// ρ = 0.95 with the class means separated along the minor axis.
    fn default() -> Self {
        Self::correlated(0.95)
    }
}

impl SynthSpec {
    pub fn correlated(rho: f64) -> Self {
        Self {
            mu_pos: [0.25, -0.25],
            mu_neg: [-0.25, 0.25],
            cov: [[1.0, rho], [rho, 1.0]],
            n_train: 1000,
            n_test: 5000,
            seeds: (0..10).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), BoostError> {
        let c = &self.cov;
        let finite = self.mu_pos.iter().chain(&self.mu_neg).chain(c.iter().flatten()).all(|v| v.is_finite());
        if !finite || c[0][1] != c[1][0] || c[0][0] <= 0.0 || c[0][0] * c[1][1] - c[0][1] * c[1][0] <= 0.0 {
            return Err(BoostError::InvalidConfig("covariance must be finite, symmetric and positive definite".into()));
        }
        if self.n_train < 2 || self.n_test < 1 || self.seeds.is_empty() {
            return Err(BoostError::InvalidConfig("need n_train ≥ 2, n_test ≥ 1 and at least one seed".into()));
        }
        Ok(())
    }
}

/// Labelled rows; classes alternate starting with a positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<[f64; 2]>,
    pub y: Vec<i8>,
}

fn draw(spec: &SynthSpec, n: usize, r: &mut impl Rng) -> Sample {
    let c = &spec.cov;
    let l00 = c[0][0].sqrt();
    let l10 = c[1][0] / l00;
    let l11 = (c[1][1] - l10 * l10).sqrt();
    let mut out = Sample {
        x: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
    };
    for i in 0..n {
        let y: i8 = if i % 2 == 0 { 1 } else { -1 };
        let mu = if y > 0 { spec.mu_pos } else { spec.mu_neg };
        let a: f64 = r.sample(StandardNormal);
        let b: f64 = r.sample(StandardNormal);
        out.x.push([mu[0] + l00 * a, mu[1] + l10 * a + l11 * b]);
        out.y.push(y);
    }
    out
}

/// Train and test samples for one seed.
pub fn sample(spec: &SynthSpec, seed: u64) -> Result<(Sample, Sample), BoostError> {
    spec.validate()?;
    let train = draw(spec, spec.n_train, &mut rng::stream(seed, "synth-train"));
    let test = draw(spec, spec.n_test, &mut rng::stream(seed, "synth-test"));
    Ok((train, test))
}

fn geometry() -> FeatureGeometry {
    FeatureGeometry {
        channels: 1,
        height: 1,
        width: 2,
        shrink: 1,
    }
}

fn to_set(x: &[Vec<f64>], y: &[i8]) -> Result<TrainingSet, BoostError> {
    TrainingSet::from_rows(x, y.to_vec(), Some(geometry()))
}

fn error_rate(ens: &BoostedEnsemble, x: &[Vec<f64>], y: &[i8]) -> f64 {
    let wrong = x.iter().zip(y).filter(|(v, &l)| (ens.raw_score(v) > 0.0) != (l > 0)).count();
    wrong as f64 / x.len() as f64
}

fn rows(s: &Sample) -> Vec<Vec<f64>> {
    s.x.iter().map(|v| v.to_vec()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitMethod {
    Orthogonal,
    /// Full 2-D LDA split at every node, Σ estimated from the training set.
    Oblique,
}

impl SplitMethod {
    pub fn name(self) -> &'static str {
        match self {
            SplitMethod::Orthogonal => "orthogonal",
            SplitMethod::Oblique => "oblique",
        }
    }
}

/// Feature transform applied before orthogonal boosting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    Raw,
    Mode(TransformMode),
}

impl Transform {
    pub const ALL: [Transform; 4] = [
        Transform::Raw,
        Transform::Mode(TransformMode::Decorrelate),
        Transform::Mode(TransformMode::PcaWhiten),
        Transform::Mode(TransformMode::ZcaWhiten),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transform::Raw => "none",
            Transform::Mode(m) => m.name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub experiment: &'static str,
    pub method: &'static str,
    pub trees: usize,
    pub depth: usize,
    pub seed: u64,
    pub train_error: f64,
    pub test_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSummary {
    pub experiment: &'static str,
    pub method: &'static str,
    pub trees: usize,
    pub depth: usize,
    pub runs: usize,
    pub mean_train: f64,
    pub mean_test: f64,
    pub stderr_test: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Mean and standard error over seeds, in order of first appearance.
    pub fn summary(&self) -> Vec<BenchSummary> {
        let mut keys: Vec<(&'static str, &'static str, usize, usize)> = Vec::new();
        for r in &self.rows {
            let k = (r.experiment, r.method, r.trees, r.depth);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(experiment, method, trees, depth)| {
                let sel: Vec<&BenchRow> = self
                    .rows
                    .iter()
                    .filter(|r| (r.experiment, r.method, r.trees, r.depth) == (experiment, method, trees, depth))
                    .collect();
                let n = sel.len() as f64;
                let mean_test = sel.iter().map(|r| r.test_error).sum::<f64>() / n;
                let mean_train = sel.iter().map(|r| r.train_error).sum::<f64>() / n;
                let var = if sel.len() > 1 {
                    sel.iter().map(|r| (r.test_error - mean_test).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                BenchSummary {
                    experiment,
                    method,
                    trees,
                    depth,
                    runs: sel.len(),
                    mean_train,
                    mean_test,
                    stderr_test: (var / n).sqrt(),
                }
            })
            .collect()
    }

    pub fn find(&self, experiment: &str, method: &str, trees: usize, depth: usize) -> Option<BenchSummary> {
        self.summary()
            .into_iter()
            .find(|s| s.experiment == experiment && s.method == method && s.trees == trees && s.depth == depth)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("experiment,method,trees,depth,seed,train_error,test_error\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.experiment, r.method, r.trees, r.depth, r.seed, r.train_error, r.test_error
            ));
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<6} {:<12} {:>5} {:>5} {:>5} {:>10} {:>18}\n",
            "exp", "method", "T", "D", "runs", "train", "test (± stderr)"
        );
        for a in self.summary() {
            s.push_str(&format!(
                "{:<6} {:<12} {:>5} {:>5} {:>5} {:>10.4} {:>9.4} ± {:<6.4}\n",
                a.experiment, a.method, a.trees, a.depth, a.runs, a.mean_train, a.mean_test, a.stderr_test
            ));
        }
        s
    }
}

fn boost_config(trees: usize, depth: usize, seed: u64) -> BoostConfig {
    BoostConfig {
        num_trees: trees,
        max_depth: depth,
        bootstrap_schedule: Vec::new(),
        cascade: CascadeMode::None,
        seed,
        ..BoostConfig::default()
    }
}

/// Trains one (method, T, D) cell on one seed.
fn fig1_cell(spec: &SynthSpec, method: SplitMethod, trees: usize, depth: usize, seed: u64, epsilon: f64) -> Result<BenchRow, BoostError> {
    let (train, test) = sample(spec, seed)?;
    let (xtr, xte) = (rows(&train), rows(&test));
    let ts = to_set(&xtr, &train.y)?;
    let mut cfg = boost_config(trees, depth, seed);
    let out = match method {
        SplitMethod::Orthogonal => train_realboost(&ts, &cfg, None, None)?,
        SplitMethod::Oblique => {
            cfg.split_policy = SplitPolicy::ObliquePerPatch;
            cfg.update_period = UpdatePeriod::PerNode;
            cfg.epsilon = epsilon;
            cfg.patch_size = 2;
            train_realboost(&ts, &cfg, Some(&SigmaSource::PerPatch), None)?
        }
    };
    Ok(BenchRow {
        experiment: "fig1",
        method: method.name(),
        trees,
        depth,
        seed,
        train_error: error_rate(&out.ensemble, &xtr, &train.y),
        test_error: error_rate(&out.ensemble, &xte, &test.y),
    })
}

/// Boosted orthogonal and oblique trees for every `(T, D)` in `grid` and
/// every seed. Oblique splits solve unregularized (`epsilon` = 0 gives
/// pure LDA) 2-D LDA at each node.
pub fn run_fig1(spec: &SynthSpec, grid: &[(usize, usize)], methods: &[SplitMethod], epsilon: f64) -> Result<BenchReport, BoostError> {
    spec.validate()?;
    if grid.is_empty() || grid.iter().any(|&(t, d)| t == 0 || d == 0) {
        return Err(BoostError::InvalidConfig("grid cells need T ≥ 1 and D ≥ 1".into()));
    }
    let jobs: Vec<(SplitMethod, usize, usize, u64)> = grid
        .iter()
        .flat_map(|&(t, d)| methods.iter().flat_map(move |&m| spec.seeds.iter().map(move |&s| (m, t, d, s))))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(m, t, d, s)| fig1_cell(spec, m, t, d, s, epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchReport { rows })
}

/// Fits the transform on `train` and applies it to both sets.
pub fn transform_pair(train: &[Vec<f64>], test: &[Vec<f64>], mode: TransformMode) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), LinStatsError> {
    let wc = window_covariance(train, 2, 1)?;
    let eig = sym_eig(&wc.cov)?;
    Ok((transform_features(train, &eig, mode)?, transform_features(test, &eig, mode)?))
}

fn fig2_cell(spec: &SynthSpec, transform: Transform, trees: usize, depth: usize, seed: u64) -> Result<(BenchRow, Vec<f64>), BoostError> {
    let (train, test) = sample(spec, seed)?;
    let (mut xtr, mut xte) = (rows(&train), rows(&test));
    if let Transform::Mode(mode) = transform {
        (xtr, xte) = transform_pair(&xtr, &xte, mode)?;
    }
    let ts = to_set(&xtr, &train.y)?;
    let out = train_realboost(&ts, &boost_config(trees, depth, seed), None, None)?;
    let scores = xte.iter().map(|v| out.ensemble.raw_score(v)).collect();
    Ok((
        BenchRow {
            experiment: "fig2",
            method: transform.name(),
            trees,
            depth,
            seed,
            train_error: error_rate(&out.ensemble, &xtr, &train.y),
            test_error: error_rate(&out.ensemble, &xte, &test.y),
        },
        scores,
    ))
}

/// Orthogonal boosting on raw and transformed features. Also returns the
/// test-set predictions (signs) per row so callers can compare transforms
/// sample by sample.
pub fn run_fig2_with_predictions(spec: &SynthSpec, trees: usize, depth: usize, transforms: &[Transform]) -> Result<(BenchReport, Vec<Vec<bool>>), BoostError> {
    spec.validate()?;
    let jobs: Vec<(Transform, u64)> = transforms.iter().flat_map(|&t| spec.seeds.iter().map(move |&s| (t, s))).collect();
    let results = jobs
        .par_iter()
        .map(|&(t, s)| fig2_cell(spec, t, trees, depth, s))
        .collect::<Result<Vec<_>, _>>()?;
    let (rows, preds) = results
        .into_iter()
        .map(|(r, scores)| (r, scores.into_iter().map(|s| s > 0.0).collect()))
        .unzip();
    Ok((BenchReport { rows }, preds))
}

pub fn run_fig2(spec: &SynthSpec, trees: usize, depth: usize, transforms: &[Transform]) -> Result<BenchReport, BoostError> {
    Ok(run_fig2_with_predictions(spec, trees, depth, transforms)?.0)
}

/// Default Fig. 1 grid.
pub const FIG1_GRID: [(usize, usize); 9] = [(1, 1), (1, 2), (1, 3), (5, 1), (5, 2), (5, 3), (20, 1), (20, 2), (20, 3)];
