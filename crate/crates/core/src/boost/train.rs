//! Level-wise tree growing and RealBoost with bootstrapping.

use super::cascade::apply_cascade_mode;
use super::data::DataView;
use super::oblique::{self, candidates, class_means, directions, node_search, project_all, ObliqueCandidate, SigmaSource, SigmaTable};
use super::split::{node_totals, scan_columns, sorted_ids, Column, NO_NODE};
use super::{leaf_value, BoostConfig, BoostError, BoostedEnsemble, FeatureGeometry, Node, Split, SplitPolicy, Tree, TrainingSet, UpdatePeriod};

/// Supplier of hard negatives during bootstrapping.
pub trait NegativeSource {
    /// Feature vectors of negatives scoring at least `threshold` under
    /// `ens`, at most `per_image_cap` per source image and `max_total`
    /// overall, highest scores first.
    fn harvest(&mut self, ens: &BoostedEnsemble, round: usize, threshold: f64, per_image_cap: usize, max_total: usize) -> Result<Vec<Vec<f64>>, BoostError>;
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainStats {
    /// Exponential loss `Σ bᵢ exp(-yᵢ F(xᵢ))` after each tree, with base
    /// weights `b` normalized per class to 1/2 on the current set.
    pub loss_history: Vec<f64>,
    /// Tree counts at which the training set changed.
    pub stage_starts: Vec<usize>,
    /// Times oblique directions were recomputed.
    pub lda_refreshes: usize,
    /// Individual LDA solves performed.
    pub lda_solves: usize,
    /// Negatives added per bootstrap round.
    pub harvested: Vec<usize>,
    /// Set when a bootstrap round found no new negatives.
    pub no_negatives_harvested: bool,
    pub final_positives: usize,
    pub final_negatives: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub ensemble: BoostedEnsemble,
    pub stats: TrainStats,
}

enum Columns<'a> {
    /// Feature-major values with per-column sorted sample ids.
    Presorted { values: &'a [f64], orders: &'a [Vec<u32>], kind: ColumnKind<'a> },
    /// Oblique search from scratch at every node.
    PerNode {
        geom: FeatureGeometry,
        cands: &'a [ObliqueCandidate],
        table: &'a SigmaTable<'a>,
        epsilon: f64,
    },
}

enum ColumnKind<'a> {
    Features,
    /// Column `k` is the projection on `dirs[usable[k]]`.
    Projections {
        cands: &'a [ObliqueCandidate],
        dirs: &'a [Option<Vec<f64>>],
        usable: &'a [usize],
    },
}

struct Grown {
    tree: Tree,
    /// Tree output for every training sample.
    outputs: Vec<f64>,
    lda_solves: usize,
    lda_refreshes: usize,
}

fn grow(data: &DataView, columns: &Columns, max_depth: usize, beta: f64) -> Result<Grown, BoostError> {
    let n = data.len();
    let mut tree = Tree::leaf(0.0);
    let mut tree_node = vec![0u32; n];
    let mut node_of = vec![0u32; n];
    let mut level: Vec<usize> = vec![0];
    let (mut solves, mut refreshes) = (0, 0);
    for _ in 0..max_depth {
        let totals = node_totals(&node_of, level.len(), data.labels, data.weights);
        let splittable: Vec<bool> = totals.iter().map(|&(p, q)| p > 0.0 && q > 0.0).collect();
        for id in node_of.iter_mut() {
            if *id != NO_NODE && !splittable[*id as usize] {
                *id = NO_NODE;
            }
        }
        // (split, column values used for routing)
        let chosen: Vec<Option<(Split, Option<&[f64]>)>> = match columns {
            Columns::Presorted { values, orders, kind } => {
                let cols: Vec<Column> = orders
                    .iter()
                    .enumerate()
                    .map(|(j, o)| Column {
                        values: &values[j * n..(j + 1) * n],
                        order: o,
                    })
                    .collect();
                let best = scan_columns(&cols, &node_of, &totals, data.labels, data.weights);
                best.into_iter()
                    .zip(&splittable)
                    .map(|(b, &ok)| {
                        let b = b.filter(|_| ok)?;
                        let col = &values[b.column * n..(b.column + 1) * n];
                        let split = match kind {
                            ColumnKind::Features => Split::Orthogonal {
                                feature: b.column,
                                threshold: b.threshold,
                            },
                            ColumnKind::Projections { cands, dirs, usable } => {
                                let k = usable[b.column];
                                oblique::make_split(&cands[k], dirs[k].clone().expect("usable direction"), b.threshold)
                            }
                        };
                        Some((split, Some(col)))
                    })
                    .collect()
            }
            Columns::PerNode {
                geom,
                cands,
                table,
                epsilon,
            } => {
                let mut members: Vec<Vec<usize>> = vec![Vec::new(); level.len()];
                for (i, &id) in node_of.iter().enumerate() {
                    if id != NO_NODE {
                        members[id as usize].push(i);
                    }
                }
                let mut out = Vec::with_capacity(level.len());
                for (id, subset) in members.iter().enumerate() {
                    if !splittable[id] {
                        out.push(None);
                        continue;
                    }
                    let (best, s) = node_search(data, geom, cands, table, *epsilon, subset)?;
                    solves += s;
                    refreshes += 1;
                    out.push(best.map(|b| (b.split, None)));
                }
                out
            }
        };

        let mut next_level = Vec::new();
        let mut child_ids = vec![(NO_NODE, NO_NODE); level.len()];
        for (id, choice) in chosen.iter().enumerate() {
            if let Some((split, _)) = choice {
                let left = tree.nodes.len();
                tree.nodes.push(Node::Leaf { value: 0.0 });
                tree.nodes.push(Node::Leaf { value: 0.0 });
                tree.nodes[level[id]] = Node::Internal {
                    split: split.clone(),
                    left,
                    right: left + 1,
                };
                child_ids[id] = (next_level.len() as u32, next_level.len() as u32 + 1);
                next_level.push(left);
                next_level.push(left + 1);
            }
        }
        if next_level.is_empty() {
            break;
        }
        for i in 0..n {
            let id = node_of[i];
            if id == NO_NODE {
                continue;
            }
            let id = id as usize;
            match &chosen[id] {
                Some((split, col)) => {
                    let v = match col {
                        Some(c) => c[i],
                        None => split.value(data.row(i), data.geometry.as_ref()),
                    };
                    let go_left = v <= split.threshold();
                    let (l, r) = child_ids[id];
                    let child = if go_left { l } else { r };
                    node_of[i] = child;
                    tree_node[i] = next_level[child as usize] as u32;
                }
                None => node_of[i] = NO_NODE,
            }
        }
        level = next_level;
    }

    let mut mass = vec![(0.0, 0.0); tree.nodes.len()];
    for i in 0..n {
        let m = &mut mass[tree_node[i] as usize];
        if data.labels[i] > 0 {
            m.0 += data.weights[i];
        } else {
            m.1 += data.weights[i];
        }
    }
    for (node, &(wp, wn)) in tree.nodes.iter_mut().zip(&mass) {
        if let Node::Leaf { value } = node {
            *value = leaf_value(wp, wn, beta);
        }
    }
    let outputs = tree_node
        .iter()
        .map(|&t| match tree.nodes[t as usize] {
            Node::Leaf { value } => value,
            Node::Internal { .. } => unreachable!("samples end in leaves"),
        })
        .collect();
    Ok(Grown {
        tree,
        outputs,
        lda_solves: solves,
        lda_refreshes: refreshes,
    })
}

fn presort(values: &[f64], n: usize, cols: usize) -> Vec<Vec<u32>> {
    use rayon::prelude::*;
    (0..cols)
        .into_par_iter()
        .map(|j| sorted_ids(&values[j * n..(j + 1) * n], 0..n as u32))
        .collect()
}

fn feature_major(data: &DataView) -> Vec<f64> {
    let n = data.len();
    let mut out = vec![0.0; n * data.dim];
    for i in 0..n {
        for (j, &v) in data.row(i).iter().enumerate() {
            out[j * n + i] = v;
        }
    }
    out
}

fn oblique_context(cfg: &BoostConfig, data: &DataView, sigma: Option<&SigmaSource>) -> Result<(FeatureGeometry, Vec<ObliqueCandidate>), BoostError> {
    let geom = data.geometry.ok_or(BoostError::MissingGeometry)?;
    match (cfg.split_policy, sigma) {
        (SplitPolicy::ObliqueShared, Some(SigmaSource::Shared(_))) | (SplitPolicy::ObliquePerPatch, Some(SigmaSource::PerPatch)) => {}
        (SplitPolicy::ObliquePerPatch, None) => {}
        (p, s) => {
            return Err(BoostError::InvalidConfig(format!(
                "split policy {} does not match covariance source {:?}",
                p.name(),
                s.map(|s| matches!(s, SigmaSource::Shared(_)))
            )))
        }
    }
    let cands = candidates(&geom, cfg.patch_size);
    Ok((geom, cands))
}

/// Trains one tree on the training set's weights.
pub fn train_tree(ts: &TrainingSet, cfg: &BoostConfig, sigma: Option<&SigmaSource>) -> Result<Tree, BoostError> {
    cfg.validate()?;
    let data = ts.view();
    let beta = cfg.leaf_smoothing.unwrap_or(1.0 / ts.len() as f64);
    let n = ts.len();
    if !cfg.split_policy.is_oblique() {
        let values = feature_major(&data);
        let orders = presort(&values, n, ts.dim());
        let cols = Columns::Presorted {
            values: &values,
            orders: &orders,
            kind: ColumnKind::Features,
        };
        return Ok(grow(&data, &cols, cfg.max_depth, beta)?.tree);
    }
    let (geom, cands) = oblique_context(cfg, &data, sigma)?;
    let per_patch = SigmaSource::PerPatch;
    let source = sigma.unwrap_or(&per_patch);
    let table = SigmaTable::build(source, &data, &geom, cfg.patch_size)?;
    if cfg.update_period == UpdatePeriod::PerNode {
        let cols = Columns::PerNode {
            geom,
            cands: &cands,
            table: &table,
            epsilon: cfg.epsilon,
        };
        return Ok(grow(&data, &cols, cfg.max_depth, beta)?.tree);
    }
    let cache = ObliqueCache::refresh(&data, &geom, &cands, &table, cfg.epsilon)?;
    let cols = cache.columns(&cands);
    Ok(grow(&data, &cols, cfg.max_depth, beta)?.tree)
}

/// Directions fixed for a number of trees, with projections of the
/// current samples.
struct ObliqueCache {
    dirs: Vec<Option<Vec<f64>>>,
    usable: Vec<usize>,
    z: Vec<f64>,
    orders: Vec<Vec<u32>>,
}

impl ObliqueCache {
    fn refresh(data: &DataView, geom: &FeatureGeometry, cands: &[ObliqueCandidate], table: &SigmaTable, epsilon: f64) -> Result<Self, BoostError> {
        let means = class_means(data, |_| true);
        let dirs = directions(cands, geom, &means, table, epsilon)?;
        let mut cache = ObliqueCache {
            dirs,
            usable: Vec::new(),
            z: Vec::new(),
            orders: Vec::new(),
        };
        cache.reproject(data, geom, cands);
        Ok(cache)
    }

    fn reproject(&mut self, data: &DataView, geom: &FeatureGeometry, cands: &[ObliqueCandidate]) {
        let n = data.len();
        self.usable = (0..cands.len()).filter(|&k| self.dirs[k].is_some()).collect();
        let usable_cands: Vec<ObliqueCandidate> = self.usable.iter().map(|&k| cands[k]).collect();
        let usable_dirs: Vec<Option<Vec<f64>>> = self.usable.iter().map(|&k| self.dirs[k].clone()).collect();
        self.z = project_all(data, geom, &usable_cands, &usable_dirs);
        self.orders = presort(&self.z, n, self.usable.len());
    }

    fn columns<'a>(&'a self, cands: &'a [ObliqueCandidate]) -> Columns<'a> {
        Columns::Presorted {
            values: &self.z,
            orders: &self.orders,
            kind: ColumnKind::Projections {
                cands,
                dirs: &self.dirs,
                usable: &self.usable,
            },
        }
    }
}

struct WorkingSet {
    features: Vec<f64>,
    labels: Vec<i8>,
    /// Ensemble score of every sample.
    scores: Vec<f64>,
    /// Class-balanced base weights.
    base: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
    geometry: Option<FeatureGeometry>,
}

impl WorkingSet {
    fn view(&self) -> DataView<'_> {
        DataView {
            features: &self.features,
            dim: self.dim,
            geometry: self.geometry,
            labels: &self.labels,
            weights: &self.weights,
        }
    }

    fn rebalance(&mut self) {
        let np = self.labels.iter().filter(|&&y| y > 0).count() as f64;
        let nn = self.labels.len() as f64 - np;
        self.base = self
            .labels
            .iter()
            .map(|&y| if y > 0 { 0.5 / np } else { 0.5 / nn })
            .collect();
    }

    /// Updates weights and returns the loss `Σ bᵢ exp(-yᵢ F(xᵢ))`.
    fn reweight(&mut self) -> f64 {
        let mut total = 0.0;
        for ((w, &b), (&y, &f)) in self.weights.iter_mut().zip(&self.base).zip(self.labels.iter().zip(&self.scores)) {
            *w = b * (-f64::from(y) * f).exp();
            total += *w;
        }
        if total > 0.0 && total.is_finite() {
            for w in self.weights.iter_mut() {
                *w /= total;
            }
        }
        total
    }

    fn negatives(&self) -> usize {
        self.labels.iter().filter(|&&y| y < 0).count()
    }

    /// Appends negatives and drops the oldest ones beyond `cap`.
    fn add_negatives(&mut self, rows: Vec<Vec<f64>>, scores: Vec<f64>, cap: usize) {
        for (r, s) in rows.into_iter().zip(scores) {
            self.features.extend_from_slice(&r);
            self.labels.push(-1);
            self.scores.push(s);
        }
        let mut excess = self.negatives().saturating_sub(cap);
        if excess > 0 {
            let d = self.dim;
            let mut keep = Vec::with_capacity(self.labels.len());
            for &y in &self.labels {
                if y < 0 && excess > 0 {
                    excess -= 1;
                    keep.push(false);
                } else {
                    keep.push(true);
                }
            }
            let mut features = Vec::with_capacity(self.features.len());
            let mut labels = Vec::new();
            let mut scores = Vec::new();
            for (i, &k) in keep.iter().enumerate() {
                if k {
                    features.extend_from_slice(&self.features[i * d..(i + 1) * d]);
                    labels.push(self.labels[i]);
                    scores.push(self.scores[i]);
                }
            }
            self.features = features;
            self.labels = labels;
            self.scores = scores;
        }
        self.weights = vec![0.0; self.labels.len()];
        self.rebalance();
    }
}

/// RealBoost: each tree is fit to weights `∝ bᵢ exp(-yᵢ F(xᵢ))`, where the
/// base weights `b` give each class total mass 1/2 (the training set's own
/// weights are not used). At every bootstrap checkpoint below `num_trees`
/// the source is asked for hard negatives, which join the set (oldest
/// negatives are dropped beyond the cap) and training continues.
pub fn train_realboost(
    ts: &TrainingSet,
    cfg: &BoostConfig,
    sigma: Option<&SigmaSource>,
    mut negatives: Option<&mut dyn NegativeSource>,
) -> Result<TrainOutcome, BoostError> {
    cfg.validate()?;
    if ts.count(1) == 0 || ts.count(-1) == 0 {
        return Err(BoostError::InvalidTrainingSet("boosting needs both classes".into()));
    }
    let mut ws = WorkingSet {
        features: ts.features().to_vec(),
        labels: ts.labels().to_vec(),
        scores: vec![0.0; ts.len()],
        base: Vec::new(),
        weights: vec![0.0; ts.len()],
        dim: ts.dim(),
        geometry: ts.geometry(),
    };
    ws.rebalance();
    if ws.negatives() > cfg.negatives_cap {
        ws.add_negatives(Vec::new(), Vec::new(), cfg.negatives_cap);
    }
    ws.reweight();

    let oblique = cfg.split_policy.is_oblique();
    let (geom, cands) = if oblique {
        let (g, c) = oblique_context(cfg, &ws.view(), sigma)?;
        (Some(g), c)
    } else {
        (None, Vec::new())
    };
    let per_patch = SigmaSource::PerPatch;
    let source = sigma.unwrap_or(&per_patch);

    let mut stats = TrainStats {
        stage_starts: vec![0],
        ..TrainStats::default()
    };
    let mut trees: Vec<Tree> = Vec::with_capacity(cfg.num_trees);
    let checkpoints: Vec<usize> = cfg
        .bootstrap_schedule
        .iter()
        .copied()
        .filter(|&c| c > 0 && c < cfg.num_trees)
        .collect();

    let mut features_major: Option<(Vec<f64>, Vec<Vec<u32>>)> = None;
    let mut cache: Option<ObliqueCache> = None;
    let mut round = 0;

    while trees.len() < cfg.num_trees {
        let t = trees.len();
        let n = ws.labels.len();
        let beta = cfg.leaf_smoothing.unwrap_or(1.0 / n as f64);
        let grown = if !oblique {
            if features_major.is_none() {
                let values = feature_major(&ws.view());
                let orders = presort(&values, n, ws.dim);
                features_major = Some((values, orders));
            }
            let (values, orders) = features_major.as_ref().expect("presorted");
            let cols = Columns::Presorted {
                values,
                orders,
                kind: ColumnKind::Features,
            };
            grow(&ws.view(), &cols, cfg.max_depth, beta)?
        } else {
            let geom = geom.expect("oblique geometry");
            let data = ws.view();
            match cfg.update_period {
                UpdatePeriod::PerNode => {
                    let table = SigmaTable::build(source, &data, &geom, cfg.patch_size)?;
                    let cols = Columns::PerNode {
                        geom,
                        cands: &cands,
                        table: &table,
                        epsilon: cfg.epsilon,
                    };
                    grow(&data, &cols, cfg.max_depth, beta)?
                }
                period => {
                    let due = match (period, &cache) {
                        (_, None) => true,
                        (UpdatePeriod::Trees(p), Some(_)) => t % p == 0,
                        _ => false,
                    };
                    if due {
                        let table = SigmaTable::build(source, &data, &geom, cfg.patch_size)?;
                        cache = Some(ObliqueCache::refresh(&data, &geom, &cands, &table, cfg.epsilon)?);
                        stats.lda_refreshes += 1;
                        if cfg.epsilon != 1.0 {
                            stats.lda_solves += cands.len();
                        }
                    }
                    let c = cache.as_ref().expect("oblique cache");
                    grow(&data, &c.columns(&cands), cfg.max_depth, beta)?
                }
            }
        };
        stats.lda_solves += grown.lda_solves;
        stats.lda_refreshes += grown.lda_refreshes;
        for (s, o) in ws.scores.iter_mut().zip(&grown.outputs) {
            *s += o;
        }
        trees.push(grown.tree);
        stats.loss_history.push(ws.reweight());

        if checkpoints.contains(&trees.len()) {
            if let Some(src) = negatives.as_deref_mut() {
                let ens = BoostedEnsemble::new(trees.clone(), ws.dim, ws.geometry);
                let rows = src.harvest(&ens, round, cfg.harvest_threshold, cfg.per_image_cap, cfg.negatives_cap)?;
                round += 1;
                stats.harvested.push(rows.len());
                if rows.is_empty() {
                    log::warn!("bootstrap round {round}: no negatives scored above {}", cfg.harvest_threshold);
                    stats.no_negatives_harvested = true;
                } else {
                    if let Some(bad) = rows.iter().find(|r| r.len() != ws.dim) {
                        return Err(BoostError::DimensionMismatch {
                            expected: ws.dim,
                            found: bad.len(),
                        });
                    }
                    let scores = rows.iter().map(|r| ens.raw_score(r)).collect();
                    log::info!("bootstrap round {round}: harvested {} negatives after {} trees", rows.len(), trees.len());
                    ws.add_negatives(rows, scores, cfg.negatives_cap);
                    ws.reweight();
                    stats.stage_starts.push(trees.len());
                    features_major = None;
                    if let (Some(c), Some(g)) = (cache.as_mut(), geom.as_ref()) {
                        c.reproject(&ws.view(), g, &cands);
                    }
                }
            }
        }
    }

    let mut ensemble = BoostedEnsemble::new(trees, ws.dim, ws.geometry);
    ensemble.metadata.extend(cfg.entries());
    let positives: Vec<&[f64]> = (0..ws.labels.len())
        .filter(|&i| ws.labels[i] > 0)
        .map(|i| &ws.features[i * ws.dim..(i + 1) * ws.dim])
        .collect();
    apply_cascade_mode(&mut ensemble, &cfg.cascade, &positives)?;
    stats.final_positives = positives.len();
    stats.final_negatives = ws.negatives();
    Ok(TrainOutcome { ensemble, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linstats::Matrix;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn cfg(trees: usize, depth: usize) -> BoostConfig {
        BoostConfig {
            num_trees: trees,
            max_depth: depth,
            bootstrap_schedule: vec![],
            cascade: super::super::CascadeMode::None,
            ..BoostConfig::default()
        }
    }

    fn error_rate(ens: &BoostedEnsemble, ts: &TrainingSet) -> f64 {
        let wrong = (0..ts.len())
            .filter(|&i| (ens.raw_score(ts.row(i)) > 0.0) != (ts.labels()[i] > 0))
            .count();
        wrong as f64 / ts.len() as f64
    }

    fn gaussian_set(n: usize, seed: u64, shift: f64) -> TrainingSet {
        let mut r = rng::stream(seed, "train-gauss");
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y: i8 = if i % 2 == 0 { 1 } else { -1 };
            let u: f64 = r.sample(StandardNormal);
            let v: f64 = r.sample(StandardNormal);
            rows.push(vec![u + shift * f64::from(y), 0.9 * u + 0.4 * v, r.gen::<f64>()]);
            labels.push(y);
        }
        TrainingSet::from_rows(&rows, labels, None).unwrap()
    }

    #[test]
    fn separable_depth_one() {
        let ts = TrainingSet::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], vec![-1, -1, 1, 1], None).unwrap();
        let tree = train_tree(&ts, &cfg(1, 1), None).unwrap();
        let (l, r) = (tree.predict(&[0.5], None), tree.predict(&[2.5], None));
        assert!(l < 0.0 && r > 0.0);
        assert_eq!(tree.nodes.len(), 3);
    }

    #[test]
    fn single_class_node_is_leaf() {
        // the weighted set has both labels but the first split isolates them
        let ts = TrainingSet::from_rows(&[vec![0.0], vec![1.0]], vec![-1, 1], None).unwrap();
        let tree = train_tree(&ts, &cfg(1, 3), None).unwrap();
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn single_class_root_is_leaf() {
        let ts = TrainingSet::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![-1, -1, -1], None).unwrap();
        let tree = train_tree(&ts, &cfg(1, 3), None).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert!(tree.predict(&[1.0], None) < 0.0);
        assert!(train_realboost(&ts, &cfg(1, 3), None, None).is_err());
    }

    #[test]
    fn xor_depth_two_is_exact() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let ts = TrainingSet::from_rows(&rows, vec![1, 1, -1, -1], None).unwrap();
        let tree = train_tree(&ts, &cfg(1, 2), None).unwrap();
        for (x, &y) in rows.iter().zip(ts.labels()) {
            assert_eq!(tree.predict(x, None) > 0.0, y > 0);
        }
    }

    #[test]
    fn separable_boosting_reaches_zero_error_with_monotone_loss() {
        let mut r = rng::stream(5, "sep-2d");
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let y: i8 = if i % 2 == 0 { 1 } else { -1 };
            let a: f64 = r.gen_range(-1.0..1.0);
            let b: f64 = r.gen_range(0.1..1.0) * f64::from(y);
            rows.push(vec![a + b, a - b]);
            labels.push(y);
        }
        let ts = TrainingSet::from_rows(&rows, labels, None).unwrap();
        let out = train_realboost(&ts, &cfg(4, 2), None, None).unwrap();
        let loss = &out.stats.loss_history;
        assert!(loss.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(loss[0] <= 1.0);
        let more = train_realboost(&ts, &cfg(40, 2), None, None).unwrap();
        assert_eq!(error_rate(&more.ensemble, &ts), 0.0);
    }

    #[test]
    fn one_tree_ensemble_equals_tree() {
        let ts = gaussian_set(200, 1, 0.7);
        let out = train_realboost(&ts, &cfg(1, 3), None, None).unwrap();
        let tree = train_tree(&ts, &cfg(1, 3), None).unwrap();
        assert_eq!(out.ensemble.trees[0], tree);
        for i in 0..ts.len() {
            assert_eq!(out.ensemble.raw_score(ts.row(i)), tree.predict(ts.row(i), None));
        }
    }

    #[test]
    fn deterministic() {
        let ts = gaussian_set(300, 2, 0.5);
        let a = train_realboost(&ts, &cfg(20, 3), None, None).unwrap();
        let b = train_realboost(&ts, &cfg(20, 3), None, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_non_increasing_on_seeded_sets() {
        for seed in 0..5 {
            let ts = gaussian_set(400, 10 + seed, 0.3);
            let out = train_realboost(&ts, &cfg(30, 3), None, None).unwrap();
            let loss = &out.stats.loss_history;
            assert!(loss.windows(2).all(|w| w[1] <= w[0] + 1e-12), "seed {seed}");
        }
    }

    fn patch_set(n: usize, seed: u64) -> TrainingSet {
        let g = FeatureGeometry {
            channels: 2,
            height: 3,
            width: 3,
            shrink: 1,
        };
        let mut r = rng::stream(seed, "patch-set");
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y: i8 = if i % 2 == 0 { 1 } else { -1 };
            let common: f64 = r.sample(StandardNormal);
            let x: Vec<f64> = (0..18)
                .map(|j| {
                    let e: f64 = r.sample(StandardNormal);
                    common + 0.3 * e + if j == 4 || j == 13 { 0.4 * f64::from(y) } else { 0.0 }
                })
                .collect();
            rows.push(x);
            labels.push(y);
        }
        TrainingSet::from_rows(&rows, labels, Some(g)).unwrap()
    }

    #[test]
    fn oblique_training_outputs_match_predictions() {
        let ts = patch_set(200, 3);
        for period in [UpdatePeriod::PerNode, UpdatePeriod::Trees(2), UpdatePeriod::Never] {
            let c = BoostConfig {
                split_policy: SplitPolicy::ObliquePerPatch,
                update_period: period,
                patch_size: 2,
                ..cfg(5, 2)
            };
            let out = train_realboost(&ts, &c, Some(&SigmaSource::PerPatch), None).unwrap();
            assert!(out.ensemble.trees.iter().all(|t| t
                .nodes
                .iter()
                .all(|n| !matches!(n, Node::Internal { split: Split::Orthogonal { .. }, .. }))));
            assert!(error_rate(&out.ensemble, &ts) < 0.3, "{period:?}");
            let want_refreshes = match period {
                UpdatePeriod::PerNode => out.stats.lda_refreshes,
                UpdatePeriod::Trees(2) => 3,
                _ => 1,
            };
            assert_eq!(out.stats.lda_refreshes, want_refreshes);
        }
    }

    #[test]
    fn shared_sigma_never_updates_solves_once() {
        let ts = patch_set(100, 4);
        let c = BoostConfig {
            split_policy: SplitPolicy::ObliqueShared,
            update_period: UpdatePeriod::Never,
            patch_size: 3,
            ..cfg(8, 2)
        };
        let sigma = SigmaSource::Shared(vec![Matrix::identity(9); 2]);
        let out = train_realboost(&ts, &c, Some(&sigma), None).unwrap();
        assert_eq!(out.stats.lda_refreshes, 1);
        assert_eq!(out.stats.lda_solves, 2);
    }

    #[test]
    fn policy_and_source_must_agree() {
        let ts = patch_set(20, 5);
        let c = BoostConfig {
            split_policy: SplitPolicy::ObliqueShared,
            ..cfg(1, 1)
        };
        assert!(train_realboost(&ts, &c, None, None).is_err());
        let plain = TrainingSet::from_rows(&[vec![0.0], vec![1.0]], vec![-1, 1], None).unwrap();
        let c = BoostConfig {
            split_policy: SplitPolicy::ObliquePerPatch,
            ..cfg(1, 1)
        };
        assert!(matches!(train_realboost(&plain, &c, None, None), Err(BoostError::MissingGeometry)));
    }

    struct FixedSource {
        pool: Vec<Vec<f64>>,
    }

    impl NegativeSource for FixedSource {
        fn harvest(&mut self, ens: &BoostedEnsemble, _round: usize, threshold: f64, _per_image: usize, max_total: usize) -> Result<Vec<Vec<f64>>, BoostError> {
            let mut scored: Vec<(f64, &Vec<f64>)> = self.pool.iter().map(|x| (ens.raw_score(x), x)).filter(|(s, _)| *s >= threshold).collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            Ok(scored.into_iter().take(max_total).map(|(_, x)| x.clone()).collect())
        }
    }

    #[test]
    fn bootstrapping_adds_negatives_and_respects_cap() {
        let ts = gaussian_set(100, 6, 1.0);
        let mut r = rng::stream(6, "pool");
        let pool: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                let u: f64 = r.sample(StandardNormal);
                let v: f64 = r.sample(StandardNormal);
                vec![u - 0.2, 0.9 * u + 0.4 * v, r.gen::<f64>()]
            })
            .collect();
        let mut src = FixedSource { pool };
        let c = BoostConfig {
            bootstrap_schedule: vec![4, 8],
            negatives_cap: 120,
            harvest_threshold: -0.5,
            ..cfg(12, 2)
        };
        let out = train_realboost(&ts, &c, None, Some(&mut src)).unwrap();
        assert_eq!(out.stats.harvested.len(), 2);
        assert!(out.stats.harvested[0] > 0);
        assert!(out.stats.final_negatives <= 120);
        assert_eq!(out.ensemble.len(), 12);

        let mut empty = FixedSource { pool: Vec::new() };
        let out = train_realboost(&ts, &c, None, Some(&mut empty)).unwrap();
        assert!(out.stats.no_negatives_harvested);
    }
}
