//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. Runs without the libtest harness so
//! that every line is printed even when an earlier criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use ldcf::boost::{calibrate_cascade, train_realboost, BoostConfig, BoostedEnsemble, CascadeMode, TrainingSet};
use ldcf::channels::{compute_channels, ChannelConfig, ChannelStack, Plane};
use ldcf::detect::{build_pyramid, detect, nms, Detection, DetectorConfig, Overlap};
use ldcf::eval::{log_average_mr, EvalConfig, EvalCurve};
use ldcf::filterbank::{apply_filterbank, derive_filters, FilterBankConfig};
use ldcf::imgio::Image;
use ldcf::linstats::{estimate_autocorr_brute, estimate_autocorr_fft, lda_solve, patch_covariance, sym_eig, Autocorrelation, Matrix};
use ldcf::pipeline::{evaluate_model, train, TrainData};
use ldcf::rng;
use ldcf::synthbench::{run_fig1, run_fig2_with_predictions, SplitMethod, SynthSpec, Transform, FIG1_GRID};
use ldcf::synthdata::{desk_config, generate, SynthDataConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_plane(w: usize, h: usize, r: &mut impl Rng) -> Plane {
    Plane::from_fn(w, h, |_, _| r.gen_range(-1.0..1.0))
}

fn c1_autocorr_oracle() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for (side, radius) in [(8usize, 3usize), (16, 7)] {
        for seed in 0..50u64 {
            let mut r = rng::substream(seed, "acceptance-autocorr", side as u64);
            let s = vec![ChannelStack::single("x", random_plane(side, side, &mut r)).unwrap()];
            let fft = estimate_autocorr_fft(&s, radius).unwrap();
            let brute = estimate_autocorr_brute(&s, radius).unwrap();
            worst = worst.max(fft.max_abs_diff(&brute));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(worst <= 1e-9 && secs < 5.0, format!("max |fft - brute| = {worst:.2e} (tol 1e-9), {secs:.2} s (limit 5 s)"))
}

/// Separable AR(1) field with coefficient `a`, cropped after a burn-in.
fn ar1_texture(size: usize, a: f64, r: &mut impl Rng) -> Plane {
    let burn = 48;
    let n = size + burn;
    let mut f = vec![0.0f64; n * n];
    for y in 0..n {
        for x in 0..n {
            let e: f64 = r.sample(StandardNormal);
            let left = if x > 0 { f[y * n + x - 1] } else { 0.0 };
            let up = if y > 0 { f[(y - 1) * n + x] } else { 0.0 };
            let diag = if x > 0 && y > 0 { f[(y - 1) * n + x - 1] } else { 0.0 };
            f[y * n + x] = a * left + a * up - a * a * diag + e;
        }
    }
    Plane::from_fn(size, size, |x, y| f[(y + burn) * n + x + burn])
}

fn c2_patch_covariance() -> Outcome {
    let mut r = rng::stream(2, "acceptance-ar1");
    let planes: Vec<Plane> = (0..200).map(|_| ar1_texture(64, 0.9, &mut r)).collect();
    let stacks: Vec<ChannelStack> = planes.iter().map(|p| ChannelStack::single("x", p.clone()).unwrap()).collect();
    let ac = estimate_autocorr_fft(&stacks, 2).unwrap();
    let model = patch_covariance(&ac, "x", 3).unwrap();
    // direct: 10^5 patches, each centred on its own image's mean
    let means: Vec<f64> = planes.iter().map(Plane::mean).collect();
    let mut s = vec![0.0f64; 81];
    let n = 100_000;
    for _ in 0..n {
        let i = r.gen_range(0..planes.len());
        let (x0, y0) = (r.gen_range(0..62), r.gen_range(0..62));
        let mut v = [0.0f64; 9];
        for dy in 0..3 {
            for dx in 0..3 {
                v[dy * 3 + dx] = planes[i].get(x0 + dx, y0 + dy) - means[i];
            }
        }
        for a in 0..9 {
            for b in 0..9 {
                s[a * 9 + b] += v[a] * v[b];
            }
        }
    }
    let direct = Matrix::from_vec(9, 9, s.into_iter().map(|v| v / n as f64).collect()).unwrap();
    let rel = model.sub(&direct).frobenius_norm() / direct.frobenius_norm();
    outcome(rel <= 0.05, format!("relative Frobenius error {:.4} (limit 0.05)", rel))
}

fn c3_eigendecomposition() -> Outcome {
    let (mut rec, mut orth) = (0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let mut r = rng::stream(seed, "acceptance-eig");
        let n = r.gen_range(1..=25);
        let mut m = Matrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
        m = Matrix::from_fn(n, n, |i, j| m.get(i, j) + m.get(j, i));
        let e = sym_eig(&m).unwrap();
        rec = rec.max(e.reconstruct().max_abs_diff(&m) / m.max_abs().max(f64::MIN_POSITIVE));
        let qtq = e.vectors.transpose().matmul(&e.vectors);
        orth = orth.max(qtq.max_abs_diff(&Matrix::identity(n)));
    }
    outcome(rec <= 1e-9 && orth <= 1e-9, format!("max ‖QΛQᵀ−S‖/‖S‖ = {rec:.2e}, max ‖QᵀQ−I‖ = {orth:.2e} (tol 1e-9)"))
}

fn c4_lda() -> Outcome {
    let mut ok = true;
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut r = rng::stream(seed, "acceptance-lda");
        let d = r.gen_range(1..=12);
        let mp: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
        let mn: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
        let diff: Vec<f64> = mp.iter().zip(&mn).map(|(a, b)| a - b).collect();
        let a = Matrix::from_fn(d, d, |_, _| r.gen_range(-1.0..1.0));
        let mut sigma = a.transpose().matmul(&a);
        for i in 0..d {
            sigma.set(i, i, sigma.get(i, i) + 0.1);
        }
        ok &= lda_solve(&mp, &mn, sigma.data(), 1.0).unwrap() == diff;
        let diag: Vec<f64> = (0..d).map(|_| r.gen_range(0.1..3.0)).collect();
        let eps = if seed % 2 == 0 { 0.0 } else { r.gen_range(0.0..1.0) };
        let w = lda_solve(&mp, &mn, Matrix::diag(&diag).data(), eps).unwrap();
        let closed: Vec<f64> = (0..d).map(|i| diff[i] / ((1.0 - eps) * diag[i] + eps)).collect();
        ok &= w == closed;
        let eps = r.gen_range(0.0..0.5);
        let w = lda_solve(&mp, &mn, sigma.data(), eps).unwrap();
        let reg = Matrix::from_fn(d, d, |i, j| (1.0 - eps) * sigma.get(i, j) + if i == j { eps } else { 0.0 });
        let res = reg.mul_vec(&w).iter().zip(&diff).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let norm = diff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(res / norm);
    }
    outcome(ok && worst <= 1e-9, format!("ε=1 and diagonal cases exact: {ok}; max relative residual {worst:.2e} (tol 1e-9)"))
}

fn small_boost(trees: usize, depth: usize) -> BoostConfig {
    BoostConfig {
        num_trees: trees,
        max_depth: depth,
        bootstrap_schedule: Vec::new(),
        cascade: CascadeMode::None,
        ..BoostConfig::default()
    }
}

fn random_problem(seed: u64, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<i8>) {
    let mut r = rng::stream(seed, "acceptance-problem");
    let w: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let x: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.5 * r.sample::<f64, _>(StandardNormal);
        labels.push(if (s > 0.0) ^ (i % 17 == 0) { 1 } else { -1 });
        rows.push(x);
    }
    (rows, labels)
}

fn c5_scale_invariance() -> Outcome {
    let mut mismatches = 0usize;
    let mut points = 0usize;
    for seed in 0..20u64 {
        let (rows, labels) = random_problem(seed, 300, 6);
        let (test, _) = random_problem(seed + 1000, 500, 6);
        let mut r = rng::stream(seed, "acceptance-scales");
        let scales: Vec<f64> = (0..6).map(|_| (r.gen_range(-3.0..3.0f64)).exp()).collect();
        let scale = |v: &[Vec<f64>]| -> Vec<Vec<f64>> { v.iter().map(|x| x.iter().zip(&scales).map(|(a, s)| a * s).collect()).collect() };
        let cfg = small_boost(10, 3);
        let a = train_realboost(&TrainingSet::from_rows(&rows, labels.clone(), None).unwrap(), &cfg, None, None).unwrap();
        let b = train_realboost(&TrainingSet::from_rows(&scale(&rows), labels, None).unwrap(), &cfg, None, None).unwrap();
        for (x, xs) in test.iter().zip(scale(&test)) {
            points += 1;
            if a.ensemble.raw_score(x) != b.ensemble.raw_score(&xs) {
                mismatches += 1;
            }
        }
    }
    let spec = SynthSpec {
        n_test: 2000,
        seeds: (0..20).collect(),
        ..SynthSpec::default()
    };
    let (_, preds) = run_fig2_with_predictions(&spec, 5, 2, &[Transform::Mode(ldcf::linstats::TransformMode::Decorrelate), Transform::Mode(ldcf::linstats::TransformMode::PcaWhiten)]).unwrap();
    let n = spec.seeds.len();
    let transform_mismatch: usize = (0..n).map(|s| preds[s].iter().zip(&preds[n + s]).filter(|(a, b)| a != b).count()).sum();
    outcome(
        mismatches == 0 && transform_mismatch == 0,
        format!("scaled vs unscaled: {mismatches} of {points} scores differ; decorrelated vs PCA-whitened: {transform_mismatch} predictions differ (tol 0)"),
    )
}

/// Pre-registered oracle means (10 seeds, default spec), frozen.
const FIG1_ORACLE: [(usize, usize, f64, f64); 9] = [
    (1, 1, 0.4070, 0.0577),
    (1, 2, 0.2738, 0.0586),
    (1, 3, 0.2132, 0.0581),
    (5, 1, 0.2807, 0.0577),
    (5, 2, 0.1405, 0.0601),
    (5, 3, 0.0914, 0.0619),
    (20, 1, 0.1379, 0.0577),
    (20, 2, 0.0761, 0.0634),
    (20, 3, 0.0735, 0.0673),
];

fn c6_synthetic_figures() -> Outcome {
    let t = Instant::now();
    let spec = SynthSpec::default();
    let r1 = run_fig1(&spec, &FIG1_GRID, &[SplitMethod::Orthogonal, SplitMethod::Oblique], 0.0).unwrap();
    let mut oblique_wins = true;
    let mut matches_oracle = true;
    let mut min_gap = f64::INFINITY;
    for &(t_, d, o_ortho, o_obl) in &FIG1_ORACLE {
        let ortho = r1.find("fig1", "orthogonal", t_, d).unwrap().mean_test;
        let obl = r1.find("fig1", "oblique", t_, d).unwrap().mean_test;
        oblique_wins &= obl < ortho;
        min_gap = min_gap.min(ortho - obl);
        matches_oracle &= (ortho - o_ortho).abs() < 5e-5 && (obl - o_obl).abs() < 5e-5;
    }
    let (r2, _) = run_fig2_with_predictions(&spec, 5, 2, &Transform::ALL).unwrap();
    let get = |m: &str| r2.find("fig2", m, 5, 2).unwrap();
    let (raw, dec, zca) = (get("none"), get("decorrelate"), get("zca_whiten"));
    let decor_wins = dec.mean_test < raw.mean_test;
    // "ineffective": ZCA indistinguishable from raw, within two combined standard errors
    let zca_margin = 2.0 * (raw.stderr_test.powi(2) + zca.stderr_test.powi(2)).sqrt();
    let zca_gap = (zca.mean_test - raw.mean_test).abs();
    let zca_ok = zca_gap <= zca_margin;
    let secs = t.elapsed().as_secs_f64();
    outcome(
        oblique_wins && decor_wins && zca_ok && matches_oracle && secs < 120.0,
        format!(
            "oblique<orthogonal at all 9 cells: {oblique_wins} (min gap {min_gap:.4}); decorrelated {:.4} < raw {:.4}: {decor_wins}; |zca {:.4} - raw| = {zca_gap:.4} within {zca_margin:.4}: {zca_ok}; oracle reproduced: {matches_oracle}; {secs:.1} s (limit 120 s)",
            dec.mean_test, raw.mean_test, zca.mean_test
        ),
    )
}

/// Sign changes of the centre line of an `m×m` filter along whichever axis
/// carries more of its energy; entries below 1e-9 of the peak are skipped.
fn sign_changes_along_principal_axis(f: &[f64], m: usize) -> usize {
    let c = (m / 2) as f64;
    let (mut ex, mut ey) = (0.0, 0.0);
    for y in 0..m {
        for x in 0..m {
            let e = f[y * m + x].powi(2);
            ex += e * (x as f64 - c).powi(2);
            ey += e * (y as f64 - c).powi(2);
        }
    }
    let mid = m / 2;
    let line: Vec<f64> = if ex >= ey { (0..m).map(|x| f[mid * m + x]).collect() } else { (0..m).map(|y| f[y * m + mid]).collect() };
    let peak = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let signs: Vec<bool> = line.iter().filter(|v| v.abs() > 1e-9 * peak).map(|v| *v > 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn c7_filter_structure() -> Outcome {
    let l = 2.0f64;
    let ac = Autocorrelation::from_fn(4, vec!["x".into()], |_, dx, dy| (-((dx * dx + dy * dy) as f64) / (2.0 * l * l)).exp());
    let fb = derive_filters(
        &ac,
        &FilterBankConfig {
            downsample: false,
            ..FilterBankConfig::default()
        },
    )
    .unwrap();
    let ch = &fb.channels[0];
    let changes: Vec<usize> = ch.filters.iter().map(|f| sign_changes_along_principal_axis(f, 5)).collect();
    let ev = ch.eigenvalues.clone().unwrap();
    let structure = changes.iter().enumerate().all(|(j, &c)| c == j);
    // equal up to rounding does not count as descending
    let descending = ev.windows(2).all(|w| w[0] - w[1] > 1e-9 * w[0].abs());
    outcome(
        structure && descending,
        format!("sign changes {changes:?} (want [0, 1, 2, 3]); eigenvalues {:?} strictly descending: {descending}", ev.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()),
    )
}

fn c8_shapes() -> Outcome {
    let mut r = rng::stream(8, "acceptance-shape");
    let img = Image::new(64, 128, 3, (0..64 * 128 * 3).map(|_| r.gen::<u8>()).collect()).unwrap();
    let channels = compute_channels(&img, &ChannelConfig::default()).unwrap();
    let ac = estimate_autocorr_fft(std::slice::from_ref(&channels), 4).unwrap();
    let fb = derive_filters(&ac, &FilterBankConfig::default()).unwrap();
    let out = apply_filterbank(&channels, &fb).unwrap();
    let acf_dim = channels.num_channels() * channels.width() * channels.height();
    let ldcf_dim = out.num_channels() * out.width() * out.height();
    let no_ds = apply_filterbank(
        &channels,
        &derive_filters(
            &ac,
            &FilterBankConfig {
                downsample: false,
                ..FilterBankConfig::default()
            },
        )
        .unwrap(),
    )
    .unwrap();
    let pass = channels.num_channels() == 10 && out.num_channels() == 40 && no_ds.num_channels() == 40 && acf_dim == 20480 && ldcf_dim == 20480;
    outcome(pass, format!("{} channels -> {} planes; 128x64 window: ACF dim {acf_dim}, LDCF dim {ldcf_dim} (want 20480 both)", channels.num_channels(), out.num_channels()))
}

fn c9_cascade() -> Outcome {
    // neutrality on a real detector
    let ds = generate(
        &SynthDataConfig {
            train_positives: 30,
            train_negatives: 10,
            test_images: 4,
            ..SynthDataConfig::default()
        },
        9,
    );
    let mut cfg = desk_config();
    cfg.boost.num_trees = 32;
    cfg.boost.bootstrap_schedule = vec![16];
    cfg.initial_negatives = 300;
    let rep = train(
        &TrainData {
            positives: ds.train_positives,
            negatives: ds.train_negatives,
        },
        &cfg.pipeline(),
    )
    .unwrap();
    let model = rep.model;
    let mut neutral = true;
    for (img, _) in &ds.test {
        let levels = build_pyramid(img, &model.channels, model.filters.as_ref(), &model.detector).unwrap();
        let mut ens = model.ensemble.clone();
        ens.thresholds = vec![f64::NEG_INFINITY; ens.len()];
        let on = DetectorConfig {
            use_cascade: true,
            ..model.detector.clone()
        };
        let off = DetectorConfig {
            use_cascade: false,
            ..model.detector.clone()
        };
        neutral &= detect(&levels, &ens, &on).unwrap() == detect(&levels, &ens, &off).unwrap();
    }
    // safety: no calibration positive is rejected early
    let (rows, labels) = random_problem(99, 400, 8);
    let mut ens: BoostedEnsemble = train_realboost(&TrainingSet::from_rows(&rows, labels.clone(), None).unwrap(), &small_boost(40, 2), None, None).unwrap().ensemble;
    let positives: Vec<&[f64]> = rows.iter().zip(&labels).filter(|(_, &l)| l == 1).map(|(r, _)| r.as_slice()).collect();
    calibrate_cascade(&mut ens, &positives, f64::NEG_INFINITY, 0.05).unwrap();
    let rejected = positives.iter().filter(|p| ens.score(p, true).unwrap().1.is_some()).count();
    let negatives_rejected = rows.iter().zip(&labels).filter(|(r, &l)| l == -1 && ens.score(r, true).unwrap().1.is_some()).count();
    outcome(
        neutral && rejected == 0,
        format!("−∞ thresholds reproduce non-cascade detections: {neutral}; calibration positives rejected {rejected} of {} ({negatives_rejected} negatives rejected early)", positives.len()),
    )
}

/// Frozen oracle means (5 seeds): ACF 0.2677, LDCF 0.1986.
fn c10_end_to_end() -> Outcome {
    let t = Instant::now();
    let (mut acf, mut ldcf) = (Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let ds = generate(&SynthDataConfig::default(), seed);
        let data = TrainData {
            positives: ds.train_positives,
            negatives: ds.train_negatives,
        };
        for use_filters in [false, true] {
            let mut cfg = desk_config();
            cfg.seed = seed;
            cfg.use_filters = use_filters;
            let model = train(&data, &cfg.pipeline()).unwrap().model;
            let mr = evaluate_model(&model, &ds.test, &EvalConfig::default()).unwrap().log_average_miss_rate;
            if use_filters { &mut ldcf } else { &mut acf }.push(mr);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, ml) = (mean(&acf), mean(&ldcf));
    let secs = t.elapsed().as_secs_f64();
    outcome(
        ml <= ma && secs < 300.0 && ma.is_finite(),
        format!("mean log-average MR: LDCF {ml:.4} <= ACF {ma:.4} (oracle 0.1986 / 0.2677); {secs:.0} s (limit 300 s)"),
    )
}

fn brute_nms(dets: &[Detection], thr: f64, mode: Overlap) -> Vec<Detection> {
    let ov = |a: &Detection, b: &Detection| {
        let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
        let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
        let i = if iw > 0.0 && ih > 0.0 { iw * ih } else { 0.0 };
        let (aa, ab) = (a.w * a.h, b.w * b.h);
        match mode {
            Overlap::MinArea => i / aa.min(ab),
            Overlap::Iou => i / (aa + ab - i),
        }
    };
    let mut left: Vec<Detection> = dets.to_vec();
    let mut out = Vec::new();
    while !left.is_empty() {
        // best remaining: highest score, then smallest x, then smallest y
        let mut bi = 0;
        for (i, d) in left.iter().enumerate() {
            let b = &left[bi];
            if d.score > b.score || (d.score == b.score && (d.x < b.x || (d.x == b.x && d.y < b.y))) {
                bi = i;
            }
        }
        let best = left.remove(bi);
        left.retain(|d| ov(&best, d) <= thr);
        out.push(best);
    }
    out
}

fn c11_nms_and_metric() -> Outcome {
    let mut agree = 0;
    for seed in 0..100u64 {
        let mut r = rng::stream(seed, "acceptance-nms");
        let n = r.gen_range(1..60);
        let dets: Vec<Detection> = (0..n)
            .map(|_| Detection {
                x: r.gen_range(0.0..100.0f64).round(),
                y: r.gen_range(0.0..100.0f64).round(),
                w: r.gen_range(5.0..40.0f64).round(),
                h: r.gen_range(5.0..40.0f64).round(),
                score: (r.gen_range(0.0..5.0f64) * 4.0).round() / 4.0,
                scale: 1.0,
            })
            .collect();
        let mode = if seed % 2 == 0 { Overlap::MinArea } else { Overlap::Iou };
        let thr = r.gen_range(0.2..0.8);
        if nms(&dets, thr, mode) == brute_nms(&dets, thr, mode) {
            agree += 1;
        }
    }
    let curve = EvalCurve {
        fppi: vec![0.0, 0.005, 0.02, 0.1, 0.5, 1.0, 3.0],
        miss_rate: vec![0.5; 7],
        thresholds: vec![7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0],
        num_images: 10,
        num_gt: 20,
    };
    let lamr = log_average_mr(&curve).unwrap();
    outcome(agree == 100 && lamr == 0.5, format!("NMS agrees with brute-force oracle on {agree}/100 sets; constant 0.5 curve -> {lamr}"))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "autocorrelation FFT equals brute force", c1_autocorr_oracle),
        (2, "patch covariance matches direct sampling on AR(1) texture", c2_patch_covariance),
        (3, "symmetric eigendecomposition accuracy", c3_eigendecomposition),
        (4, "LDA limits and residual", c4_lda),
        (5, "orthogonal trees are invariant to per-feature scaling", c5_scale_invariance),
        (6, "synthetic oblique and decorrelation experiments", c6_synthetic_figures),
        (7, "eigenfilter derivative structure", c7_filter_structure),
        (8, "filter bank output shapes", c8_shapes),
        (9, "soft cascade neutrality and safety", c9_cascade),
        (10, "end-to-end planted-pattern detection, LDCF vs ACF", c10_end_to_end),
        (11, "NMS oracle and constant-curve metric", c11_nms_and_metric),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        let o = f();
        println!("{} criterion {n:>2}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("N/A  criterion 12: full-benchmark numbers need the original pedestrian datasets; not run");
    println!("{failed} of 11 criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
