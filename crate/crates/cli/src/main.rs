//! `ldcf` command-line driver.
//!
//! Settings are layered: built-in defaults, then `--config FILE`, then
//! flags given on the command line, then `--set key=value` overrides.
//! Exit status: 0 success, 2 configuration or usage error, 3 data error,
//! 1 anything else.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use log::info;

use ldcf::boost::{dump_ensemble, decode_ensemble, ENSEMBLE_MAGIC};
use ldcf::channels::{compute_channels, STACK_MAGIC};
use ldcf::config::RunConfig;
use ldcf::detect::{format_detections, parse_detections};
use ldcf::eval::{evaluate, log_average_mr_with, ScoredBox};
use ldcf::filterbank::{derive_filters, format_filterbank, parse_filterbank};
use ldcf::imgio::{decode_pnm, list_images, load_image, scan_dataset, DatasetLayout, GroundTruthBox, Image};
use ldcf::linstats::{estimate_autocorr_brute, estimate_autocorr_fft, format_autocorr, parse_autocorr};
use ldcf::pipeline::{evaluate_model, load_test_set, train_with, Model, TrainData};
use ldcf::synthbench::{run_fig1, run_fig2, SplitMethod, SynthSpec, Transform, FIG1_GRID};
use ldcf::synthdata::{generate, write_dataset, SynthDataConfig, DESK_CONFIG};
use ldcf::{ErrorKind, Result};

#[derive(Parser)]
#[command(name = "ldcf", version, about = "Boosted detectors over aggregate and locally decorrelated channel features")]
struct Cli {
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Log warnings and errors only.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate channel autocorrelation on an image corpus and derive a decorrelation filter bank.
    Filters(FiltersArgs),
    /// Train an ACF or LDCF detector on a dataset directory.
    Train(TrainArgs),
    /// Run a trained detector over images and write detections.
    Detect(DetectArgs),
    /// Score detections against annotations: miss rate vs FPPI and log-average miss rate.
    Eval(EvalArgs),
    /// Synthetic orthogonal vs oblique and decorrelation experiments.
    Bench(BenchArgs),
    /// Print any artifact (model, channel stack, filter bank, autocorrelation, image) as text.
    Inspect(InspectArgs),
    /// Write the planted-pattern dataset and a matching config file.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines applied over the defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override any config key, applied after everything else (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ChannelArgs {
    /// Channel aggregation (shrink) factor.
    #[arg(long, default_value_t = 2)]
    shrink: usize,
    /// Gradient orientation bins.
    #[arg(long, default_value_t = 6)]
    orientation_bins: usize,
}

#[derive(Args)]
struct FilterArgs {
    /// Filters kept per channel.
    #[arg(short = 'k', long = "filters-per-channel", default_value_t = 4)]
    k: usize,
    /// Filter side length (odd).
    #[arg(short = 'm', long = "filter-size", default_value_t = 5)]
    m: usize,
    /// Filter variant: top_k, smallest_k, random, constant, luv_only, grad_only.
    #[arg(long, default_value = "top_k")]
    variant: String,
    /// Autocorrelation radius; at least m-1.
    #[arg(long, default_value_t = 4)]
    radius: usize,
}

#[derive(Args)]
struct FiltersArgs {
    /// Directory of training images (PPM/PGM).
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Output filter bank file.
    #[arg(long, short, value_name = "FILE")]
    out: PathBuf,
    /// Also run the brute-force estimator and report the largest deviation.
    #[arg(long)]
    check: bool,
    /// Also write the estimated autocorrelation.
    #[arg(long, value_name = "FILE")]
    autocorr_out: Option<PathBuf>,
    #[command(flatten)]
    filter: FilterArgs,
    #[command(flatten)]
    channels: ChannelArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DetectorArgs {
    /// Window height in pixels.
    #[arg(long, default_value_t = 128)]
    window_h: usize,
    /// Window width in pixels.
    #[arg(long, default_value_t = 64)]
    window_w: usize,
    /// Window step in pixels; a multiple of the cell size.
    #[arg(long, default_value_t = 4)]
    stride: usize,
    /// Pyramid scales per octave.
    #[arg(long, default_value_t = 8)]
    scales_per_octave: usize,
    /// Report windows scoring at least this much.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    threshold: f64,
    /// NMS overlap threshold.
    #[arg(long, default_value_t = 0.65)]
    nms_threshold: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset root holding pos/, pos-annot/ and neg/.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output model file.
    #[arg(long, short, value_name = "FILE")]
    out: PathBuf,
    /// Use this filter bank instead of estimating one from the training images.
    #[arg(long, value_name = "FILE")]
    filters: Option<PathBuf>,
    /// Train plain ACF (no decorrelation filters).
    #[arg(long)]
    acf: bool,
    /// Number of boosted trees.
    #[arg(long, default_value_t = 2048)]
    trees: usize,
    /// Maximum tree depth.
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Split policy: orthogonal, oblique_shared, oblique_per_patch.
    #[arg(long, default_value = "orthogonal")]
    split: String,
    /// Oblique direction refresh: every N trees, `node`, or `never`.
    #[arg(long, default_value = "16")]
    update_period: String,
    /// LDA regularization epsilon.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Bootstrap schedule, cumulative tree counts.
    #[arg(long, default_value = "32,128,512,2048")]
    bootstrap: String,
    /// Maximum negatives kept.
    #[arg(long, default_value_t = 10_000)]
    negatives_cap: usize,
    /// Random negative windows before bootstrapping.
    #[arg(long, default_value_t = 5000)]
    initial_negatives: usize,
    /// Soft cascade: calibrated[:delta], constant:v or none.
    #[arg(long, default_value = "calibrated:0.05")]
    cascade: String,
    #[command(flatten)]
    filter: FilterArgs,
    #[command(flatten)]
    channels: ChannelArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DetectArgs {
    /// Trained model file.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Image file or directory of images.
    #[arg(long, value_name = "PATH")]
    images: PathBuf,
    /// Output detections file (`path x y w h score` lines).
    #[arg(long, short, value_name = "FILE")]
    out: PathBuf,
    /// Report windows scoring at least this much (default: the model's).
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    /// Disable soft-cascade early rejection.
    #[arg(long)]
    no_cascade: bool,
    /// Config file whose detector.* keys override the model's settings.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a detector.* key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Annotated dataset root holding pos/ and pos-annot/.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Detections file written by `detect`.
    #[arg(long, value_name = "FILE", conflicts_with = "model")]
    detections: Option<PathBuf>,
    /// Run this model instead of reading detections.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Output miss rate vs FPPI curve (CSV).
    #[arg(long, short, value_name = "FILE")]
    out: PathBuf,
    /// Minimum IoU for a match.
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Ignore ground truth and detections shorter than this.
    #[arg(long, default_value_t = 0.0)]
    min_height: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment: fig1 (orthogonal vs oblique over a T x D grid) or fig2 (feature transforms).
    #[arg(long, default_value = "fig1")]
    experiment: String,
    /// Output report (CSV).
    #[arg(long, short, value_name = "FILE")]
    out: PathBuf,
    /// Feature correlation of the Gaussian classes.
    #[arg(long, default_value_t = 0.95)]
    rho: f64,
    /// Training samples per run.
    #[arg(long, default_value_t = 1000)]
    n_train: usize,
    /// Test samples per run.
    #[arg(long, default_value_t = 5000)]
    n_test: usize,
    /// Number of seeds (0..N).
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Trees for fig2.
    #[arg(long, default_value_t = 5)]
    trees: usize,
    /// Depth for fig2.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// LDA regularization for the fig1 oblique trees.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
}

#[derive(Args)]
struct InspectArgs {
    /// Artifact to print.
    file: PathBuf,
    /// For models: print only the summary, not every tree.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory; receives train/, test/ and desk.cfg.
    #[arg(long, short, value_name = "DIR")]
    out: PathBuf,
    /// Dataset seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Error with its exit classification.
struct Failure {
    kind: ErrorKind,
    message: String,
}

impl From<ldcf::Error> for Failure {
    fn from(e: ldcf::Error) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

macro_rules! impl_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                ldcf::Error::from(e).into()
            }
        }
    )*};
}
impl_from!(
    ldcf::config::ConfigError,
    ldcf::imgio::ImgIoError,
    ldcf::channels::ChannelError,
    ldcf::linstats::LinStatsError,
    ldcf::filterbank::FilterError,
    ldcf::boost::BoostError,
    ldcf::detect::DetectError,
    ldcf::eval::EvalError
);

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        kind: ErrorKind::Config,
        message: message.into(),
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| ldcf::Error::io(format!("cannot read {}", path.display()), e).into())
}

fn write(path: &Path, bytes: &[u8]) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| ldcf::Error::io(format!("cannot create {}", dir.display()), e))?;
    }
    fs::write(path, bytes).map_err(|e| ldcf::Error::io(format!("cannot write {}", path.display()), e).into())
}

fn require_dir(path: &Path, what: &str) -> CliResult {
    if path.is_dir() {
        Ok(())
    } else {
        Err(usage(format!("{what} directory {} does not exist", path.display())))
    }
}

fn require_file(path: &Path, what: &str) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} file {} does not exist", path.display())))
    }
}

/// Applies `value` to `key` when `id` was given on the command line.
fn flag(cfg: &mut RunConfig, m: &ArgMatches, id: &str, key: &str, value: impl ToString) -> CliResult {
    if m.value_source(id) == Some(ValueSource::CommandLine) {
        cfg.set(key, &value.to_string())?;
    }
    Ok(())
}

fn apply_sets(cfg: &mut RunConfig, sets: &[String]) -> CliResult {
    for s in sets {
        let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn base_config(common: &Common, m: &ArgMatches) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &common.config {
        require_file(p, "config")?;
        cfg.apply_file(p)?;
    }
    flag(&mut cfg, m, "seed", "seed", common.seed)?;
    Ok(cfg)
}

fn channel_flags(cfg: &mut RunConfig, m: &ArgMatches, a: &ChannelArgs) -> CliResult {
    flag(cfg, m, "shrink", "channels.shrink", a.shrink)?;
    flag(cfg, m, "orientation_bins", "channels.orientation_bins", a.orientation_bins)
}

fn filter_flags(cfg: &mut RunConfig, m: &ArgMatches, a: &FilterArgs) -> CliResult {
    flag(cfg, m, "k", "filters.k", a.k)?;
    flag(cfg, m, "m", "filters.m", a.m)?;
    flag(cfg, m, "variant", "filters.variant", &a.variant)?;
    flag(cfg, m, "radius", "filters.autocorr_radius", a.radius)
}

fn detector_flags(cfg: &mut RunConfig, m: &ArgMatches, a: &DetectorArgs) -> CliResult {
    flag(cfg, m, "window_h", "detector.window_h", a.window_h)?;
    flag(cfg, m, "window_w", "detector.window_w", a.window_w)?;
    flag(cfg, m, "stride", "detector.stride", a.stride)?;
    flag(cfg, m, "scales_per_octave", "detector.scales_per_octave", a.scales_per_octave)?;
    flag(cfg, m, "threshold", "detector.threshold", a.threshold)?;
    flag(cfg, m, "nms_threshold", "detector.nms_threshold", a.nms_threshold)
}

fn cmd_filters(a: &FiltersArgs, m: &ArgMatches) -> CliResult {
    let mut cfg = base_config(&a.common, m)?;
    channel_flags(&mut cfg, m, &a.channels)?;
    filter_flags(&mut cfg, m, &a.filter)?;
    apply_sets(&mut cfg, &a.common.set)?;
    cfg.validate()?;
    require_dir(&a.corpus, "corpus")?;
    let paths = list_images(&a.corpus)?;
    if paths.is_empty() {
        return Err(ldcf::imgio::ImgIoError::EmptyDataset(a.corpus.clone()).into());
    }
    let stacks = paths
        .iter()
        .map(|p| Ok(compute_channels(&load_image(p)?, &cfg.channels)?))
        .collect::<Result<Vec<_>>>()?;
    info!("estimating autocorrelation on {} images", stacks.len());
    let ac = estimate_autocorr_fft(&stacks, cfg.autocorr_radius)?;
    if a.check {
        let brute = estimate_autocorr_brute(&stacks, cfg.autocorr_radius)?;
        println!("max_abs_deviation {:e}", ac.max_abs_diff(&brute));
    }
    let fb = derive_filters(&ac, &cfg.filters)?;
    write(&a.out, format_filterbank(&fb).as_bytes())?;
    if let Some(p) = &a.autocorr_out {
        write(p, format_autocorr(&ac).as_bytes())?;
    }
    println!("filters {} ({} channels x {} filters of {}x{})", a.out.display(), fb.channels.len(), fb.k, fb.m, fb.m);
    Ok(())
}

fn cmd_train(a: &TrainArgs, m: &ArgMatches) -> CliResult {
    let mut cfg = base_config(&a.common, m)?;
    channel_flags(&mut cfg, m, &a.channels)?;
    filter_flags(&mut cfg, m, &a.filter)?;
    detector_flags(&mut cfg, m, &a.detector)?;
    if a.acf {
        cfg.set("filters.enabled", "false")?;
    }
    flag(&mut cfg, m, "trees", "boost.num_trees", a.trees)?;
    flag(&mut cfg, m, "depth", "boost.max_depth", a.depth)?;
    flag(&mut cfg, m, "split", "boost.split_policy", &a.split)?;
    flag(&mut cfg, m, "update_period", "boost.update_period", &a.update_period)?;
    flag(&mut cfg, m, "epsilon", "boost.epsilon", a.epsilon)?;
    flag(&mut cfg, m, "bootstrap", "boost.bootstrap_schedule", &a.bootstrap)?;
    flag(&mut cfg, m, "negatives_cap", "boost.negatives_cap", a.negatives_cap)?;
    flag(&mut cfg, m, "initial_negatives", "train.initial_negatives", a.initial_negatives)?;
    flag(&mut cfg, m, "cascade", "boost.cascade", &a.cascade)?;
    apply_sets(&mut cfg, &a.common.set)?;
    cfg.validate()?;
    require_dir(&a.data, "dataset")?;
    let filters = match &a.filters {
        Some(p) if cfg.use_filters => {
            require_file(p, "filter bank")?;
            let text = String::from_utf8_lossy(&read(p)?).into_owned();
            Some(parse_filterbank(&text)?)
        }
        _ => None,
    };
    let index = scan_dataset(&a.data, &DatasetLayout::default())?;
    let data = TrainData::load(&index)?;
    info!("{} positive images, {} negative images", data.positives.len(), data.negatives.len());
    let rep = train_with(&data, &cfg.pipeline(), filters)?;
    write(&a.out, &rep.model.encode())?;
    let s = &rep.stats;
    println!(
        "model {} kind {} trees {} positives {} negatives {} harvested {:?}",
        a.out.display(),
        rep.model.kind(),
        rep.model.ensemble.len(),
        s.final_positives,
        s.final_negatives,
        s.harvested
    );
    Ok(())
}

fn load_model(path: &Path) -> CliResult<Model> {
    require_file(path, "model")?;
    Ok(Model::decode(&read(path)?)?)
}

fn image_paths(path: &Path) -> CliResult<Vec<PathBuf>> {
    if path.is_dir() {
        let v = list_images(path)?;
        if v.is_empty() {
            return Err(ldcf::imgio::ImgIoError::EmptyDataset(path.to_path_buf()).into());
        }
        Ok(v)
    } else if path.is_file() {
        Ok(vec![path.to_path_buf()])
    } else {
        Err(usage(format!("image path {} does not exist", path.display())))
    }
}

fn cmd_detect(a: &DetectArgs) -> CliResult {
    let mut model = load_model(&a.model)?;
    let mut cfg = RunConfig {
        detector: model.detector.clone(),
        ..RunConfig::default()
    };
    if let Some(p) = &a.config {
        require_file(p, "config")?;
        let text = String::from_utf8_lossy(&read(p)?).into_owned();
        let detector_lines: String = text.lines().filter(|l| l.trim_start().starts_with("detector.")).map(|l| format!("{l}\n")).collect();
        cfg.apply_text(&detector_lines)?;
    }
    if let Some(t) = a.threshold {
        cfg.detector.threshold = t;
    }
    if a.no_cascade {
        cfg.detector.use_cascade = false;
    }
    for s in &a.set {
        if !s.trim_start().starts_with("detector.") {
            return Err(usage(format!("detect only accepts detector.* overrides, got {s:?}")));
        }
    }
    apply_sets(&mut cfg, &a.set)?;
    cfg.detector.validate(model.cell())?;
    model.detector = cfg.detector;
    let paths = image_paths(&a.images)?;
    let mut out = String::new();
    for p in &paths {
        let dets = model.detect(&load_image(p)?)?;
        out.push_str(&format_detections(&p.display().to_string(), &dets));
    }
    write(&a.out, out.as_bytes())?;
    println!("detections {} images {}", a.out.display(), paths.len());
    Ok(())
}

fn same_image(record: &str, path: &Path) -> bool {
    let r = Path::new(record);
    if r == path {
        return true;
    }
    match (fs::canonicalize(r), fs::canonicalize(path)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn cmd_eval(a: &EvalArgs, m: &ArgMatches) -> CliResult {
    let mut cfg = base_config(&a.common, m)?;
    flag(&mut cfg, m, "iou", "eval.iou_threshold", a.iou)?;
    flag(&mut cfg, m, "min_height", "eval.min_height", a.min_height)?;
    apply_sets(&mut cfg, &a.common.set)?;
    cfg.eval.validate()?;
    require_dir(&a.data, "dataset")?;
    let layout = DatasetLayout::default();
    let index = scan_dataset(&a.data, &layout)?;
    let (curve, lamr) = match (&a.detections, &a.model) {
        (_, Some(mp)) => {
            let model = load_model(mp)?;
            let test = load_test_set(&index)?;
            let rep = evaluate_model(&model, &test, &cfg.eval)?;
            (rep.curve, rep.log_average_miss_rate)
        }
        (Some(dp), None) => {
            require_file(dp, "detections")?;
            let records = parse_detections(&String::from_utf8_lossy(&read(dp)?))?;
            let mut dets: Vec<Vec<ScoredBox>> = vec![Vec::new(); index.positives.len()];
            let mut unmatched = 0usize;
            for r in records {
                match index.positives.iter().position(|e| same_image(&r.image, &e.image)) {
                    Some(i) => dets[i].push(ScoredBox {
                        x: r.x,
                        y: r.y,
                        w: r.w,
                        h: r.h,
                        score: r.score,
                    }),
                    None => unmatched += 1,
                }
            }
            if unmatched > 0 {
                log::warn!("{unmatched} detections refer to images outside the dataset and were ignored");
            }
            let gts = index
                .positives
                .iter()
                .map(|e| Ok(ldcf::imgio::load_annotations(&e.annotation)?))
                .collect::<Result<Vec<Vec<GroundTruthBox>>>>()?;
            let curve = evaluate(&dets, &gts, &cfg.eval)?;
            let lamr = log_average_mr_with(&curve, &cfg.eval)?;
            (curve, lamr)
        }
        (None, None) => return Err(usage("eval needs --detections or --model")),
    };
    write(&a.out, curve.to_csv().as_bytes())?;
    println!("log_avg_mr {lamr}");
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> CliResult {
    let spec = SynthSpec {
        n_train: a.n_train,
        n_test: a.n_test,
        seeds: (0..a.seeds).collect(),
        ..SynthSpec::correlated(a.rho)
    };
    spec.validate()?;
    let report = match a.experiment.as_str() {
        "fig1" => run_fig1(&spec, &FIG1_GRID, &[SplitMethod::Orthogonal, SplitMethod::Oblique], a.epsilon)?,
        "fig2" => run_fig2(&spec, a.trees, a.depth, &Transform::ALL)?,
        other => return Err(usage(format!("unknown experiment {other:?}; expected fig1 or fig2"))),
    };
    write(&a.out, report.to_csv().as_bytes())?;
    print!("{}", report.to_table());
    Ok(())
}

fn cmd_inspect(a: &InspectArgs) -> CliResult {
    require_file(&a.file, "artifact")?;
    let bytes = read(&a.file)?;
    if bytes.starts_with(ENSEMBLE_MAGIC) {
        let ens = decode_ensemble(&bytes)?;
        if ens.metadata.contains_key("model.kind") {
            let model = Model::decode(&bytes)?;
            println!(
                "model kind {} cell {} window {}x{} trees {} dim {}",
                model.kind(),
                model.cell(),
                model.detector.window_w,
                model.detector.window_h,
                model.ensemble.len(),
                model.ensemble.dim
            );
        }
        if a.summary {
            for (k, v) in &ens.metadata {
                if k != "model.filterbank" {
                    println!("meta {k}={v}");
                }
            }
        } else {
            print!("{}", dump_ensemble(&ens));
        }
    } else if bytes.starts_with(STACK_MAGIC) {
        let stack = ldcf::channels::decode_stack(&bytes)?;
        println!("channels {} width {} height {} shrink {}", stack.num_channels(), stack.width(), stack.height(), stack.shrink());
        for (label, p) in stack.labels().iter().zip(stack.planes()) {
            let (lo, hi) = p.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            println!("{label} mean {} min {lo} max {hi}", p.mean());
        }
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        let img: Image = decode_pnm(&bytes)?;
        println!("image width {} height {} planes {}", img.width(), img.height(), img.planes());
    } else {
        let text = String::from_utf8_lossy(&bytes);
        let first = text.lines().next().unwrap_or("");
        if first.starts_with("ldcf-filterbank") {
            print!("{}", format_filterbank(&parse_filterbank(&text)?));
        } else if first.starts_with("ldcf-autocorr") {
            print!("{}", format_autocorr(&parse_autocorr(&text)?));
        } else if first.starts_with("ldcf-ensemble") {
            print!("{}", dump_ensemble(&ldcf::boost::parse_ensemble_dump(&text)?));
        } else {
            return Err(ldcf::imgio::ImgIoError::UnsupportedFormat(format!("{} is not a recognised artifact", a.file.display())).into());
        }
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> CliResult {
    let ds = generate(&SynthDataConfig::default(), a.seed);
    write_dataset(&ds, &a.out)?;
    write(&a.out.join("desk.cfg"), format!("seed = {}\n{DESK_CONFIG}", a.seed).as_bytes())?;
    println!(
        "dataset {} train {} positive + {} negative images, test {} images",
        a.out.display(),
        ds.train_positives.len(),
        ds.train_negatives.len(),
        ds.test.len()
    );
    Ok(())
}

fn run(cli: &Cli, matches: &ArgMatches) -> CliResult {
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand required");
    match &cli.command {
        Command::Filters(a) => cmd_filters(a, sub),
        Command::Train(a) => cmd_train(a, sub),
        Command::Detect(a) => cmd_detect(a),
        Command::Eval(a) => cmd_eval(a, sub),
        Command::Bench(a) => cmd_bench(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: cannot start {} worker threads: {e}", cli.jobs);
            return ExitCode::from(1);
        }
    }
    match run(&cli, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(match f.kind {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Internal => 1,
            })
        }
    }
}
