//! End-to-end runs on the generated planted-pattern dataset.

use ldcf::eval::{iou, EvalConfig};
use ldcf::imgio::{scan_dataset, DatasetLayout};
use ldcf::pipeline::{evaluate_model, load_test_set, train, Model, TrainData};
use ldcf::synthdata::{desk_config, generate, write_dataset, SynthDataConfig, SynthDataset};

fn small() -> SynthDataset {
    generate(
        &SynthDataConfig {
            train_positives: 60,
            train_negatives: 30,
            test_images: 40,
            max_objects: 1,
            ..SynthDataConfig::default()
        },
        3,
    )
}

fn quick_config(use_filters: bool) -> ldcf::config::RunConfig {
    let mut cfg = desk_config();
    cfg.boost.num_trees = 64;
    cfg.boost.bootstrap_schedule = vec![16];
    cfg.initial_negatives = 600;
    cfg.use_filters = use_filters;
    cfg
}

fn data(ds: &SynthDataset) -> TrainData {
    TrainData {
        positives: ds.train_positives.clone(),
        negatives: ds.train_negatives.clone(),
    }
}

#[test]
fn top_detection_finds_the_planted_object() {
    let ds = small();
    for use_filters in [false, true] {
        let model = train(&data(&ds), &quick_config(use_filters).pipeline()).unwrap().model;
        let mut hits = 0;
        let mut single = 0;
        for (img, gts) in &ds.test {
            if gts.len() != 1 {
                continue;
            }
            single += 1;
            let dets = model.detect(img).unwrap();
            let g = gts[0];
            if let Some(d) = dets.first() {
                if iou((d.x, d.y, d.w, d.h), (g.x, g.y, g.w, g.h)) >= 0.5 {
                    hits += 1;
                }
            }
        }
        assert!(single > 0);
        // chance level for a single window among hundreds is near zero
        assert!(hits * 2 > single, "filters={use_filters}: {hits}/{single} top detections on target");
    }
}

#[test]
fn saved_model_and_dataset_reproduce_in_memory_results() {
    let ds = small();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&ds, dir.path()).unwrap();
    let layout = DatasetLayout::default();
    let loaded = TrainData::load(&scan_dataset(&dir.path().join("train"), &layout).unwrap()).unwrap();
    assert_eq!(loaded.positives, ds.train_positives);
    assert_eq!(loaded.negatives, ds.train_negatives);
    let test = load_test_set(&scan_dataset(&dir.path().join("test"), &layout).unwrap()).unwrap();
    assert_eq!(test, ds.test);

    let model = train(&loaded, &quick_config(true).pipeline()).unwrap().model;
    let path = dir.path().join("model.bin");
    std::fs::write(&path, model.encode()).unwrap();
    let back = Model::decode(&std::fs::read(&path).unwrap()).unwrap();
    let a = evaluate_model(&model, &test, &EvalConfig::default()).unwrap();
    let b = evaluate_model(&back, &test, &EvalConfig::default()).unwrap();
    assert_eq!(a.detections, b.detections);
    assert_eq!(a.log_average_miss_rate, b.log_average_miss_rate);
    assert!(a.log_average_miss_rate.is_finite() && (0.0..=1.0).contains(&a.log_average_miss_rate));
}
