//! End-to-end segmentation on a small synthetic corpus: offline training
//! must separate the six parts well enough to segment held-out objects.

use std::collections::BTreeSet;

use partseg_core::descriptors::DescriptorConfig;
use partseg_core::localhdp::{HdpHyperparams, PartRegistry, PartScorer};
use partseg_core::protocol::{offline_train, part_miou, prepare_dataset};
use partseg_core::synthetic::generate_dataset;

fn descriptor_config() -> DescriptorConfig {
    DescriptorConfig {
        voxel_leaf: 0.09,
        count_scale: 5.0,
        ..DescriptorConfig::default()
    }
}

fn hyper() -> HdpHyperparams {
    HdpHyperparams {
        max_topics: 12,
        max_tables: 6,
        ..HdpHyperparams::default()
    }
}

#[test]
fn offline_training_segments_held_out_objects() {
    let dataset = generate_dataset(12, 900, 42);
    let config = descriptor_config();
    let prepared = prepare_dataset(&dataset, &config).unwrap();

    // Train on two thirds of each category, hold out the rest.
    let (train, test): (Vec<_>, Vec<_>) = prepared
        .iter()
        .enumerate()
        .partition(|(i, _)| i % 3 != 2);
    let train: Vec<_> = train.into_iter().map(|(_, o)| o.clone()).collect();

    let mut registry = PartRegistry::new(hyper(), config.full_vocabulary_size()).unwrap();
    let epoch_bounds = offline_train(&mut registry, &train, 2, 7).unwrap();
    assert_eq!(registry.len(), 6);
    // Per-epoch mean bound must not collapse over passes.
    assert!(
        epoch_bounds[1] >= epoch_bounds[0] - 1e-3 * epoch_bounds[0].abs(),
        "epoch bound regressed: {epoch_bounds:?}"
    );

    let parts: BTreeSet<String> = registry.labels().map(|s| s.to_string()).collect();
    let scorer = PartScorer::new(&registry).unwrap();
    let mut all_pred = Vec::new();
    let mut all_gt = Vec::new();
    for (_, object) in &test {
        for (doc, gt) in object.documents.iter().zip(&object.part_names) {
            all_pred.push(scorer.predict(doc).unwrap().label);
            all_gt.push(gt.clone());
        }
    }
    let miou = part_miou(&all_pred, &all_gt, &parts).unwrap();
    assert!(miou >= 0.8, "pooled mIoU too low: {miou:.3}");
}

#[test]
fn trained_registry_survives_checkpointing() {
    let dataset = generate_dataset(3, 700, 11);
    let config = descriptor_config();
    let prepared = prepare_dataset(&dataset, &config).unwrap();
    let mut registry = PartRegistry::new(hyper(), config.full_vocabulary_size()).unwrap();
    offline_train(&mut registry, &prepared, 1, 3).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    partseg_core::localhdp::save_checkpoint(&registry, &path).unwrap();
    let loaded = partseg_core::localhdp::load_checkpoint(&path).unwrap();

    let scorer = PartScorer::new(&registry).unwrap();
    let loaded_scorer = PartScorer::new(&loaded).unwrap();
    for object in &prepared {
        for doc in &object.documents {
            let a = scorer.predict(doc).unwrap();
            let b = loaded_scorer.predict(doc).unwrap();
            assert_eq!(a.label, b.label);
            assert_eq!(a.scores, b.scores);
        }
    }
}
