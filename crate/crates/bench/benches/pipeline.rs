//! Benchmarks for the descriptor stage, document inference and prediction.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use partseg_core::descriptors::{point_documents, DescriptorConfig};
use partseg_core::localhdp::{
    infer_document, update_minibatch, HdpHyperparams, PartRegistry, PartScorer,
};
use partseg_core::protocol::{offline_train, prepare_dataset};
use partseg_core::synthetic::{generate_dataset, sample_object, Category};

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

fn bench_descriptors(c: &mut Criterion) {
    let cloud = sample_object(Category::Mug, 1200, 7);
    let config = descriptor_config();
    c.bench_function("point_documents/mug_1200", |b| {
        b.iter(|| point_documents(black_box(&cloud), black_box(&config)).unwrap())
    });
}

fn trained_registry() -> (PartRegistry, Vec<partseg_core::descriptors::PointDocument>) {
    let dataset = generate_dataset(4, 900, 3);
    let config = descriptor_config();
    let prepared = prepare_dataset(&dataset, &config).unwrap();
    let mut registry = PartRegistry::new(hyper(), config.full_vocabulary_size()).unwrap();
    offline_train(&mut registry, &prepared, 1, 5).unwrap();
    let docs = prepared[0].documents.clone();
    (registry, docs)
}

fn bench_inference(c: &mut Criterion) {
    let (registry, docs) = trained_registry();
    let model = registry.models().next().unwrap();
    let hyper = registry.hyper();
    c.bench_function("infer_document/keypoint", |b| {
        b.iter(|| {
            infer_document(
                black_box(model),
                hyper,
                registry.vocab(),
                black_box(&docs[0]),
                30,
                0.05,
            )
            .unwrap()
        })
    });

    c.bench_function("update_minibatch/16_docs", |b| {
        let batch: Vec<_> = docs.iter().take(16).cloned().collect();
        b.iter_batched(
            || registry.models().next().unwrap().clone(),
            |mut model| update_minibatch(&mut model, hyper, registry.vocab(), &batch).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_prediction(c: &mut Criterion) {
    let (registry, docs) = trained_registry();
    c.bench_function("scorer_predict/6_parts", |b| {
        let scorer = PartScorer::new(&registry).unwrap();
        b.iter(|| scorer.predict(black_box(&docs[0])).unwrap())
    });
    c.bench_function("part_scorer_build/6_parts", |b| {
        b.iter(|| PartScorer::new(black_box(&registry)).unwrap())
    });
}

criterion_group!(benches, bench_descriptors, bench_inference, bench_prediction);
criterion_main!(benches);
