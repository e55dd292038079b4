//! A small trained source and pool shared by the integration tests.

#![allow(dead_code)]

use modeldna::nn::{ArchDescriptor, Checkpoint, TrainConfig};
use modeldna::tasks::{
    build_pool, make_synthetic_blobs, partition_classes, train_source, LabeledDataset, PoolConfig, RelationCounts, TrainedPool,
};

pub struct Fixture {
    pub source_data: LabeledDataset,
    pub pool_tasks: Vec<LabeledDataset>,
    pub eval_tasks: Vec<LabeledDataset>,
    pub source: Checkpoint,
    pub pool: TrainedPool,
}

pub fn schedule(lr: f64, epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        epochs,
        batch_size: 16,
        ..TrainConfig::default()
    }
}

/// Four-class source task, two pool tasks and one evaluation task.
pub fn fixture(seed: u64) -> Fixture {
    let parent = make_synthetic_blobs(16, 30, 8, 0.5, seed).unwrap();
    let (_, mut tasks) = partition_classes(&parent, &[4, 4, 4, 4], seed + 1).unwrap();
    let eval_tasks = tasks.split_off(3);
    let pool_tasks = tasks.split_off(1);
    let source_data = tasks.pop().unwrap();
    let arch = ArchDescriptor::mlp_classifier(8, &[16], 4).unwrap();
    let source = train_source("source", &source_data, &arch, &schedule(0.01, 30).with_seed(seed)).unwrap();
    let cfg = PoolConfig { seed, ..fixture_config() };
    let pool = build_pool(&source, &pool_tasks, &eval_tasks, &cfg).unwrap();
    Fixture {
        source_data,
        pool_tasks,
        eval_tasks,
        source,
        pool,
    }
}

pub fn fixture_config() -> PoolConfig {
    PoolConfig {
        finetune: schedule(0.003, 8),
        scratch: schedule(0.01, 30),
        pool_counts: RelationCounts::default(),
        eval_counts: RelationCounts::default(),
        seed: 0,
    }
}
