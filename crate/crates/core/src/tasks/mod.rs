//! Datasets, disjoint class splits, and the pool of homologous and
//! non-homologous target models.

mod dataset;
mod pool;
mod split;

pub use dataset::{make_synthetic_blobs, LabeledDataset};
pub use pool::{
    build_pool, train_homologous, train_non_homologous, train_source, ModelPool, PoolConfig, PoolEntry, Relation,
    RelationCounts, SplitRole, TrainedPool,
};
pub use split::{partition_classes, TaskSplit};
