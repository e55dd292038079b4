//! Small layered networks: construction, training, persistence, and
//! layer-level surgery.

mod arch;
mod checkpoint;
mod model;
mod train;

pub use arch::{ArchDescriptor, LayerSpec, DEFAULT_DROPOUT};
pub use checkpoint::{Checkpoint, Lineage, Metrics, CHECKPOINT_FORMAT_VERSION};
pub use model::{replace_last_layers, LayeredModel, Mode, Tape};
pub use train::{accuracy, cross_entropy, cross_entropy_grad, train, Adam, TrainConfig};

pub(crate) use model::rows;
