//! Model DNA generation and model provenance identification.
//!
//! Given a source model and its training data, a generator network and a
//! provenance classifier are trained against a pool of models that were
//! either fine-tuned from the source (homologous) or trained from scratch
//! (non-homologous). The trained pair then decides whether an unseen target
//! model descends from the source.
//!
//! Modules, bottom-up:
//!
//! - [`nn`]: small layered networks with manual backpropagation and Adam.
//! - [`tasks`]: synthetic datasets, disjoint class splits, the model pool.
//! - [`dna`]: fragment assembly, cosine similarity, fingerprint files.
//! - [`mgmp`]: similarity/BCE losses, joint training, prediction, evaluation.
//! - [`diagnostics`]: parameter-distance baseline and layer-replacement probes.

mod container;
pub mod diagnostics;
pub mod dna;
mod error;
pub mod mgmp;
pub mod nn;
pub mod seed;
pub mod tasks;

pub use error::{Error, Result};

/// SHA-256 (hex) of a byte slice.
pub fn content_hash(bytes: &[u8]) -> String {
    container::hash_bytes(bytes)
}
