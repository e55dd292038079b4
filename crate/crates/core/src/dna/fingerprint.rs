//! Fingerprint files: container magic `MDNAFPRT`, JSON header
//! `{formatVersion, modelId, assemblyMode, fragmentDim, count,
//! generatorVersionHash, sourceInputIndices}`, then the `count x fragmentDim`
//! fragment matrix as row-major little-endian `f32`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AssemblyMode, DnaFragment, ModelDna};
use crate::container::{self, FINGERPRINT_MAGIC};
use crate::error::{Error, Result};

pub const FINGERPRINT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Header {
    format_version: u32,
    model_id: String,
    assembly_mode: AssemblyMode,
    fragment_dim: usize,
    count: usize,
    generator_version_hash: String,
    source_input_indices: Vec<usize>,
}

pub(super) fn save(dna: &ModelDna, path: &Path) -> Result<()> {
    let dim = dna.fragment_dim();
    if dna.fragments.iter().any(|f| f.vector.len() != dim) {
        return Err(Error::InvalidData("fragments of unequal length".into()));
    }
    let header = Header {
        format_version: FINGERPRINT_FORMAT_VERSION,
        model_id: dna.model_id.clone(),
        assembly_mode: dna.assembly_mode,
        fragment_dim: dim,
        count: dna.len(),
        generator_version_hash: dna.generator_version_hash.clone(),
        source_input_indices: dna.fragments.iter().map(|f| f.source_input_index).collect(),
    };
    let payload: Vec<f32> = dna.fragments.iter().flat_map(|f| f.vector.iter().copied()).collect();
    container::write(path, FINGERPRINT_MAGIC, &header, &payload)
}

pub(super) fn load(path: &Path) -> Result<ModelDna> {
    let (header, values): (Header, Vec<f32>) =
        container::read(path, FINGERPRINT_MAGIC, FINGERPRINT_FORMAT_VERSION, |h: &Header| h.count * h.fragment_dim)?;
    if header.source_input_indices.len() != header.count {
        return Err(Error::Corrupt("index table length differs from fragment count".into()));
    }
    if header.fragment_dim == 0 && header.count > 0 {
        return Err(Error::Corrupt("zero-width fragments".into()));
    }
    let dim = header.fragment_dim.max(1);
    let fragments = values
        .chunks(dim)
        .take(header.count)
        .zip(&header.source_input_indices)
        .map(|(chunk, &idx)| DnaFragment {
            vector: chunk[..header.fragment_dim].to_vec(),
            source_input_index: idx,
            model_id: header.model_id.clone(),
            assembly_mode: header.assembly_mode,
        })
        .collect();
    Ok(ModelDna {
        fragments,
        model_id: header.model_id,
        assembly_mode: header.assembly_mode,
        generator_version_hash: header.generator_version_hash,
    })
}
