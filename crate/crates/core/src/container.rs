//! Binary container shared by checkpoints and fingerprints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes      b"MDNACKPT" (checkpoint) or b"MDNAFPRT" (fingerprint)
//! header_len   u64          length in bytes of the JSON header
//! header       header_len   UTF-8 JSON metadata document
//! payload      4 * n        raw f32 values, n declared by the header
//! ```
//!
//! The reader rejects a payload whose length differs from the declared count.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) const CHECKPOINT_MAGIC: &[u8; 8] = b"MDNACKPT";
pub(crate) const FINGERPRINT_MAGIC: &[u8; 8] = b"MDNAFPRT";

/// Minimal peek used to check the version before decoding the full header.
#[derive(serde::Deserialize)]
struct VersionProbe {
    #[serde(rename = "formatVersion")]
    format_version: u32,
}

pub(crate) fn write<H: Serialize>(path: &Path, magic: &[u8; 8], header: &H, payload: &[f32]) -> Result<()> {
    let bytes = encode(magic, header, payload)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub(crate) fn encode<H: Serialize>(magic: &[u8; 8], header: &H, payload: &[f32]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(16 + json.len() + payload.len() * 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a container. `expected_values` maps the parsed header to the number
/// of f32 values the payload must hold.
pub(crate) fn read<H, F>(path: &Path, magic: &[u8; 8], supported: u32, expected_values: F) -> Result<(H, Vec<f32>)>
where
    H: DeserializeOwned,
    F: FnOnce(&H) -> usize,
{
    let bytes = fs::read(path)?;
    decode(&bytes, magic, supported, expected_values)
}

pub(crate) fn decode<H, F>(bytes: &[u8], magic: &[u8; 8], supported: u32, expected_values: F) -> Result<(H, Vec<f32>)>
where
    H: DeserializeOwned,
    F: FnOnce(&H) -> usize,
{
    if bytes.len() < 16 {
        return Err(Error::Corrupt(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..8] != magic {
        return Err(Error::Corrupt("bad magic bytes".into()));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8-byte slice"));
    let header_end = 16usize
        .checked_add(usize::try_from(header_len).map_err(|_| Error::Corrupt("header length overflow".into()))?)
        .ok_or_else(|| Error::Corrupt("header length overflow".into()))?;
    if header_end > bytes.len() {
        return Err(Error::Corrupt(format!(
            "header length {header_len} exceeds file size {}",
            bytes.len()
        )));
    }
    let header_bytes = &bytes[16..header_end];
    let probe: VersionProbe =
        serde_json::from_slice(header_bytes).map_err(|e| Error::Corrupt(format!("header: {e}")))?;
    if probe.format_version != supported {
        return Err(Error::UnsupportedVersion {
            found: probe.format_version,
            supported,
        });
    }
    let header: H = serde_json::from_slice(header_bytes).map_err(|e| Error::Corrupt(format!("header: {e}")))?;
    let payload = &bytes[header_end..];
    let expected = expected_values(&header);
    if payload.len() != expected * 4 {
        return Err(Error::Corrupt(format!(
            "payload holds {} bytes, header declares {} f32 values ({} bytes)",
            payload.len(),
            expected,
            expected * 4
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    Ok((header, values))
}

pub(crate) fn hash_bytes(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
