//! Binary checkpoints.
//!
//! Layout: the 8 magic bytes `GADCKPT1`, a little-endian `u64` byte length,
//! that many bytes of UTF-8 JSON metadata, then every segment listed in the
//! metadata as little-endian `f64`s, in metadata order.

use gad_core::rng::RngState;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 8] = b"GADCKPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerInfo {
    pub lr: f64,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub label: String,
    pub step: usize,
    pub phase: String,
    pub segments: Vec<SegmentInfo>,
    pub gen_opt: OptimizerInfo,
    pub disc_opt: OptimizerInfo,
    pub rng: RngState,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    /// One value vector per entry of `meta.segments`.
    pub data: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.meta.segments.iter().position(|s| s.name == name).map(|i| self.data[i].as_slice())
    }

    pub fn total_len(&self) -> usize {
        self.meta.segments.iter().map(|s| s.len).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.meta).expect("metadata serializes");
        let mut out = Vec::with_capacity(16 + meta.len() + 8 * self.total_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        for seg in &self.data {
            for v in seg {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(HarnessError::Integrity(format!("file too short ({} bytes)", bytes.len())));
        }
        if &bytes[..8] != MAGIC {
            if &bytes[..7] == b"GADCKPT" {
                return Err(HarnessError::Version {
                    found: String::from_utf8_lossy(&bytes[..8]).into_owned(),
                    expected: String::from_utf8_lossy(MAGIC).into_owned(),
                });
            }
            return Err(HarnessError::Integrity("bad magic bytes".into()));
        }
        let meta_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() < meta_len {
            return Err(HarnessError::Integrity("metadata truncated".into()));
        }
        let meta: CheckpointMeta =
            serde_json::from_slice(&body[..meta_len]).map_err(|e| HarnessError::Integrity(format!("metadata: {e}")))?;
        if meta.version != FORMAT_VERSION {
            return Err(HarnessError::Version {
                found: meta.version.to_string(),
                expected: FORMAT_VERSION.to_string(),
            });
        }
        let blob = &body[meta_len..];
        let total: usize = meta.segments.iter().map(|s| s.len).sum();
        if blob.len() != 8 * total {
            return Err(HarnessError::Integrity(format!(
                "expected {} parameter bytes, found {}",
                8 * total,
                blob.len()
            )));
        }
        let mut data = Vec::with_capacity(meta.segments.len());
        let mut off = 0;
        for s in &meta.segments {
            let vals =
                blob[off..off + 8 * s.len].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            off += 8 * s.len;
            data.push(vals);
        }
        Ok(Self { meta, data })
    }
}
