//! `DYNC1` binary checkpoints.
//!
//! Layout: the five magic bytes `DYNC1`, a little-endian `u32` block count,
//! then per block a little-endian `u64` element count followed by that many
//! little-endian `f64` values. Blocks are the encoder parameters in layer
//! order (weight, bias), then `mu_noisy`, then `mu_clean`.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{ClusterModel, EncoderConfig};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const MAGIC: &[u8; 5] = b"DYNC1";

/// JSON sidecar written next to a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub config: EncoderConfig,
    pub selected_epoch: usize,
}

fn blocks(model: &ClusterModel) -> Vec<&Tensor> {
    let mut b = model.encoder.params();
    b.push(&model.mu_noisy);
    b.push(&model.mu_clean);
    b
}

pub fn write_checkpoint(model: &ClusterModel, out: &mut impl Write) -> Result<()> {
    let blocks = blocks(model);
    out.write_all(MAGIC)?;
    out.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for t in blocks {
        out.write_all(&(t.len() as u64).to_le_bytes())?;
        for v in t.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(cfg: &EncoderConfig, input: &mut impl Read) -> Result<ClusterModel> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let mut u32_buf = [0u8; 4];
    input.read_exact(&mut u32_buf)?;
    let count = u32::from_le_bytes(u32_buf) as usize;

    // The architecture comes from the config; the values from the file.
    let mut model = ClusterModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(0));
    let mut targets = model.params_mut();
    if targets.len() != count {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {count} blocks, config expects {}",
            targets.len()
        )));
    }
    let mut u64_buf = [0u8; 8];
    for (b, t) in targets.iter_mut().enumerate() {
        input.read_exact(&mut u64_buf)?;
        let n = u64::from_le_bytes(u64_buf) as usize;
        if n != t.len() {
            return Err(Error::Checkpoint(format!(
                "block {b} holds {n} values, config expects {}",
                t.len()
            )));
        }
        for v in t.data_mut() {
            input.read_exact(&mut u64_buf)?;
            *v = f64::from_le_bytes(u64_buf);
            if !v.is_finite() {
                return Err(Error::Checkpoint(format!("non-finite value in block {b}")));
            }
        }
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint("trailing bytes after last block".into()));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &ClusterModel, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(model, &mut buf)?;
    std::fs::write(path, buf)?;
    std::fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(meta)? + "\n",
    )?;
    Ok(())
}

/// Loads a checkpoint using the config in its JSON sidecar.
pub fn load_checkpoint(path: &Path) -> Result<(ClusterModel, CheckpointMeta)> {
    let meta: CheckpointMeta = serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
    let mut file = std::fs::File::open(path)?;
    let model = read_checkpoint(&meta.config, &mut file)?;
    Ok((model, meta))
}
