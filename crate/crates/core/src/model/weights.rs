//! Flat little-endian weight file.
//!
//! Layout: magic `PGMOE1`, then `d_model, d_ff, num_blocks, E, top_k,
//! activation_level` as `i32`, then every matrix row-major as `f32`, block by
//! block in the order gate, pre-gate, experts (`W1`, `W2`), dense. Gates are
//! present exactly where the wiring for `activation_level` puts them.

use std::io::{Read, Write};

use super::config::ModelConfig;
use super::params::{BlockParams, ExpertParams, ModelParams};
use super::tensor::Matrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"PGMOE1";

pub fn write_weights<W: Write>(model: &ModelParams, mut w: W) -> Result<()> {
    let c = &model.config;
    w.write_all(MAGIC)?;
    for v in [c.d_model, c.d_ff, c.num_blocks, c.num_experts, c.top_k, c.activation_level] {
        let v = i32::try_from(v).map_err(|_| Error::Format(format!("dimension {v} does not fit in i32")))?;
        w.write_all(&v.to_le_bytes())?;
    }
    let mut put = |m: &Matrix| -> Result<()> {
        for v in m.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    for (b, block) in model.blocks.iter().enumerate() {
        if block.gate.is_some() != c.has_conventional_gate(b) || block.pre_gate.is_some() != c.has_pre_gate(b) {
            return Err(Error::Wiring(format!("block {b} gates do not match activation level")));
        }
        for g in block.gate.iter().chain(&block.pre_gate) {
            put(g)?;
        }
        for e in &block.experts {
            put(&e.w1)?;
            put(&e.w2)?;
        }
        put(&block.dense)?;
    }
    Ok(())
}

/// Reads a weight file. `dtype_bytes` defaults to 4 and `seed` to 0; neither
/// is stored.
pub fn read_weights<R: Read>(mut r: R) -> Result<ModelParams> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut dims = [0usize; 6];
    for d in &mut dims {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf)?;
        *d = usize::try_from(i32::from_le_bytes(buf)).map_err(|_| Error::Format("negative dimension".into()))?;
    }
    let [d_model, d_ff, num_blocks, e, top_k, level] = dims;
    let config = ModelConfig::new(d_model, d_ff, num_blocks, e, top_k, level)?;

    let mut take = |rows: usize, cols: usize| -> Result<Matrix> {
        let mut bytes = vec![0u8; rows * cols * 4];
        r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated matrix data".into()))?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Matrix::from_vec(rows, cols, data)
    };
    let mut blocks = Vec::with_capacity(num_blocks);
    for b in 0..num_blocks {
        let gate = config.has_conventional_gate(b).then(|| take(d_model, e)).transpose()?;
        let pre_gate = config.has_pre_gate(b).then(|| take(d_model, e)).transpose()?;
        let experts = (0..e)
            .map(|_| Ok(ExpertParams { w1: take(d_ff, d_model)?, w2: take(d_model, d_ff)? }))
            .collect::<Result<_>>()?;
        let dense = take(d_model, d_model)?;
        blocks.push(BlockParams { gate, pre_gate, experts, dense });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after the last block".into()));
    }
    let model = ModelParams { config, blocks };
    if !model.is_finite() {
        return Err(Error::Format("non-finite weight".into()));
    }
    Ok(model)
}
