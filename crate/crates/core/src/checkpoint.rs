//! Checkpoint byte format.
//!
//! Layout (all integers little-endian u32, floats little-endian f32):
//!
//! ```text
//! magic   4 bytes      b"CSFN"
//! version u32          currently 1
//! config  7×u32 + f32  d_model, heads, layers, ffn_inner,
//!                      max_decode_len, max_positions, vocab_size, dropout
//! dims    3×u32        M, N, J of the schema the model was built for
//! vocab   per token    u32 byte length + UTF-8 bytes (vocab_size entries,
//!                      id order, specials first)
//! params  u32 count,   per parameter: u32 name length + UTF-8 name,
//!                      u32 rows, u32 cols
//! data    per param    rows·cols f32 values, header order
//! ```
//!
//! Values are stored in 32-bit; a load/save round trip is byte-identical.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::model::{CsfnModel, ModelConfig};
use crate::schema::SchemaGraph;
use crate::tensor::Tensor;
use crate::vocab::Vocabulary;

const MAGIC: &[u8; 4] = b"CSFN";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(model: &CsfnModel, vocab: &Vocabulary) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    let cfg = &model.cfg;
    for v in [
        cfg.d_model,
        cfg.heads,
        cfg.layers,
        cfg.ffn_inner,
        cfg.max_decode_len,
        cfg.max_positions,
        vocab.len(),
    ] {
        put_u32(&mut out, v as u32);
    }
    out.extend_from_slice(&(cfg.dropout as f32).to_le_bytes());
    for v in [
        model.schema.num_domains(),
        model.schema.num_slots(),
        model.schema.num_domain_slots(),
    ] {
        put_u32(&mut out, v as u32);
    }
    for token in vocab.tokens() {
        put_str(&mut out, token);
    }
    put_u32(&mut out, model.store.len() as u32);
    for (_, p) in model.store.iter() {
        put_str(&mut out, &p.name);
        put_u32(&mut out, p.value.rows() as u32);
        put_u32(&mut out, p.value.cols() as u32);
    }
    for (_, p) in model.store.iter() {
        for &v in p.value.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub struct CheckpointData {
    pub config: ModelConfig,
    pub dims: (usize, usize, usize),
    pub vocab_tokens: Vec<String>,
    pub params: Vec<(String, Tensor)>,
}

pub fn decode(bytes: &[u8]) -> Result<CheckpointData> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(CoreError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CoreError::Checkpoint(alloc::format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let d_model = r.u32()? as usize;
    let heads = r.u32()? as usize;
    let layers = r.u32()? as usize;
    let ffn_inner = r.u32()? as usize;
    let max_decode_len = r.u32()? as usize;
    let max_positions = r.u32()? as usize;
    let vocab_size = r.u32()? as usize;
    let dropout = f32::from_le_bytes(r.take(4)?.try_into().unwrap()) as f64;
    let dims = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);

    let mut vocab_tokens = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        vocab_tokens.push(r.string()?);
    }
    let n_params = r.u32()? as usize;
    let mut headers = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let name = r.string()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        headers.push((name, rows, cols));
    }
    let mut params = Vec::with_capacity(n_params);
    for (name, rows, cols) in headers {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let b = r.take(4)?;
            data.push(f32::from_le_bytes(b.try_into().unwrap()) as f64);
        }
        params.push((name, Tensor::from_vec(rows, cols, data)?));
    }
    if r.pos != bytes.len() {
        return Err(CoreError::Checkpoint(alloc::format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    let config = ModelConfig {
        d_model,
        heads,
        layers,
        ffn_inner,
        max_decode_len,
        max_positions,
        dropout,
    };
    Ok(CheckpointData {
        config,
        dims,
        vocab_tokens,
        params,
    })
}

/// Rebuild a model (and its vocabulary) from checkpoint bytes, verifying the
/// provided schema matches the stored dimensions and every parameter by name
/// and shape.
pub fn load_model(bytes: &[u8], schema: &SchemaGraph) -> Result<(CsfnModel, Vocabulary)> {
    let data = decode(bytes)?;
    let got = (
        schema.num_domains(),
        schema.num_slots(),
        schema.num_domain_slots(),
    );
    if got != data.dims {
        return Err(CoreError::Checkpoint(alloc::format!(
            "schema dims {got:?} do not match checkpoint {:?}",
            data.dims
        )));
    }
    let vocab = Vocabulary::from_ordered_tokens(data.vocab_tokens)?;
    let mut model = CsfnModel::new(data.config, schema, &vocab, 0)?;
    if data.params.len() != model.store.len() {
        return Err(CoreError::Checkpoint(alloc::format!(
            "{} parameters in checkpoint, model has {}",
            data.params.len(),
            model.store.len()
        )));
    }
    for (name, tensor) in data.params {
        let id = model
            .store
            .lookup(&name)
            .ok_or_else(|| CoreError::Checkpoint(alloc::format!("unknown parameter `{name}`")))?;
        let param = model.store.get_mut(id);
        if !param.value.same_shape(&tensor) {
            return Err(CoreError::Checkpoint(alloc::format!(
                "parameter `{name}` has shape {:?}, checkpoint holds {:?}",
                param.value.shape(),
                tensor.shape()
            )));
        }
        param.value = tensor;
    }
    Ok((model, vocab))
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(CoreError::Checkpoint("truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        core::str::from_utf8(bytes)
            .map(|s| s.into())
            .map_err(|_| CoreError::Checkpoint("invalid UTF-8 in header".into()))
    }
}
