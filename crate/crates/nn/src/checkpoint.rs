//! Model checkpoint container.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! "IPKP"                       magic
//! version                      currently 1
//! len, bytes                   architecture descriptor (UTF-8)
//! len, bytes                   free-form tag (scheme name, config hash)
//! count                        number of parameterized layers
//! count × {
//!     layer index
//!     len, len × f32 LE        weight, row-major
//!     len, len × f32 LE        bias
//! }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{NnError, Result};
use crate::layer::Params;
use crate::model::LayeredModel;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"IPKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: LayeredModel<f32>,
    pub tag: String,
}

pub fn write_checkpoint<W: Write>(mut w: W, model: &LayeredModel<f32>, tag: &str) -> Result<()> {
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    write_str(&mut w, &model.descriptor())?;
    write_str(&mut w, tag)?;
    w.write_all(&(model.num_param_layers() as u32).to_le_bytes())?;
    for (p, params) in model.param_layers().enumerate() {
        w.write_all(&(model.param_layer_indices()[p] as u32).to_le_bytes())?;
        write_floats(&mut w, params.weight.data())?;
        write_floats(&mut w, params.bias.data())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let descriptor = read_str(&mut r)?;
    let tag = read_str(&mut r)?;
    let mut model = LayeredModel::<f32>::from_descriptor(&descriptor)?;
    let count = read_u32(&mut r)? as usize;
    if count != model.num_param_layers() {
        return Err(NnError::Checkpoint(format!(
            "{count} parameter blobs for {} parameterized layers",
            model.num_param_layers()
        )));
    }
    for p in 0..count {
        let index = read_u32(&mut r)? as usize;
        if index != model.param_layer_indices()[p] {
            return Err(NnError::Checkpoint(format!("blob {p} belongs to layer {index}")));
        }
        let current = model.param_layer(p);
        let (ws, bs) = (current.weight.shape().to_vec(), current.bias.shape().to_vec());
        let weight = Tensor::from_vec(&ws, read_floats(&mut r)?)
            .map_err(|e| NnError::Checkpoint(format!("layer {index} weight: {e}")))?;
        let bias = Tensor::from_vec(&bs, read_floats(&mut r)?)
            .map_err(|e| NnError::Checkpoint(format!("layer {index} bias: {e}")))?;
        model.set_param_layer(p, Params { weight, bias })?;
    }
    Ok(Checkpoint { model, tag })
}

pub fn save_checkpoint(path: &Path, model: &LayeredModel<f32>, tag: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, model, tag)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

/// Loads a checkpoint and checks it against an expected architecture.
pub fn load_checkpoint_for(path: &Path, expected: &LayeredModel<f32>) -> Result<Checkpoint> {
    let ck = load_checkpoint(path)?;
    if ck.model.descriptor() != expected.descriptor() {
        return Err(NnError::ArchitectureMismatch {
            expected: expected.descriptor(),
            found: ck.model.descriptor(),
        });
    }
    Ok(ck)
}

fn truncated(e: std::io::Error) -> NnError {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        NnError::Checkpoint("truncated file".into())
    } else {
        NnError::Io(e)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(NnError::Checkpoint(format!("string length {len} is implausible")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(truncated)?;
    String::from_utf8(buf).map_err(|_| NnError::Checkpoint("string is not UTF-8".into()))
}

fn write_floats<W: Write>(w: &mut W, data: &[f32]) -> Result<()> {
    w.write_all(&(data.len() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(data.len() * 4);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_floats<R: Read>(r: &mut R) -> Result<Vec<f32>> {
    let len = read_u32(r)? as usize;
    if len > 1 << 28 {
        return Err(NnError::Checkpoint(format!("blob length {len} is implausible")));
    }
    let mut buf = vec![0u8; len * 4];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
