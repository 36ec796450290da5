//! Dataset cache container.
//!
//! Layout (integers little-endian `u32`):
//!
//! ```text
//! "IPDS"                       magic
//! version                      currently 1
//! len, bytes                   dataset name (UTF-8)
//! class_count, n, c, h, w
//! n × u32                      labels
//! n·c·h·w × f32 LE             pixels, row-major
//! ```

use std::fs;
use std::path::Path;

use ipkp_nn::Tensor;

use crate::dataset::LabeledDataset;
use crate::error::{io_err, DataError, Result};

pub const CACHE_MAGIC: [u8; 4] = *b"IPDS";
pub const CACHE_VERSION: u32 = 1;

pub fn encode_dataset(ds: &LabeledDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + ds.name.len() + ds.len() * 4 + ds.images().len() * 4);
    out.extend_from_slice(&CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.name.len() as u32).to_le_bytes());
    out.extend_from_slice(ds.name.as_bytes());
    let [c, h, w] = ds.image_shape();
    for v in [ds.class_count(), ds.len(), c, h, w] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &l in ds.labels() {
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    for v in ds.images().data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            DataError::Cache(format!("truncated at byte {} (need {n} more)", self.at))
        })?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<LabeledDataset> {
    let mut cur = Cursor { bytes, at: 0 };
    if cur.take(4)? != CACHE_MAGIC {
        return Err(DataError::Cache("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != CACHE_VERSION {
        return Err(DataError::Cache(format!("unsupported version {version}")));
    }
    let name_len = cur.u32()? as usize;
    let name = String::from_utf8(cur.take(name_len)?.to_vec()).map_err(|_| DataError::Cache("name is not UTF-8".into()))?;
    let classes = cur.u32()? as usize;
    let n = cur.u32()? as usize;
    let (c, h, w) = (cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize);
    let labels = cur.take(n * 4)?.chunks_exact(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize).collect();
    let pixels = cur
        .take(n * c * h * w * 4)?
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    if cur.at != bytes.len() {
        return Err(DataError::Cache(format!("{} trailing bytes", bytes.len() - cur.at)));
    }
    let images = Tensor::from_vec(&[n, c, h, w], pixels).map_err(|e| DataError::Cache(e.to_string()))?;
    LabeledDataset::new(name, images, labels, classes)
}

pub fn save_dataset(ds: &LabeledDataset, path: &Path) -> Result<()> {
    fs::write(path, encode_dataset(ds)).map_err(io_err(path))
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    decode_dataset(&fs::read(path).map_err(io_err(path))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let images = Tensor::from_vec(&[2, 1, 2, 1], vec![0.0, 0.25, 1.0, 0.125]).unwrap();
        let ds = LabeledDataset::new("tiny", images, vec![1, 0], 2).unwrap();
        let bytes = encode_dataset(&ds);
        assert_eq!(&bytes[..4], b"IPDS");
        assert_eq!(decode_dataset(&bytes).unwrap(), ds);
        assert!(decode_dataset(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(decode_dataset(&bad).is_err());
    }
}
