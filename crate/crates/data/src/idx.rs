//! IDX container (big-endian header, unsigned-byte payload).

use std::fs;
use std::path::Path;

use ipkp_nn::Tensor;

use crate::dataset::LabeledDataset;
use crate::error::{io_err, DataError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn check_len(path: &Path, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() < expected {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(DataError::Invalid(format!(
            "{}: {} trailing bytes after the payload",
            path.display(),
            bytes.len() - expected
        )));
    }
    Ok(())
}

fn check_magic(path: &Path, bytes: &[u8], expected: u32) -> Result<()> {
    if bytes.len() < 4 {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            expected: 4,
            found: bytes.len(),
        });
    }
    let found = be_u32(bytes, 0);
    if found != expected {
        return Err(DataError::BadMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Parses an image file into `[N, 1, rows, cols]` with pixels scaled by 1/255.
pub fn parse_idx_images(path: &Path, bytes: &[u8]) -> Result<Tensor<f32>> {
    check_magic(path, bytes, IMAGES_MAGIC)?;
    if bytes.len() < 16 {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            expected: 16,
            found: bytes.len(),
        });
    }
    let (n, rows, cols) = (be_u32(bytes, 4) as usize, be_u32(bytes, 8) as usize, be_u32(bytes, 12) as usize);
    check_len(path, bytes, 16 + n * rows * cols)?;
    if n == 0 || rows == 0 || cols == 0 {
        return Err(DataError::Invalid(format!("{}: empty image file", path.display())));
    }
    let data = bytes[16..].iter().map(|&b| b as f32 / 255.0).collect();
    Ok(Tensor::from_vec(&[n, 1, rows, cols], data).expect("header-derived shape"))
}

pub fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<usize>> {
    check_magic(path, bytes, LABELS_MAGIC)?;
    if bytes.len() < 8 {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            expected: 8,
            found: bytes.len(),
        });
    }
    let n = be_u32(bytes, 4) as usize;
    check_len(path, bytes, 8 + n)?;
    Ok(bytes[8..].iter().map(|&b| b as usize).collect())
}

/// Loads an image/label IDX pair; the class count is `max(label) + 1`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let images = parse_idx_images(images_path, &fs::read(images_path).map_err(io_err(images_path))?)?;
    let labels = parse_idx_labels(labels_path, &fs::read(labels_path).map_err(io_err(labels_path))?)?;
    if images.shape()[0] != labels.len() {
        return Err(DataError::CountMismatch {
            images: images.shape()[0],
            labels: labels.len(),
        });
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let name = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    LabeledDataset::new(name, images, labels, classes)
}

/// Encodes single-channel images as an IDX image file, pixel = round(255·v).
pub fn encode_idx_images(ds: &LabeledDataset) -> Result<Vec<u8>> {
    let [c, h, w] = ds.image_shape();
    if c != 1 {
        return Err(DataError::Invalid(format!("IDX export needs 1 channel, got {c}")));
    }
    let mut out = Vec::with_capacity(16 + ds.images().len());
    for v in [IMAGES_MAGIC, ds.len() as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(ds.images().data().iter().map(|&v| (v * 255.0).round() as u8));
    Ok(out)
}

pub fn encode_idx_labels(ds: &LabeledDataset) -> Result<Vec<u8>> {
    if ds.class_count() > 256 {
        return Err(DataError::Invalid("IDX labels are single bytes".into()));
    }
    let mut out = Vec::with_capacity(8 + ds.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    out.extend(ds.labels().iter().map(|&l| l as u8));
    Ok(out)
}

pub fn write_idx(ds: &LabeledDataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    fs::write(images_path, encode_idx_images(ds)?).map_err(io_err(images_path))?;
    fs::write(labels_path, encode_idx_labels(ds)?).map_err(io_err(labels_path))?;
    Ok(())
}
