//! USPS text format: one sample per line, a digit label followed by 256
//! grayscale values in `[-1, 1]` (16×16, row-major).

use std::fs;
use std::path::Path;

use ipkp_nn::Tensor;

use crate::dataset::LabeledDataset;
use crate::error::{io_err, DataError, Result};

pub const USPS_SIDE: usize = 16;

/// Bilinear resampling with pixel-center alignment: destination pixel `j`
/// samples source coordinate `(j + 0.5)·src/dst − 0.5`, clamped to the image.
pub fn resize_bilinear(src: &[f32], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f32> {
    let axis = |d: usize, s: usize, n: usize| {
        let x = ((d as f64 + 0.5) * s as f64 / n as f64 - 0.5).clamp(0.0, (s - 1) as f64);
        let i0 = x.floor() as usize;
        let i1 = (i0 + 1).min(s - 1);
        (i0, i1, x - i0 as f64)
    };
    let mut out = Vec::with_capacity(dh * dw);
    for y in 0..dh {
        let (y0, y1, fy) = axis(y, sh, dh);
        for x in 0..dw {
            let (x0, x1, fx) = axis(x, sw, dw);
            let p = |yy: usize, xx: usize| src[yy * sw + xx] as f64;
            let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
            let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
            out.push((top * (1.0 - fy) + bottom * fy) as f32);
        }
    }
    out
}

/// Parses USPS text, maps values to `[0, 1]` by `(v + 1) / 2` and resizes
/// every image to `side × side`.
pub fn parse_usps(text: &str, side: usize) -> Result<LabeledDataset> {
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut fields = line.split_whitespace();
        let Some(first) = fields.next() else { continue };
        let bad = |reason: String| DataError::Malformed { line: line_no, reason };
        let label: f64 = first.parse().map_err(|_| bad(format!("label {first:?} is not a number")))?;
        if label.fract() != 0.0 || !(0.0..=9.0).contains(&label) {
            return Err(bad(format!("label {first} is not a digit class")));
        }
        let mut pixels = Vec::with_capacity(USPS_SIDE * USPS_SIDE);
        for f in fields {
            let v: f64 = f.parse().map_err(|_| bad(format!("value {f:?} is not a number")))?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(bad(format!("value {v} outside [-1, 1]")));
            }
            pixels.push(((v + 1.0) / 2.0) as f32);
        }
        if pixels.len() != USPS_SIDE * USPS_SIDE {
            return Err(bad(format!("{} values, expected {}", pixels.len(), USPS_SIDE * USPS_SIDE)));
        }
        labels.push(label as usize);
        if side == USPS_SIDE {
            data.extend(pixels);
        } else {
            data.extend(resize_bilinear(&pixels, USPS_SIDE, USPS_SIDE, side, side));
        }
    }
    if labels.is_empty() {
        return Err(DataError::Invalid("no USPS samples".into()));
    }
    let images = Tensor::from_vec(&[labels.len(), 1, side, side], data).expect("parsed shape");
    LabeledDataset::new("usps", images, labels, 10)
}

/// Reads a USPS file and resizes to 28×28 to match MNIST-trained models.
pub fn load_usps(path: &Path) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_usps(&text, 28)
}
