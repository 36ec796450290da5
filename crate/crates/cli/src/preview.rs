use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::Result;

/// 8-bit grayscale PNG with value `round(255·pixel)`.
pub fn write_gray_png(path: &Path, pixels: &[f32], height: usize, width: usize) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(w, width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let bytes: Vec<u8> = pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    enc.write_header()?.write_image_data(&bytes)?;
    Ok(())
}
