//! Label-preserving geometric augmentation.
//!
//! Warps are inverse-mapped: each destination pixel center is mapped back into
//! the source image and sampled bilinearly; reads outside the source are 0.
//! Coordinates are continuous pixel space with pixel `(i, j)` centered at
//! `(j + 0.5, i + 0.5)`.

use ipkp_data::{LabeledDataset, PrototypeSet};
use ipkp_nn::rng::{derive_seed, seeded, DetRng};
use ipkp_nn::Tensor;
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use rand::Rng;

use crate::error::{ProtoError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AugmentMode {
    Affine,
    Perspective,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentationConfig {
    pub mode: AugmentMode,
    /// Items per class after augmentation, the original included.
    pub per_class_count: usize,
    pub scale_range: [f64; 2],
    /// Fraction of the image width.
    pub translate_range: [f64; 2],
    pub rotate_degrees_max: f64,
    /// Corner jitter as a fraction of the image width.
    pub perspective_distortion: f64,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            mode: AugmentMode::Perspective,
            per_class_count: 100,
            scale_range: [0.9, 1.1],
            translate_range: [-0.1, 0.1],
            rotate_degrees_max: 5.0,
            perspective_distortion: 0.15,
            seed: 0,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ProtoError::Config(m));
        if self.per_class_count == 0 {
            return bad("per_class_count must be at least 1".into());
        }
        let [s0, s1] = self.scale_range;
        if !(s0 > 0.0 && s0 <= s1 && s1.is_finite()) {
            return bad(format!("scale range [{s0}, {s1}]"));
        }
        let [t0, t1] = self.translate_range;
        if !(t0 <= t1 && t0.is_finite() && t1.is_finite()) {
            return bad(format!("translate range [{t0}, {t1}]"));
        }
        if !(self.rotate_degrees_max >= 0.0 && self.rotate_degrees_max.is_finite()) {
            return bad(format!("rotate_degrees_max {}", self.rotate_degrees_max));
        }
        if !(0.0..0.5).contains(&self.perspective_distortion) {
            return bad(format!("perspective_distortion {} outside [0, 0.5)", self.perspective_distortion));
        }
        Ok(())
    }
}

/// A forward geometric transform in pixel space.
#[derive(Clone, Debug, PartialEq)]
pub enum Transform {
    /// Scale and rotate about the image center, then translate by
    /// `(tx, ty)·width` pixels. Positive angles turn clockwise on screen.
    Affine {
        scale: f64,
        angle_degrees: f64,
        tx: f64,
        ty: f64,
    },
    /// Maps homogeneous source points to destination points.
    Homography(Matrix3<f64>),
}

impl Transform {
    pub fn identity() -> Self {
        Transform::Homography(Matrix3::identity())
    }

    pub fn forward_matrix(&self, height: usize, width: usize) -> Matrix3<f64> {
        match *self {
            Transform::Affine {
                scale,
                angle_degrees,
                tx,
                ty,
            } => {
                let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
                let (s, c) = angle_degrees.to_radians().sin_cos();
                let to_origin = Matrix3::new(1.0, 0.0, -cx, 0.0, 1.0, -cy, 0.0, 0.0, 1.0);
                let rs = Matrix3::new(scale * c, -scale * s, 0.0, scale * s, scale * c, 0.0, 0.0, 0.0, 1.0);
                let back = Matrix3::new(1.0, 0.0, cx + tx * width as f64, 0.0, 1.0, cy + ty * width as f64, 0.0, 0.0, 1.0);
                back * rs * to_origin
            }
            Transform::Homography(m) => m,
        }
    }
}

/// Homography taking each `from[i]` to `to[i]`, or `None` for degenerate quads.
pub fn homography_from_points(from: &[[f64; 2]; 4], to: &[[f64; 2]; 4]) -> Option<Matrix3<f64>> {
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for (i, (&[x, y], &[u, v])) in from.iter().zip(to).enumerate() {
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
        b[r] = u;
        b[r + 1] = v;
    }
    let h = a.lu().solve(&b)?;
    Some(Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0))
}

fn bilinear(src: &[f32], height: usize, width: usize, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x - 0.5, y - 0.5);
    let (x0, y0) = (fx.floor(), fy.floor());
    let (ax, ay) = (fx - x0, fy - y0);
    let read = |yy: f64, xx: f64| -> f64 {
        if yy < 0.0 || xx < 0.0 || yy >= height as f64 || xx >= width as f64 {
            0.0
        } else {
            src[yy as usize * width + xx as usize] as f64
        }
    };
    (1.0 - ay) * ((1.0 - ax) * read(y0, x0) + ax * read(y0, x0 + 1.0))
        + ay * ((1.0 - ax) * read(y0 + 1.0, x0) + ax * read(y0 + 1.0, x0 + 1.0))
}

/// Warps one `height × width` channel by `transform`.
pub fn warp(src: &[f32], height: usize, width: usize, transform: &Transform) -> Vec<f32> {
    let inv = transform
        .forward_matrix(height, width)
        .try_inverse()
        .unwrap_or_else(Matrix3::zeros);
    let mut out = Vec::with_capacity(height * width);
    for i in 0..height {
        for j in 0..width {
            let p = inv * Vector3::new(j as f64 + 0.5, i as f64 + 0.5, 1.0);
            let v = if p[2].abs() < 1e-12 { 0.0 } else { bilinear(src, height, width, p[0] / p[2], p[1] / p[2]) };
            out.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    out
}

/// Draws a random transform from `cfg` for an image of the given size.
pub fn sample_transform(cfg: &AugmentationConfig, height: usize, width: usize, rng: &mut DetRng) -> Transform {
    let uniform = |rng: &mut DetRng, lo: f64, hi: f64| if lo < hi { rng.random_range(lo..=hi) } else { lo };
    match cfg.mode {
        AugmentMode::Affine => {
            let scale = uniform(rng, cfg.scale_range[0], cfg.scale_range[1]);
            let r = cfg.rotate_degrees_max;
            let angle_degrees = uniform(rng, -r, r);
            let tx = uniform(rng, cfg.translate_range[0], cfg.translate_range[1]);
            let ty = uniform(rng, cfg.translate_range[0], cfg.translate_range[1]);
            Transform::Affine {
                scale,
                angle_degrees,
                tx,
                ty,
            }
        }
        AugmentMode::Perspective => {
            let (w, h) = (width as f64, height as f64);
            let corners = [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]];
            let d = cfg.perspective_distortion * w;
            let mut moved = corners;
            for c in &mut moved {
                c[0] += uniform(rng, -d, d);
                c[1] += uniform(rng, -d, d);
            }
            Transform::Homography(homography_from_points(&corners, &moved).unwrap_or_else(Matrix3::identity))
        }
    }
}

/// Expands every class block to `cfg.per_class_count` items.
///
/// Existing items are kept in place; new item `j` of class `c` warps existing
/// item `j mod m` with a transform drawn from `derive_seed(seed, "c/j")`, so a
/// smaller count yields a prefix of a larger one.
pub fn augment(set: &PrototypeSet, cfg: &AugmentationConfig) -> Result<PrototypeSet> {
    cfg.validate()?;
    let m = set.per_class_count();
    if cfg.per_class_count < m {
        return Err(ProtoError::Config(format!(
            "per_class_count {} is below the existing {m} items per class",
            cfg.per_class_count
        )));
    }
    let ds = set.dataset();
    let [c, h, w] = ds.image_shape();
    let plane = h * w;
    let count = cfg.per_class_count;
    let mut data = Vec::with_capacity(set.class_count() * count * c * plane);
    for class in 0..set.class_count() {
        for j in 0..count {
            let base = set.item(class, j % m);
            if j < m {
                data.extend_from_slice(base);
                continue;
            }
            let mut rng = seeded(derive_seed(cfg.seed, &format!("{class}/{j}")));
            let t = sample_transform(cfg, h, w, &mut rng);
            for ch in 0..c {
                data.extend(warp(&base[ch * plane..(ch + 1) * plane], h, w, &t));
            }
        }
    }
    let n = set.class_count() * count;
    let images = Tensor::from_vec(&[n, c, h, w], data).expect("augmented shape");
    let labels = (0..n).map(|i| i / count).collect();
    let out = LabeledDataset::new(format!("{}-aug{count}", ds.name), images, labels, set.class_count())?;
    Ok(PrototypeSet::new(set.source, out, count)?)
}
