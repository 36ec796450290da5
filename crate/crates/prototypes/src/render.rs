//! Rasterization of graph prototypes.
//!
//! Node `(x, y)` lands at pixel-space point `(x·W, y·H)`; pixel `(i, j)` is
//! sampled at its center `(j + 0.5, i + 0.5)`. With `d` the distance from that
//! center to the nearest stroke and `r = stroke_width·W / 2`, the intensity is
//! `clamp(r + 1 − d, 0, 1)`: full inside the stroke, a one-pixel linear ramp
//! outside it. Segment distance gives round caps and joins for free.

use ipkp_data::{LabeledDataset, PrototypeSet, PrototypeSource};
use ipkp_nn::Tensor;

use crate::error::{ProtoError, Result};
use crate::graph::{parse_graph_specs, GraphPrototype};

/// A labeled raster prototype, image shape `[1, H, W]`, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplatePrototype {
    pub label: usize,
    pub image: Tensor<f32>,
}

impl TemplatePrototype {
    pub fn new(label: usize, image: Tensor<f32>) -> Result<Self> {
        if image.shape().len() != 3 || image.shape()[0] != 1 {
            return Err(ProtoError::Invalid(format!("template shape {:?}, expected [1, H, W]", image.shape())));
        }
        if image.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ProtoError::Invalid(format!("template for class {label} leaves [0, 1]")));
        }
        Ok(TemplatePrototype { label, image })
    }
}

/// Distance from `p` to segment `ab`.
pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let (px, py) = (p[0] - a[0], p[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { ((px * dx + py * dy) / len2).clamp(0.0, 1.0) };
    let (ex, ey) = (px - t * dx, py - t * dy);
    (ex * ex + ey * ey).sqrt()
}

pub fn render_graph(proto: &GraphPrototype, height: usize, width: usize) -> Result<TemplatePrototype> {
    proto.validate()?;
    if height == 0 || width == 0 {
        return Err(ProtoError::Invalid("zero resolution".into()));
    }
    let pts: Vec<[f64; 2]> = proto.nodes.iter().map(|&[x, y]| [x * width as f64, y * height as f64]).collect();
    let mut segments = Vec::new();
    for s in &proto.strokes {
        if s.len() == 1 {
            segments.push((pts[s[0]], pts[s[0]]));
        }
        for w in s.windows(2) {
            segments.push((pts[w[0]], pts[w[1]]));
        }
    }
    let r = proto.stroke_width * width as f64 / 2.0;
    let mut data = Vec::with_capacity(height * width);
    for i in 0..height {
        for j in 0..width {
            let c = [j as f64 + 0.5, i as f64 + 0.5];
            let d = segments.iter().map(|&(a, b)| segment_distance(c, a, b)).fold(f64::INFINITY, f64::min);
            data.push((r + 1.0 - d).clamp(0.0, 1.0) as f32);
        }
    }
    let image = Tensor::from_vec(&[1, height, width], data).expect("render shape");
    TemplatePrototype::new(proto.label, image)
}

/// Stacks templates into a set with one item per class, ordered by label.
pub fn templates_to_set(templates: &[TemplatePrototype], source: PrototypeSource, name: &str) -> Result<PrototypeSet> {
    let mut sorted: Vec<&TemplatePrototype> = templates.iter().collect();
    sorted.sort_by_key(|t| t.label);
    let classes = sorted.len();
    for (c, t) in sorted.iter().enumerate() {
        if t.label != c {
            return Err(ProtoError::Invalid(format!("expected one prototype per class 0..{classes}, found class {} at {c}", t.label)));
        }
    }
    let shape = sorted.first().ok_or_else(|| ProtoError::Invalid("no templates".into()))?.image.shape().to_vec();
    if let Some(t) = sorted.iter().find(|t| t.image.shape() != &shape[..]) {
        return Err(ProtoError::Invalid(format!("class {} has shape {:?}, expected {shape:?}", t.label, t.image.shape())));
    }
    let data: Vec<f32> = sorted.iter().flat_map(|t| t.image.data().iter().copied()).collect();
    let images = Tensor::from_vec(&[classes, shape[0], shape[1], shape[2]], data).expect("stacked shape");
    let ds = LabeledDataset::new(name, images, (0..classes).collect(), classes)?;
    Ok(PrototypeSet::new(source, ds, 1)?)
}

/// The shipped digit skeletons.
pub const DIGITS_SPEC: &str = include_str!("../assets/digits.txt");

/// Renders a graph spec file into a knowledge prototype set.
pub fn render_spec(text: &str, height: usize, width: usize) -> Result<PrototypeSet> {
    let templates = parse_graph_specs(text)?
        .iter()
        .map(|g| render_graph(g, height, width))
        .collect::<Result<Vec<_>>>()?;
    templates_to_set(&templates, PrototypeSource::Knowledge, "knowledge")
}

/// The ten shipped digit prototypes, one per class, white on black.
pub fn builtin_digit_prototypes(height: usize, width: usize) -> Result<PrototypeSet> {
    render_spec(DIGITS_SPEC, height, width)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar() -> GraphPrototype {
        GraphPrototype {
            label: 0,
            nodes: vec![[0.2, 0.5], [0.8, 0.5]],
            strokes: vec![vec![0, 1]],
            stroke_width: 0.1,
        }
    }

    #[test]
    fn single_node_renders_a_disc() {
        let g = GraphPrototype {
            label: 0,
            nodes: vec![[0.5, 0.5]],
            strokes: vec![vec![0]],
            stroke_width: 0.25,
        };
        let t = render_graph(&g, 16, 16).unwrap();
        let img = t.image.data();
        assert_eq!(img[8 * 16 + 8], 1.0);
        assert_eq!(img[0], 0.0);
        assert_eq!(img[8 * 16 + 3], img[8 * 16 + 12]);
    }

    #[test]
    fn empty_strokes_is_an_error() {
        let mut g = bar();
        g.strokes.clear();
        assert!(matches!(render_graph(&g, 8, 8), Err(ProtoError::EmptyStrokes { class: 0 })));
    }

    #[test]
    fn wide_stroke_saturates() {
        let mut g = bar();
        g.stroke_width = 2.0;
        let t = render_graph(&g, 28, 28).unwrap();
        assert!(t.image.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn builtin_set_has_one_item_per_digit() {
        let p = builtin_digit_prototypes(28, 28).unwrap();
        assert_eq!(p.len(), 10);
        assert_eq!(p.dataset().labels(), &(0..10).collect::<Vec<_>>()[..]);
        assert_eq!(p, builtin_digit_prototypes(28, 28).unwrap());
    }
}
