//! Graph prototypes and their text format.
//!
//! ```text
//! # comment
//! class 7
//! width 0.09
//! node 0 0.28 0.20
//! node 1 0.72 0.20
//! node 2 0.42 0.82
//! stroke 0 1 2
//! ```
//!
//! A block starts at `class`. Node indices within a block must cover
//! `0..n` exactly once. Coordinates are in the unit square, origin top-left.

use crate::error::{ProtoError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GraphPrototype {
    pub label: usize,
    /// `(x, y)` per node, indexed by node index.
    pub nodes: Vec<[f64; 2]>,
    /// Polylines as node-index sequences.
    pub strokes: Vec<Vec<usize>>,
    /// Stroke width as a fraction of the image width.
    pub stroke_width: f64,
}

impl GraphPrototype {
    pub fn validate(&self) -> Result<()> {
        if self.strokes.is_empty() {
            return Err(ProtoError::EmptyStrokes { class: self.label });
        }
        if !(self.stroke_width > 0.0 && self.stroke_width.is_finite()) {
            return Err(ProtoError::Invalid(format!("class {}: stroke width {}", self.label, self.stroke_width)));
        }
        for (i, [x, y]) in self.nodes.iter().enumerate() {
            if !((0.0..=1.0).contains(x) && (0.0..=1.0).contains(y)) {
                return Err(ProtoError::Invalid(format!("class {}: node {i} at ({x}, {y}) outside the unit square", self.label)));
            }
        }
        for s in &self.strokes {
            if s.is_empty() {
                return Err(ProtoError::Invalid(format!("class {}: empty stroke", self.label)));
            }
            if let Some(&bad) = s.iter().find(|&&i| i >= self.nodes.len()) {
                return Err(ProtoError::Invalid(format!("class {}: stroke references node {bad}", self.label)));
            }
        }
        Ok(())
    }

    /// Reflects every node horizontally (`x → 1 − x`).
    pub fn mirrored_x(&self) -> GraphPrototype {
        let mut g = self.clone();
        for n in &mut g.nodes {
            n[0] = 1.0 - n[0];
        }
        g
    }

    /// Reflects every node vertically (`y → 1 − y`).
    pub fn mirrored_y(&self) -> GraphPrototype {
        let mut g = self.clone();
        for n in &mut g.nodes {
            n[1] = 1.0 - n[1];
        }
        g
    }
}

#[derive(Default)]
struct Block {
    label: usize,
    line: usize,
    nodes: Vec<(usize, usize, [f64; 2])>,
    strokes: Vec<(usize, Vec<usize>)>,
    width: Option<f64>,
}

impl Block {
    fn finish(self) -> Result<GraphPrototype> {
        let err = |line: usize, reason: String| ProtoError::Parse {
            line,
            class: Some(self.label),
            reason,
        };
        let n = self.nodes.len();
        let mut nodes = vec![None; n];
        for &(line, idx, xy) in &self.nodes {
            if idx >= n {
                return Err(err(line, format!("node index {idx} leaves a gap (block has {n} nodes)")));
            }
            if nodes[idx].replace(xy).is_some() {
                return Err(err(line, format!("node {idx} defined twice")));
            }
        }
        if self.strokes.is_empty() {
            return Err(err(self.line, "block has no strokes".into()));
        }
        for (line, s) in &self.strokes {
            if let Some(&bad) = s.iter().find(|&&i| i >= n) {
                return Err(err(*line, format!("stroke references undefined node {bad}")));
            }
        }
        let width = self.width.ok_or_else(|| err(self.line, "block has no width".into()))?;
        Ok(GraphPrototype {
            label: self.label,
            nodes: nodes.into_iter().map(|v| v.expect("dense indices")).collect(),
            strokes: self.strokes.into_iter().map(|(_, s)| s).collect(),
            stroke_width: width,
        })
    }
}

/// Parses a graph prototype file; blocks are returned in file order.
pub fn parse_graph_specs(text: &str) -> Result<Vec<GraphPrototype>> {
    let mut out = Vec::new();
    let mut block: Option<Block> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        let key = words.next().expect("non-empty line");
        let args: Vec<&str> = words.collect();
        let class = block.as_ref().map(|b| b.label);
        let err = |reason: String| ProtoError::Parse { line, class, reason };
        if key == "class" {
            let [id] = args[..] else {
                return Err(err("expected `class <id>`".into()));
            };
            let label = id.parse().map_err(|_| err(format!("bad class id `{id}`")))?;
            if let Some(b) = block.take() {
                out.push(b.finish()?);
            }
            block = Some(Block {
                label,
                line,
                ..Block::default()
            });
            continue;
        }
        let Some(b) = block.as_mut() else {
            return Err(err(format!("`{key}` before any `class` line")));
        };
        match key {
            "node" => {
                let [idx, x, y] = args[..] else {
                    return Err(err("expected `node <idx> <x> <y>`".into()));
                };
                let idx = idx.parse().map_err(|_| err(format!("bad node index `{idx}`")))?;
                let coord = |s: &str| -> Result<f64> {
                    let v: f64 = s.parse().map_err(|_| err(format!("bad coordinate `{s}`")))?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(err(format!("coordinate {v} outside [0, 1]")));
                    }
                    Ok(v)
                };
                b.nodes.push((line, idx, [coord(x)?, coord(y)?]));
            }
            "stroke" => {
                if args.is_empty() {
                    return Err(err("stroke needs at least one node".into()));
                }
                let s = args
                    .iter()
                    .map(|a| a.parse().map_err(|_| err(format!("bad node index `{a}`"))))
                    .collect::<Result<Vec<usize>>>()?;
                b.strokes.push((line, s));
            }
            "width" => {
                let [w] = args[..] else {
                    return Err(err("expected `width <w>`".into()));
                };
                let w: f64 = w.parse().map_err(|_| err(format!("bad width `{w}`")))?;
                if !(w > 0.0 && w.is_finite()) {
                    return Err(err(format!("width must be positive, got {w}")));
                }
                b.width = Some(w);
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    if let Some(b) = block {
        out.push(b.finish()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_blocks_with_comments() {
        let text = "# two digits\nclass 1\nwidth 0.1\nnode 1 0.5 0.9\nnode 0 0.5 0.1 # top\nstroke 0 1\n\nclass 0\nwidth 0.2\nnode 0 0.5 0.5\nstroke 0\n";
        let g = parse_graph_specs(text).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].label, 1);
        assert_eq!(g[0].nodes, vec![[0.5, 0.1], [0.5, 0.9]]);
        assert_eq!(g[0].strokes, vec![vec![0, 1]]);
        assert_eq!(g[1].stroke_width, 0.2);
    }

    #[test]
    fn invalid_node_reference_cites_the_stroke_line() {
        let text = "class 3\nwidth 0.1\nnode 0 0.1 0.1\nstroke 0 4\n";
        match parse_graph_specs(text) {
            Err(ProtoError::Parse { line, class, reason }) => {
                assert_eq!((line, class), (4, Some(3)));
                assert!(reason.contains("node 4"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_lines() {
        for text in [
            "node 0 0 0\n",
            "class x\n",
            "class 0\nnode 0 1.5 0\n",
            "class 0\nwidth -1\n",
            "class 0\nwidth 0.1\nnode 0 0 0\n",
            "class 0\nnode 0 0 0\nstroke 0\n",
            "class 0\nwidth 0.1\nnode 0 0 0\nnode 0 1 1\nstroke 0\n",
            "class 0\nwidth 0.1\nnode 1 0 0\nstroke 0\n",
            "class 0\nfill 1\n",
        ] {
            assert!(matches!(parse_graph_specs(text), Err(ProtoError::Parse { .. })), "{text:?}");
        }
    }
}
