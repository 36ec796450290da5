//! Standalone SVG line charts with optional error bars and a bar panel.

use std::fmt::Write;

const W: f64 = 640.0;
const PLOT_H: f64 = 360.0;
const BAR_H: f64 = 220.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric error per point; empty for none.
    pub err: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BarPanel {
    pub title: String,
    pub categories: Vec<String>,
    /// One value per category for every series of the chart.
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
    pub bars: Option<BarPanel>,
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn pad((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let m = (hi - lo) * 0.05;
        (lo - m, hi + m)
    }
}

impl LineChart {
    pub fn render(&self) -> String {
        let height = TOP + PLOT_H + BOTTOM + self.bars.as_ref().map_or(0.0, |_| BAR_H + BOTTOM);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" viewBox="0 0 {W} {height}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{height}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(&self.title));
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let xr = range(self.series.iter().flat_map(|se| se.points.iter().map(|p| tx(p.0))));
        let yr = range(self.series.iter().flat_map(|se| {
            se.points.iter().enumerate().flat_map(move |(i, p)| {
                let e = se.err.get(i).copied().unwrap_or(0.0);
                [p.1 - e, p.1 + e]
            })
        }));
        let (x0, x1) = pad(xr.unwrap_or((0.0, 1.0)));
        let (y0, y1) = pad(yr.unwrap_or((0.0, 1.0)));
        let pw = W - LEFT - RIGHT;
        let px = |x: f64| LEFT + (tx(x) - x0) / (x1 - x0) * pw;
        let py = |y: f64| TOP + PLOT_H - (y - y0) / (y1 - y0) * PLOT_H;
        self.axes(&mut s, TOP, PLOT_H, (y0, y1), &self.y_label);
        let xticks: Vec<f64> = if self.log_x {
            nice_ticks(x0, x1).into_iter().filter(|t| t.fract() == 0.0).map(|t| 10f64.powf(t)).collect()
        } else {
            nice_ticks(x0, x1)
        };
        for t in xticks {
            let x = px(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{b2:.2}" stroke="#333"/><text x="{x:.2}" y="{ty:.2}" text-anchor="middle">{}</text>"##,
                fmt_tick(t),
                b = TOP + PLOT_H,
                b2 = TOP + PLOT_H + 5.0,
                ty = TOP + PLOT_H + 18.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            TOP + PLOT_H + 38.0,
            escape(&self.x_label)
        );
        for (i, se) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = se
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            if !pts.is_empty() {
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
            }
            if se.points.len() <= 50 {
                for (j, &(x, y)) in se.points.iter().enumerate().filter(|(_, p)| p.0.is_finite() && p.1.is_finite()) {
                    let (cx, cy) = (px(x), py(y));
                    if let Some(&e) = se.err.get(j).filter(|e| **e > 0.0) {
                        let _ = writeln!(
                            s,
                            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="{color}"/>"#,
                            py(y - e),
                            py(y + e)
                        );
                    }
                    let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{color}"/>"#);
                }
            }
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = W - RIGHT + 12.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 18.0,
                lx + 24.0,
                ly + 4.0,
                escape(&se.name)
            );
        }
        if let Some(bars) = &self.bars {
            self.bar_panel(&mut s, bars, TOP + PLOT_H + BOTTOM);
        }
        s.push_str("</svg>\n");
        s
    }

    fn axes(&self, s: &mut String, top: f64, h: f64, (y0, y1): (f64, f64), label: &str) {
        let pw = W - LEFT - RIGHT;
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{top:.2}" width="{pw:.2}" height="{h:.2}" fill="none" stroke="#333"/>"##
        );
        for t in nice_ticks(y0, y1) {
            let y = top + h - (t - y0) / (y1 - y0) * h;
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/><line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT - 5.0,
                LEFT + pw,
                LEFT - 8.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let cy = top + h / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="16" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 16 {cy:.2})">{}</text>"#,
            escape(label)
        );
    }

    fn bar_panel(&self, s: &mut String, bars: &BarPanel, top: f64) {
        let all = bars.values.iter().flatten().copied().chain([0.0]);
        let (y0, y1) = pad(range(all).unwrap_or((0.0, 1.0)));
        self.axes(s, top, BAR_H, (y0, y1), &bars.title);
        let pw = W - LEFT - RIGHT;
        let py = |y: f64| top + BAR_H - (y - y0) / (y1 - y0) * BAR_H;
        let groups = bars.categories.len().max(1) as f64;
        let gw = pw / groups;
        let nser = bars.values.len().max(1) as f64;
        let bw = gw * 0.8 / nser;
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{z:.2}" x2="{:.2}" y2="{z:.2}" stroke="#333"/>"##, LEFT + pw, z = py(0.0));
        for (c, cat) in bars.categories.iter().enumerate() {
            let gx = LEFT + gw * c as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                gx + gw / 2.0,
                top + BAR_H + 18.0,
                escape(cat)
            );
            for (i, vals) in bars.values.iter().enumerate() {
                let Some(&v) = vals.get(c).filter(|v| v.is_finite()) else { continue };
                let x = gx + gw * 0.1 + bw * i as f64;
                let (ya, yb) = (py(v.max(0.0)), py(v.min(0.0)));
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.2}" y="{ya:.2}" width="{bw:.2}" height="{:.2}" fill="{}"/>"#,
                    (yb - ya).max(0.5),
                    PALETTE[i % PALETTE.len()]
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(0.12, 0.97);
        assert!(t.len() >= 3 && t.len() <= 7, "{t:?}");
        assert!(t.iter().all(|v| (0.12..=0.97).contains(v)));
        assert_eq!(fmt_tick(0.5), "0.5");
        assert_eq!(fmt_tick(2.0), "2");
    }

    #[test]
    fn labels_are_escaped() {
        let c = LineChart {
            title: "a<b & c".into(),
            series: vec![Series {
                name: "x\"y".into(),
                points: vec![(1.0, 0.5)],
                err: vec![],
            }],
            ..Default::default()
        };
        let svg = c.render();
        assert!(svg.contains("a&lt;b &amp; c"));
        assert!(svg.contains("x&quot;y"));
    }
}
