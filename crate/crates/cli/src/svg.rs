//! Minimal deterministic SVG line and scatter charts.

use std::fmt::Write as _;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
            if hi <= lo {
                hi = lo + 1.0;
            }
        } else {
            if hi - lo <= 1e-300 {
                let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
                lo -= pad;
                hi += pad;
            }
            let step = nice_step((hi - lo) / 5.0);
            lo = (lo / step).floor() * step;
            hi = (hi / step).ceil() * step;
        }
        Some(Self { lo, hi, log })
    }

    fn ticks(&self) -> Vec<f64> {
        let step = if self.log { (((self.hi - self.lo) / 8.0).ceil()).max(1.0) } else { nice_step((self.hi - self.lo) / 5.0) };
        let n = ((self.hi - self.lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.lo + k as f64 * step).collect()
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    fn label(&self, t: f64) -> String {
        if self.log {
            format!("1e{}", t.round() as i64)
        } else {
            let s = format!("{t:.6}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s == "-0" { "0".into() } else { s.into() }
        }
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let m = raw / mag;
    let nice = if m <= 1.0 {
        1.0
    } else if m <= 2.0 {
        2.0
    } else if m <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn transform(v: f64, log: bool) -> Option<f64> {
    let t = if log { (v > 0.0).then(|| v.log10())? } else { v };
    t.is_finite().then_some(t)
}

impl Chart {
    /// Renders the chart. The first line is a comment naming the tool version; everything
    /// after it depends only on the data.
    pub fn render(&self, version: &str) -> Result<String, String> {
        let visible: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .filter_map(|&(x, y)| Some((transform(x, self.log_x)?, transform(y, self.log_y)?)))
                    .collect()
            })
            .collect();
        let all = || visible.iter().flatten();
        let x_axis = Axis::fit(all().map(|p| p.0), self.log_x).ok_or("no plottable points")?;
        let y_axis = Axis::fit(all().map(|p| p.1), self.log_y).ok_or("no plottable points")?;

        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let px = |x: f64| LEFT + x_axis.frac(x) * pw;
        let py = |y: f64| TOP + (1.0 - y_axis.frac(y)) * ph;

        let mut out = String::new();
        writeln!(out, "<!-- diffloss {version} -->").unwrap();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(&self.title)).unwrap();

        for t in x_axis.ticks() {
            let x = px(t);
            writeln!(out, r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##, TOP + ph).unwrap();
            writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, x_axis.label(t)).unwrap();
        }
        for t in y_axis.ticks() {
            let y = py(t);
            writeln!(out, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, LEFT + pw).unwrap();
            writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, y_axis.label(t)).unwrap();
        }
        writeln!(out, r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 16.0, escape(&self.x_label)).unwrap();
        writeln!(
            out,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        )
        .unwrap();

        for (k, (series, pts)) in self.series.iter().zip(&visible).enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            if pts.is_empty() {
                continue;
            }
            if series.style == Style::Line {
                let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
                writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
            }
            if series.style == Style::Markers {
                for &(x, y) in pts {
                    writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#, px(x), py(y)).unwrap();
                }
            }
            let ly = TOP + 14.0 + 20.0 * k as f64;
            let lx = LEFT + pw + 14.0;
            writeln!(out, r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="12" fill="{color}"/>"#, ly - 10.0).unwrap();
            writeln!(out, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 18.0, escape(&series.label)).unwrap();
        }
        out.push_str("</svg>\n");
        Ok(out)
    }
}
