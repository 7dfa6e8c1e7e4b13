//! Self-contained SVG output: line plots, region boundaries, heat maps.

use std::fmt::Write as _;

use crate::stability::RegionResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    None,
    Diamond,
    Circle,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub marker: Marker,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, color: &str, marker: Marker) -> Self {
        Series {
            label: label.into(),
            points,
            color: color.to_string(),
            marker,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub label: String,
    /// Values are log₁₀ of the quantity; ticks are printed as powers of 10.
    pub log10_labels: bool,
}

impl Axis {
    pub fn new(min: f64, max: f64, label: impl Into<String>) -> Self {
        Axis {
            min,
            max,
            label: label.into(),
            log10_labels: false,
        }
    }

    pub fn log10(mut self) -> Self {
        self.log10_labels = true;
        self
    }

    fn ticks(&self) -> Vec<f64> {
        let span = self.max - self.min;
        if !(span > 0.0) {
            return vec![self.min];
        }
        let raw = span / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let step = if self.log10_labels { step.max(1.0).round() } else { step };
        let mut t = (self.min / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.max + 1e-9 * span {
            out.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
            t += step;
        }
        out
    }

    fn tick_label(&self, v: f64) -> String {
        if self.log10_labels {
            format!("1e{}", v.round() as i64)
        } else {
            let s = format!("{v:.3}");
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x: Axis,
    pub y: Axis,
    pub series: Vec<Series>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    ax: (f64, f64),
    ay: (f64, f64),
}

impl Frame {
    fn new(x: &Axis, y: &Axis) -> Self {
        Frame {
            x0: MARGIN_LEFT,
            x1: WIDTH - MARGIN_RIGHT,
            y0: HEIGHT - MARGIN_BOTTOM,
            y1: MARGIN_TOP,
            ax: (x.min, x.max),
            ay: (y.min, y.max),
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.ax.0) / (self.ax.1 - self.ax.0) * (self.x1 - self.x0)
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + (y - self.ay.0) / (self.ay.1 - self.ay.0) * (self.y1 - self.y0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x: &Axis, y: &Axis) {
    let _ = writeln!(
        out,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        f.x0,
        f.y1,
        f.x1 - f.x0,
        f.y0 - f.y1
    );
    for t in x.ticks() {
        let px = f.px(t);
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, f.y0, f.y0 + 5.0);
        let _ = writeln!(out, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, f.y0 + 18.0, x.tick_label(t));
    }
    for t in y.ticks() {
        let py = f.py(t);
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="black"/>"#, f.x0 - 5.0, f.x0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, f.x0 - 8.0, py + 4.0, y.tick_label(t));
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (f.x0 + f.x1) / 2.0,
        HEIGHT - 15.0,
        escape(&x.label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (f.y0 + f.y1) / 2.0,
        (f.y0 + f.y1) / 2.0,
        escape(&y.label)
    );
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, dashed: bool) {
    if pts.len() < 2 {
        return;
    }
    let mut d = String::new();
    for (k, (x, y)) in pts.iter().enumerate() {
        let _ = write!(d, "{}{:.2},{:.2}", if k == 0 { "M" } else { " L" }, f.px(*x), f.py(*y));
    }
    let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
    let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#);
}

fn marker(out: &mut String, kind: Marker, x: f64, y: f64, color: &str) {
    match kind {
        Marker::None => {}
        Marker::Circle => {
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="none" stroke="{color}"/>"#);
        }
        Marker::Diamond => {
            let _ = writeln!(
                out,
                r#"<path d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} Z" fill="none" stroke="{color}"/>"#,
                x,
                y - 4.0,
                x + 4.0,
                y,
                x,
                y + 4.0,
                x - 4.0,
                y
            );
        }
    }
}

fn legend(out: &mut String, series: &[Series]) {
    let x = WIDTH - MARGIN_RIGHT + 12.0;
    for (k, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + 18.0 * k as f64;
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="1.5"{dash}/>"#,
            x + 24.0,
            s.color
        );
        marker(out, s.marker, x + 12.0, y, &s.color);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 30.0, y + 4.0, escape(&s.label));
    }
}

/// Line plot; non-finite points break the line.
pub fn render(plot: &Plot) -> String {
    let mut out = String::new();
    header(&mut out, &plot.title);
    let f = Frame::new(&plot.x, &plot.y);
    axes(&mut out, &f, &plot.x, &plot.y);
    for s in &plot.series {
        for run in s.points.split(|(x, y)| !(x.is_finite() && y.is_finite())) {
            polyline(&mut out, &f, run, &s.color, s.dashed);
        }
        for (x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            marker(&mut out, s.marker, f.px(*x), f.py(*y), &s.color);
        }
    }
    legend(&mut out, &plot.series);
    out.push_str("</svg>\n");
    out
}

/// Region boundaries: explicit part solid black, IMEX blue dashed.
pub fn region_svg(title: &str, explicit: Option<&RegionResult>, imex: Option<&RegionResult>) -> String {
    let window = explicit.or(imex).map(|r| r.window).unwrap_or_default();
    let x = Axis::new(window.re_min, window.re_max, "Re z");
    let y = Axis::new(window.im_min, window.im_max, "Im z");
    let mut series = Vec::new();
    let mut lines = Vec::new();
    if let Some(r) = explicit {
        series.push(Series::new("explicit part", Vec::new(), "black", Marker::None));
        lines.extend(r.boundary.iter().map(|l| (l.clone(), "black", false)));
    }
    if let Some(r) = imex {
        series.push(Series::new("IMEX", Vec::new(), "blue", Marker::None).dashed());
        lines.extend(r.boundary.iter().map(|l| (l.clone(), "blue", true)));
    }
    let mut out = String::new();
    header(&mut out, title);
    let f = Frame::new(&x, &y);
    axes(&mut out, &f, &x, &y);
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999"/>"##,
        f.px(0.0),
        f.y0,
        f.px(0.0),
        f.y1
    );
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999"/>"##,
        f.x0,
        f.py(0.0),
        f.x1,
        f.py(0.0)
    );
    for (pts, color, dashed) in &lines {
        polyline(&mut out, &f, pts, color, *dashed);
    }
    legend(&mut out, &series);
    out.push_str("</svg>\n");
    out
}

/// Heat map of `values[row][col]` on a `(x, y)` grid of cell centers, with
/// an optional reference line.
pub fn heatmap_svg(
    title: &str,
    x: Axis,
    y: Axis,
    xs: &[f64],
    ys: &[f64],
    values: &[Vec<f64>],
    overlay: Option<((f64, f64), (f64, f64))>,
) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let f = Frame::new(&x, &y);
    let finite: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let half = |v: &[f64], k: usize| -> (f64, f64) {
        let left = if k > 0 { 0.5 * (v[k - 1] + v[k]) } else if v.len() > 1 { v[0] - 0.5 * (v[1] - v[0]) } else { v[0] - 0.5 };
        let right = if k + 1 < v.len() {
            0.5 * (v[k] + v[k + 1])
        } else if v.len() > 1 {
            v[k] + 0.5 * (v[k] - v[k - 1])
        } else {
            v[0] + 0.5
        };
        (left, right)
    };
    for (r, row) in values.iter().enumerate() {
        let (ylo, yhi) = half(ys, r);
        for (c, &v) in row.iter().enumerate() {
            let (xlo, xhi) = half(xs, c);
            let fill = if v.is_finite() && hi > lo {
                let t = (v - lo) / (hi - lo);
                let red = (255.0 * t).round() as u8;
                let blue = (255.0 * (1.0 - t)).round() as u8;
                format!("rgb({red},64,{blue})")
            } else if v.is_finite() {
                "rgb(128,64,128)".to_string()
            } else {
                "white".to_string()
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                f.px(xlo),
                f.py(yhi),
                f.px(xhi) - f.px(xlo),
                f.py(ylo) - f.py(yhi)
            );
        }
    }
    axes(&mut out, &f, &x, &y);
    if let Some((a, b)) = overlay {
        polyline(&mut out, &f, &[a, b], "white", true);
    }
    if hi.is_finite() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">max {:.2}</text><text x="{:.2}" y="{:.2}">min {:.2}</text>"#,
            WIDTH - MARGIN_RIGHT + 12.0,
            MARGIN_TOP + 10.0,
            hi,
            WIDTH - MARGIN_RIGHT + 12.0,
            MARGIN_TOP + 28.0,
            lo
        );
    }
    out.push_str("</svg>\n");
    out
}
