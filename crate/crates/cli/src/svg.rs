//! Minimal SVG plots written by hand so figures are byte-reproducible.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

/// Round axis limit and tick spacing covering `[0, max]`.
fn nice_axis(max: f64) -> (f64, f64) {
    if !(max > 0.0) || !max.is_finite() {
        return (1.0, 0.2);
    }
    let raw = max / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    ((max / step).ceil() * step, step)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    };
    format!("{v:.decimals$}")
}

struct Frame {
    x_max: f64,
    y_max: f64,
    x_step: f64,
    y_step: f64,
}

impl Frame {
    fn new(x_max: f64, y_max: f64) -> Self {
        let (x_max, x_step) = nice_axis(x_max);
        let (y_max, y_step) = nice_axis(y_max);
        Self {
            x_max,
            y_max,
            x_step,
            y_step,
        }
    }

    fn sx(&self, x: f64) -> f64 {
        LEFT + (x / self.x_max) * (WIDTH - LEFT - RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y / self.y_max) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (x0, y0) = (self.sx(0.0), self.sy(0.0));
        let (x1, y1) = (self.sx(self.x_max), self.sy(self.y_max));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y0:.1}" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{y1:.1}" stroke="black"/>"#
        );
        let nx = (self.x_max / self.x_step).round() as usize;
        for i in 0..=nx {
            let v = i as f64 * self.x_step;
            let x = self.sx(v);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
                y0 + 5.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
                y0 + 18.0,
                tick_label(v, self.x_step)
            );
        }
        let ny = (self.y_max / self.y_step).round() as usize;
        for i in 0..=ny {
            let v = i as f64 * self.y_step;
            let y = self.sy(v);
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="black"/>"#,
                x0 - 5.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
                x0 - 8.0,
                y + 4.0,
                tick_label(v, self.y_step)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 18.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="18" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    let x = WIDTH - RIGHT + 15.0;
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * i as f64;
        let _ = writeln!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="{color}"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            x + 10.0,
            y + 4.0,
            escape(label)
        );
    }
}

fn header() -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    out
}

/// Scatter plot with axes starting at zero. Series are drawn in order, so
/// later series sit on top.
pub fn scatter(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let x_max = pts.clone().map(|p| p.0).fold(0.0, f64::max);
    let y_max = pts.map(|p| p.1).fold(0.0, f64::max);
    let frame = Frame::new(x_max, y_max);
    let mut out = header();
    frame.axes(&mut out, title, x_label, y_label);
    for s in series {
        for &(x, y) in &s.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.7"/>"#,
                frame.sx(x),
                frame.sy(y),
                s.color
            );
        }
    }
    let entries: Vec<_> = series
        .iter()
        .map(|s| (format!("{} ({})", s.label, s.points.len()), s.color))
        .collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// Named, colored groups of polylines.
pub type PolylineGroup = (String, &'static str, Vec<Vec<(f64, f64)>>);

/// Polylines in image coordinates (y down), e.g. finger chains of several
/// hand projections overlaid after centering.
pub fn polylines(title: &str, series: &[PolylineGroup]) -> String {
    let all = series.iter().flat_map(|s| s.2.iter().flatten());
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &(x, y) in all {
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
    }
    let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-9);
    let plot = (HEIGHT - TOP - BOTTOM).min(WIDTH - LEFT - RIGHT);
    let scale = plot / span;
    let map = |(x, y): (f64, f64)| (LEFT + (x - lo.0) * scale, TOP + (y - lo.1) * scale);
    let mut out = header();
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    for (_, color, lines) in series {
        for line in lines {
            let pts: Vec<String> = line
                .iter()
                .map(|&p| {
                    let (x, y) = map(p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
        }
    }
    let entries: Vec<_> = series.iter().map(|(label, color, _)| (label.clone(), *color)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}
