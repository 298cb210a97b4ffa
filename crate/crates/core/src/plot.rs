//! Bare-bones SVG output for region maps and phase portraits.

use std::fmt::Write as _;

use crate::odeint::rollout;
use crate::wicfield::VectorField;

/// A canvas mapping a data rectangle onto `width × height` pixels.
#[derive(Debug, Clone)]
pub struct Svg {
    width: f64,
    height: f64,
    margin: f64,
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Self { width, height, margin: 40.0, x: widen(x), y: widen(y), body: String::new() }
    }

    fn px(&self, x: f64) -> f64 {
        self.margin + (x - self.x.0) / (self.x.1 - self.x.0) * (self.width - 2.0 * self.margin)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - self.margin - (y - self.y.0) / (self.y.1 - self.y.0) * (self.height - 2.0 * self.margin)
    }

    /// Axis-aligned rectangle given by two data-space corners.
    pub fn rect(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), fill: &str) {
        let (a, b) = (self.px(x0.min(x1)), self.px(x0.max(x1)));
        let (c, d) = (self.py(y0.max(y1)), self.py(y0.min(y1)));
        let _ = writeln!(
            self.body,
            r#"<rect x="{a:.2}" y="{c:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            b - a,
            d - c
        );
    }

    /// Polyline through data points; non-finite points break the line.
    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        for run in pts.split(|(x, y)| !x.is_finite() || !y.is_finite()) {
            if run.len() < 2 {
                continue;
            }
            let coords: Vec<String> =
                run.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
            let _ = writeln!(
                self.body,
                r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
                coords.join(" ")
            );
        }
    }

    pub fn circle(&mut self, (x, y): (f64, f64), r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{fill}"/>"#, self.px(x), self.py(y));
    }

    pub fn text(&mut self, (x, y): (f64, f64), label: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            self.px(x),
            self.py(y),
            escape(label)
        );
    }

    /// Frame with the range limits written at the corners.
    pub fn axes(&mut self, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (self.margin, self.width - self.margin, self.margin, self.height - self.margin);
        let _ = writeln!(
            self.body,
            r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        let small = r#"font-family="sans-serif" font-size="11""#;
        let _ = writeln!(self.body, r#"<text x="{l}" y="{}" {small}>{:.3}</text>"#, b + 14.0, self.x.0);
        let _ = writeln!(self.body, r#"<text x="{}" y="{}" {small} text-anchor="end">{:.3}</text>"#, r, b + 14.0, self.x.1);
        let _ = writeln!(self.body, r#"<text x="{}" y="{b}" {small} text-anchor="end">{:.3}</text>"#, l - 4.0, self.y.0);
        let _ = writeln!(self.body, r#"<text x="{}" y="{}" {small} text-anchor="end">{:.3}</text>"#, l - 4.0, t + 10.0, self.y.1);
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" {small} text-anchor="middle">{}</text>"#,
            (l + r) / 2.0,
            b + 28.0,
            escape(x_label)
        );
        let _ = writeln!(self.body, r#"<text x="4" y="{}" {small}>{}</text>"#, (t + b) / 2.0, escape(y_label));
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            body = self.body
        )
    }
}

/// Streamlines of `f` (first two coordinates) from each start, with
/// optional `(x0, xT)` pairs drawn as hollow and filled dots.
pub fn phase_portrait<F: VectorField + ?Sized>(
    f: &F,
    starts: &[Vec<f64>],
    horizon: f64,
    n_steps: usize,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> String {
    let lines: Vec<Vec<(f64, f64)>> = starts
        .iter()
        .filter_map(|x0| rollout(f, x0, horizon, n_steps).ok())
        .map(|t| t.states().iter().map(|s| (s[0], s.get(1).copied().unwrap_or(0.0))).collect())
        .collect();
    let pts = lines.iter().flatten().copied().chain(
        pairs.iter().flat_map(|(a, b)| [a, b]).map(|v| (v[0], v.get(1).copied().unwrap_or(0.0))),
    );
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
    }
    if !lo.0.is_finite() {
        (lo, hi) = ((-1.0, -1.0), (1.0, 1.0));
    }
    let pad = |a: f64, b: f64| 0.05 * (b - a).max(1e-9);
    let (px, py) = (pad(lo.0, hi.0), pad(lo.1, hi.1));
    let mut svg = Svg::new(560.0, 560.0, (lo.0 - px, hi.0 + px), (lo.1 - py, hi.1 + py));
    for line in &lines {
        svg.polyline(line, "#3367d6", 1.0);
    }
    for (a, b) in pairs {
        svg.circle((a[0], a.get(1).copied().unwrap_or(0.0)), 3.0, "#999999");
        svg.circle((b[0], b.get(1).copied().unwrap_or(0.0)), 3.0, "#d93025");
    }
    svg.axes("x0", "x1");
    svg.finish()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_corners_and_escapes() {
        let mut svg = Svg::new(200.0, 100.0, (0.0, 1.0), (0.0, 1.0));
        assert_eq!(svg.px(0.0), 40.0);
        assert_eq!(svg.px(1.0), 160.0);
        assert_eq!(svg.py(0.0), 60.0);
        assert_eq!(svg.py(1.0), 40.0);
        svg.text((0.5, 0.5), "δ < τ²/2 & more");
        svg.polyline(&[(0.0, 0.0), (f64::NAN, 0.0), (0.2, 0.2), (0.4, 0.1)], "red", 1.0);
        let out = svg.finish();
        assert!(out.starts_with("<svg") && out.trim_end().ends_with("</svg>"));
        assert!(out.contains("&lt;") && out.contains("&amp;"));
        assert_eq!(out.matches("<polyline").count(), 1);
    }

    #[test]
    fn portrait_draws_every_start() {
        let f = crate::wicfield::LinearField(crate::densela::DenseMatrix::scaled_identity(2, -1.0));
        let starts = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]];
        let pairs = vec![(vec![1.0, 1.0], vec![0.3, 0.3])];
        let out = phase_portrait(&f, &starts, 1.0, 50, &pairs);
        assert_eq!(out.matches("<polyline").count(), 3);
        assert_eq!(out.matches("<circle").count(), 2);
    }
}
