//! Minimal SVG line and scatter charts.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

#[derive(Debug, Clone)]
enum Layer {
    Points { xy: Vec<(f64, f64)>, color: String, radius: f64 },
    Line { xy: Vec<(f64, f64)>, color: String, dashed: bool },
    Band { lower: Vec<(f64, f64)>, upper: Vec<(f64, f64)>, color: String },
}

/// A chart with fixed data ranges. Coordinates outside the ranges are drawn
/// unclipped.
#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    layers: Vec<Layer>,
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Chart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_range: widen(x_range),
            y_range: widen(y_range),
            layers: Vec::new(),
        }
    }

    /// Ranges taken from the data, padded by 5%.
    pub fn fitted(title: &str, x_label: &str, y_label: &str, data: &[(f64, f64)]) -> Self {
        let span = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            let pad = 0.05 * (hi - lo).max(1e-12);
            (lo - pad, hi + pad)
        };
        let xr = span(&mut data.iter().map(|p| p.0));
        let yr = span(&mut data.iter().map(|p| p.1));
        Chart::new(title, x_label, y_label, xr, yr)
    }

    pub fn points(mut self, xy: Vec<(f64, f64)>, color: &str, radius: f64) -> Self {
        self.layers.push(Layer::Points { xy, color: color.into(), radius });
        self
    }

    pub fn line(mut self, xy: Vec<(f64, f64)>, color: &str) -> Self {
        self.layers.push(Layer::Line { xy, color: color.into(), dashed: false });
        self
    }

    pub fn dashed_line(mut self, xy: Vec<(f64, f64)>, color: &str) -> Self {
        self.layers.push(Layer::Line { xy, color: color.into(), dashed: true });
        self
    }

    pub fn band(mut self, lower: Vec<(f64, f64)>, upper: Vec<(f64, f64)>, color: &str) -> Self {
        self.layers.push(Layer::Band { lower, upper, color: color.into() });
        self
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn path(&self, xy: &[(f64, f64)]) -> String {
        let mut s = String::new();
        for (x, y) in xy {
            let _ = write!(s, "{:.2},{:.2} ", self.px(*x), self.py(*y));
        }
        s.trim_end().to_string()
    }

    pub fn to_svg(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let (x0, x1) = (MARGIN, WIDTH - MARGIN);
        let (y0, y1) = (HEIGHT - MARGIN, MARGIN);
        let _ = writeln!(
            s,
            r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let xv = self.x_range.0 + t * (self.x_range.1 - self.x_range.0);
            let yv = self.y_range.0 + t * (self.y_range.1 - self.y_range.0);
            let _ = writeln!(
                s,
                r#"<text class="xtick" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                self.px(xv),
                y0 + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text class="ytick" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 6.0,
                self.py(yv) + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            MARGIN / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for layer in &self.layers {
            match layer {
                Layer::Points { xy, color, radius } => {
                    let _ = writeln!(s, r#"<g fill="{color}" fill-opacity="0.6">"#);
                    for (x, y) in xy {
                        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}"/>"#, self.px(*x), self.py(*y));
                    }
                    let _ = writeln!(s, "</g>");
                }
                Layer::Line { xy, color, dashed } => {
                    let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                        self.path(xy)
                    );
                }
                Layer::Band { lower, upper, color } => {
                    let mut ring: Vec<(f64, f64)> = lower.clone();
                    ring.extend(upper.iter().rev());
                    let _ = writeln!(
                        s,
                        r#"<polygon fill="{color}" fill-opacity="0.25" stroke="none" points="{}"/>"#,
                        self.path(&ring)
                    );
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
