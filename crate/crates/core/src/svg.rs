//! Static SVG 1.1 line plots and heat maps.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 110.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: &'a [(f64, f64)],
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Frame {
            x: widen(x),
            y: widen(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        let w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        MARGIN_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * w
    }

    fn py(&self, y: f64) -> f64 {
        let h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        HEIGHT - MARGIN_BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * h
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(svg: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1) = (frame.px(frame.x.0), frame.px(frame.x.1));
    let (y0, y1) = (frame.py(frame.y.0), frame.py(frame.y.1));
    let _ = writeln!(
        svg,
        r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = frame.x.0 + f * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + f * (frame.y.1 - frame.y.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            frame.px(xv),
            y0 + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            frame.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        0.5 * (x0 + x1),
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1),
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Line plot of one or more series.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let mut xb = bounds(all().map(|p| p.0));
    let mut yb = bounds(all().map(|p| p.1));
    if !xb.0.is_finite() {
        xb = (0.0, 1.0);
    }
    if !yb.0.is_finite() {
        yb = (0.0, 1.0);
    }
    let frame = Frame::new(xb, yb);
    let mut svg = String::new();
    open(&mut svg, title);
    axes(&mut svg, &frame, x_label, y_label);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = MARGIN_TOP + 16.0 * k as f64 + 8.0;
        let lx = WIDTH - MARGIN_RIGHT + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 18.0,
            lx + 22.0,
            ly + 4.0,
            escape(s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Blue-to-yellow ramp for t ∈ [0, 1].
fn color(t: f64) -> String {
    let stops = [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let k = (t.floor() as usize).min(stops.len() - 2);
    let f = t - k as f64;
    let mix = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    let (a, b) = (stops[k], stops[k + 1]);
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Heat map of `values[i][j]` at `(xs[i], ys[j])`, with the boundary between
/// cells where `mask` differs drawn as a contour. Non-finite cells are grey.
pub fn heat_map(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    values: &[Vec<f64>],
    mask: &[Vec<bool>],
) -> String {
    let half = |v: &[f64]| {
        if v.len() > 1 {
            0.5 * (v[1] - v[0])
        } else {
            0.5
        }
    };
    let (hx, hy) = (half(xs), half(ys));
    let frame = Frame::new(
        (xs[0] - hx, xs[xs.len() - 1] + hx),
        (ys[0] - hy, ys[ys.len() - 1] + hy),
    );
    let (lo, hi) = bounds(values.iter().flatten().copied());
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut svg = String::new();
    open(&mut svg, title);
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let v = values[i][j];
            let fill = if v.is_finite() {
                color((v - lo) / span)
            } else {
                "#999999".to_string()
            };
            let (px0, px1) = (frame.px(x - hx), frame.px(x + hx));
            let (py0, py1) = (frame.py(y + hy), frame.py(y - hy));
            let _ = writeln!(
                svg,
                r#"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="none"/>"#,
                px1 - px0 + 0.3,
                py1 - py0 + 0.3
            );
        }
    }
    let mut contour = String::new();
    for i in 0..xs.len() {
        for j in 0..ys.len() {
            if i + 1 < xs.len() && mask[i][j] != mask[i + 1][j] {
                let x = frame.px(0.5 * (xs[i] + xs[i + 1]));
                let _ = write!(
                    contour,
                    "M{x:.2},{:.2}V{:.2}",
                    frame.py(ys[j] - hy),
                    frame.py(ys[j] + hy)
                );
            }
            if j + 1 < ys.len() && mask[i][j] != mask[i][j + 1] {
                let y = frame.py(0.5 * (ys[j] + ys[j + 1]));
                let _ = write!(
                    contour,
                    "M{:.2},{y:.2}H{:.2}",
                    frame.px(xs[i] - hx),
                    frame.px(xs[i] + hx)
                );
            }
        }
    }
    if !contour.is_empty() {
        let _ = writeln!(
            svg,
            r#"<path d="{contour}" fill="none" stroke="white" stroke-width="1.5"/>"#
        );
    }
    axes(&mut svg, &frame, x_label, y_label);

    // colour bar
    let bx = WIDTH - MARGIN_RIGHT + 20.0;
    let (top, bottom) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let steps = 32;
    for k in 0..steps {
        let f0 = k as f64 / steps as f64;
        let y = bottom - (f0 + 1.0 / steps as f64) * (bottom - top);
        let _ = writeln!(
            svg,
            r#"<rect x="{bx:.2}" y="{y:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            (bottom - top) / steps as f64 + 0.3,
            color(f0 + 0.5 / steps as f64)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}">{}</text><text x="{:.2}" y="{:.2}">{}</text>"#,
        bx + 20.0,
        top + 10.0,
        tick(if hi.is_finite() { hi } else { 1.0 }),
        bx + 20.0,
        bottom,
        tick(if lo.is_finite() { lo } else { 0.0 })
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_well_formed() {
        let pts = [(0.0, 1.0), (1.0, 0.5), (2.0, 0.25)];
        let svg = line_plot("survival", "t", "|a|", &[Series { name: "a<b", points: &pts }]);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn heat_map_draws_boundary() {
        let xs = [0.0, 1.0];
        let ys = [0.0, 1.0, 2.0];
        let values = vec![vec![0.0, 0.0, f64::NAN], vec![1.0, 2.0, 3.0]];
        let mask = vec![vec![false, false, false], vec![true, true, true]];
        let svg = heat_map("N", "kappa", "omega_c", &xs, &ys, &values, &mask);
        assert!(svg.contains("<path d=\"M"));
        assert!(svg.contains("#999999"));
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
    }
}
