//! Minimal SVG rendering for terminal profiles and heat maps.

use std::fmt::Write;

use super::eval::FieldStats;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 120.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1) = (f.px(f.x.0), f.px(f.x.1));
    let (y0, y1) = (f.py(f.y.0), f.py(f.y.1));
    let _ = writeln!(out, r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.px(xv),
            y0 + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            f.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn polyline(f: &Frame, xs: &[f64], ys: &[f64]) -> String {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A horizontal target segment `[lo, hi]` at height `desired`.
#[derive(Clone, Copy, Debug)]
pub struct TargetMark {
    pub lo: f64,
    pub hi: f64,
    pub desired: f64,
}

/// Mean terminal profiles with shaded `±2 sigma` bands.
pub fn profile_svg(title: &str, xs: &[f64], controlled: &FieldStats, uncontrolled: &FieldStats, targets: &[TargetMark]) -> String {
    let series = [(controlled, "#1f77b4", "controlled"), (uncontrolled, "#d62728", "uncontrolled")];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (s, _, _) in &series {
        for (m, sd) in s.mean.iter().zip(&s.std) {
            lo = lo.min(m - 2.0 * sd);
            hi = hi.max(m + 2.0 * sd);
        }
    }
    for t in targets {
        lo = lo.min(t.desired);
        hi = hi.max(t.desired);
    }
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let f = Frame {
        x: (xs[0], xs[xs.len() - 1]),
        y: (lo - pad, hi + pad),
    };
    let mut out = String::new();
    header(&mut out, title);
    for (i, (s, color, name)) in series.iter().enumerate() {
        let upper: Vec<f64> = s.mean.iter().zip(&s.std).map(|(m, sd)| m + 2.0 * sd).collect();
        let lower: Vec<f64> = s.mean.iter().zip(&s.std).map(|(m, sd)| m - 2.0 * sd).collect();
        let mut band = polyline(&f, xs, &upper);
        let rev_x: Vec<f64> = xs.iter().rev().copied().collect();
        let rev_l: Vec<f64> = lower.iter().rev().copied().collect();
        band.push(' ');
        band.push_str(&polyline(&f, &rev_x, &rev_l));
        let _ = writeln!(out, r#"<polygon points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#);
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            polyline(&f, xs, &s.mean)
        );
        let ly = TOP + 20.0 + 18.0 * i as f64;
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, W - RIGHT + 10.0, W - RIGHT + 30.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{name}</text>"#, W - RIGHT + 34.0, ly + 4.0);
    }
    for t in targets {
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="3"/>"#,
            f.px(t.lo),
            f.py(t.desired),
            f.px(t.hi),
            f.py(t.desired)
        );
    }
    if !targets.is_empty() {
        let ly = TOP + 56.0;
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="black" stroke-width="3"/>"#, W - RIGHT + 10.0, W - RIGHT + 30.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">target</text>"#, W - RIGHT + 34.0, ly + 4.0);
    }
    axes(&mut out, &f, "x", "terminal value");
    out.push_str("</svg>\n");
    out
}

fn color(t: f64) -> String {
    // blue -> white -> red
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (40.0 + s * 215.0, 80.0 + s * 175.0, 200.0 + s * 55.0)
    } else {
        let s = (t - 0.5) / 0.5;
        (255.0, 255.0 - s * 200.0, 255.0 - s * 215.0)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

/// Heat map of `values[row * cols + col]` drawn with one rectangle per cell.
/// Row 0 is at the bottom.
#[allow(clippy::too_many_arguments)]
pub fn heatmap_svg(
    title: &str,
    values: &[f64],
    rows: usize,
    cols: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
    x_label: &str,
    y_label: &str,
) -> String {
    let lo = values.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let f = Frame { x: x_range, y: y_range };
    let cw = (f.px(x_range.1) - f.px(x_range.0)) / cols as f64;
    let ch = (f.py(y_range.0) - f.py(y_range.1)) / rows as f64;
    let mut out = String::new();
    header(&mut out, title);
    for r in 0..rows {
        for c in 0..cols {
            let v = values[r * cols + c];
            let x = f.px(x_range.0) + c as f64 * cw;
            let y = f.py(y_range.0) - (r + 1) as f64 * ch;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cw + 0.3,
                ch + 0.3,
                color((v - lo) / span)
            );
        }
    }
    // color bar
    let bx = W - RIGHT + 20.0;
    let (top, bottom) = (f.py(y_range.1), f.py(y_range.0));
    let steps = 50;
    for k in 0..steps {
        let t = k as f64 / (steps - 1) as f64;
        let h = (bottom - top) / steps as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{bx:.2}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            bottom - (k + 1) as f64 * h,
            h + 0.3,
            color(t)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, bx + 20.0, top + 4.0, tick(hi));
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, bx + 20.0, bottom + 4.0, tick(lo));
    axes(&mut out, &f, x_label, y_label);
    out.push_str("</svg>\n");
    out
}
