//! Minimal SVG charts: reference as a line, network values as markers.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 50.0;
const MAX_MARKERS: usize = 40;

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + hi.abs()) {
        let pad = 0.05 * (1.0 + hi.abs());
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Line chart of `reference` with `network` markers over `abscissa`.
pub fn profile_svg(title: &str, xlabel: &str, ylabel: &str, abscissa: &[f64], reference: &[f64], network: &[f64]) -> String {
    let (x0, x1) = range(abscissa.iter().copied());
    let (y0, y1) = range(reference.iter().chain(network).copied());
    let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{ML}" y="{MT}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - ML - MR,
        H - MT - MB
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (gx, gy) = (px(xv), py(yv));
        let _ = writeln!(s, r#"<line x1="{gx:.1}" y1="{}" x2="{gx:.1}" y2="{}" stroke="black"/>"#, H - MB, H - MB + 5.0);
        let _ = writeln!(s, r#"<text x="{gx:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#, H - MB + 18.0, tick(xv));
        let _ = writeln!(s, r#"<line x1="{}" y1="{gy:.1}" x2="{ML}" y2="{gy:.1}" stroke="black"/>"#, ML - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#, ML - 8.0, gy + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#, (ML + W - MR) / 2.0, H - 10.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {0})">{1}</text>"#,
        (MT + H - MB) / 2.0,
        escape(ylabel)
    );
    let pts: Vec<String> = abscissa.iter().zip(reference).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, pts.join(" "));
    let stride = network.len().div_ceil(MAX_MARKERS).max(1);
    for (k, (&x, &y)) in abscissa.iter().zip(network).enumerate() {
        if k % stride == 0 || k + 1 == network.len() {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="none" stroke="crimson" stroke-width="1.5"/>"#, px(x), py(y));
        }
    }
    let lx = W - MR - 130.0;
    let _ = writeln!(s, r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="steelblue" stroke-width="2"/>"#, MT + 16.0, lx + 24.0, MT + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">reference</text>"#, lx + 30.0, MT + 20.0);
    let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="3.5" fill="none" stroke="crimson" stroke-width="1.5"/>"#, lx + 12.0, MT + 34.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">network</text>"#, lx + 30.0, MT + 38.0);
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_contains_line_and_markers() {
        let x: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let r: Vec<f64> = x.iter().map(|v| v * v).collect();
        let svg = profile_svg("T_r at t = 0.1", "x", "T_r", &x, &r, &r);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        let markers = svg.matches("<circle").count() - 1;
        assert!((30..=MAX_MARKERS + 1).contains(&markers), "{markers}");
    }

    #[test]
    fn flat_and_empty_data_do_not_produce_nan() {
        let svg = profile_svg("flat", "t", "T_e", &[0.0, 1.0], &[2.0, 2.0], &[2.0, 2.0]);
        assert!(!svg.contains("NaN"));
        let svg = profile_svg("empty", "t", "T_e", &[], &[], &[]);
        assert!(!svg.contains("NaN"));
    }
}
