//! Minimal log-log SVG plot of errors against the mesh size.

use std::fmt::Write;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 70.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Plots the series and dashed guide lines of the given slopes, anchored at
/// the finest point of the first series.
pub fn loglog_svg(title: &str, series: &[Series], slopes: &[u32]) -> String {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).filter(|p| p.0 > 0.0 && p.1 > 0.0).collect();
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="30" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
    let (x0, x1) = (lx.iter().cloned().fold(f64::MAX, f64::min).floor(), lx.iter().cloned().fold(f64::MIN, f64::max).ceil());
    let (y0, y1) = (ly.iter().cloned().fold(f64::MAX, f64::min).floor(), ly.iter().cloned().fold(f64::MIN, f64::max).ceil());
    let (x1, y1) = (if x1 > x0 { x1 } else { x0 + 1.0 }, if y1 > y0 { y1 } else { y0 + 1.0 });
    let sx = |v: f64| MARGIN + (v.log10() - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |v: f64| H - MARGIN - (v.log10() - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for d in x0 as i32..=x1 as i32 {
        let x = sx(10f64.powi(d));
        let _ = writeln!(svg, r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{MARGIN}" stroke="lightgray"/>"#, H - MARGIN);
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">1e{d}</text>"#, H - MARGIN + 18.0);
    }
    for d in y0 as i32..=y1 as i32 {
        let y = sy(10f64.powi(d));
        let _ = writeln!(svg, r#"<line x1="{MARGIN}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="lightgray"/>"#, W - MARGIN);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="end">1e{d}</text>"#, MARGIN - 6.0, y + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">h</text>"#, W / 2.0, H - 20.0);
    let _ = writeln!(svg, r#"<text x="20" y="{}" font-family="sans-serif" font-size="14" transform="rotate(-90 20 {})" text-anchor="middle">error</text>"#, H / 2.0, H / 2.0);
    if let Some(anchor) = series.first().and_then(|s| s.points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).min_by(|a, b| a.0.total_cmp(&b.0))) {
        let hmax = pts.iter().map(|p| p.0).fold(f64::MIN, f64::max);
        for (i, &p) in slopes.iter().enumerate() {
            let e_end = anchor.1 * (hmax / anchor.0).powi(p as i32);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="6,4" clip-path="none"/>"#,
                sx(anchor.0),
                sy(anchor.1 * 0.5),
                sx(hmax),
                sy(e_end * 0.5)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" fill="gray">O(h^{p})</text>"#,
                sx(hmax) + 4.0,
                sy(e_end * 0.5) + 12.0 * i as f64
            );
        }
    }
    for (i, s) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let path: Vec<String> = s.points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| format!("{:.1},{:.1}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, path.join(" "));
        for p in s.points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0) {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{c}"/>"#, sx(p.0), sy(p.1));
        }
        let ly = MARGIN + 20.0 + 18.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/>"#, MARGIN + 10.0, MARGIN + 30.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#, MARGIN + 36.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
