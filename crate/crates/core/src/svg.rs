//! Self-contained SVG figures: nodal pictures and log-log scatter plots.

use std::fmt::Write as _;

use crate::grid::GridDomain;
use crate::nodal::{inner_radius, NodalDecomposition, NodalError, Sign};

const CANVAS: f64 = 600.0;
const MARGIN: f64 = 20.0;

fn fill(sign: Sign, id: usize) -> String {
    // Alternate two tones per sign so adjacent same-sign domains stay distinguishable.
    let shade = if id % 2 == 0 { 0 } else { 30 };
    match sign {
        Sign::Positive => format!("rgb({},{},{})", 225 - shade, 90, 80),
        Sign::Negative => format!("rgb({},{},{})", 70, 120, 215 - shade),
    }
}

/// 2D nodal picture: one path per nodal domain (cells of its nodes, merged
/// along grid columns), coloured by sign, with the inscribed circle of each
/// domain drawn at its inner-radius centre.
pub fn nodal_svg(dec: &NodalDecomposition, d: &GridDomain) -> Result<String, NodalError> {
    if d.dim() != 2 {
        return Err(NodalError::Unsupported("nodal pictures are two-dimensional".into()));
    }
    let (nx, ny) = (d.shape()[0], d.shape()[1]);
    let px = (CANVAS - 2.0 * MARGIN) / nx.max(ny) as f64;
    let (w, h) = (nx as f64 * px + 2.0 * MARGIN, ny as f64 * px + 2.0 * MARGIN);
    let sx = |i: f64| MARGIN + i * px;
    let sy = |j: f64| MARGIN + (ny as f64 - j) * px;

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1}" height="{h:.1}" viewBox="0 0 {w:.1} {h:.1}">"#);
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w:.1}" height="{h:.1}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb(235,235,235)"/>"#,
        MARGIN,
        MARGIN,
        nx as f64 * px,
        ny as f64 * px
    );
    for dom in dec.domains() {
        let mut member = vec![false; d.node_count()];
        for &n in &dom.nodes {
            member[n] = true;
        }
        let mut path = String::new();
        for i in 0..nx {
            let mut j = 0;
            while j < ny {
                if !member[i * ny + j] {
                    j += 1;
                    continue;
                }
                let start = j;
                while j < ny && member[i * ny + j] {
                    j += 1;
                }
                let _ = write!(
                    path,
                    "M{:.2} {:.2}h{:.2}v{:.2}h{:.2}z",
                    sx(i as f64),
                    sy(j as f64),
                    px,
                    (j - start) as f64 * px,
                    -px
                );
            }
        }
        let _ = writeln!(out, r#"<path id="domain-{}" fill="{}" d="{}"/>"#, dom.id, fill(dom.sign, dom.id), path);
    }
    for dom in dec.domains() {
        let ir = inner_radius(dec, dom.id, d)?;
        let c = d.coords(ir.center);
        let r = ir.euclidean_radius / d.spacing() * px;
        let (cx, cy) = (sx(c[0] as f64 + 0.5), sy(c[1] as f64 + 0.5));
        let _ = writeln!(
            out,
            r#"<circle class="inscribed" cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="none" stroke="black" stroke-width="1"/>"#
        );
        let _ = writeln!(out, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="1.5" fill="black"/>"#);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Log-log scatter of `(x, y)` with the line `log y = slope·log x + intercept`.
pub fn loglog_svg(points: &[(f64, f64)], slope: f64, intercept: f64, title: &str, xlabel: &str, ylabel: &str) -> String {
    let (w, h) = (640.0, 480.0);
    let (l, r, t, b) = (70.0, 20.0, 40.0, 50.0);
    let logs: Vec<(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let (lo, hi) = logs.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else if lo.is_finite() {
            (lo - 1.0, lo + 1.0)
        } else {
            (0.0, 1.0)
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let px = |x: f64| l + (x - x0) / (x1 - x0) * (w - l - r);
    let py = |y: f64| h - b - (y - y0) / (y1 - y0) * (h - t - b);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - l - r,
        h - t - b
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3e}</text>"#, px(fx), h - b + 16.0, fx.exp());
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3e}</text>"#, l - 4.0, py(fy) + 4.0, fy.exp());
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + w - r) / 2.0, h - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (t + h - b) / 2.0,
        escape(ylabel)
    );
    for &(x, y) in &logs {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="rgb(50,90,200)"/>"#, px(x), py(y));
    }
    let _ = writeln!(
        out,
        r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="rgb(200,40,40)" stroke-width="1.5"/>"#,
        px(x0),
        py(slope * x0 + intercept),
        px(x1),
        py(slope * x1 + intercept)
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" fill="rgb(200,40,40)">fitted slope {:.4}</text>"#, l + 10.0, t + 18.0, slope);
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
