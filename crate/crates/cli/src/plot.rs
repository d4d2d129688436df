//! Minimal hand-rolled SVG scatter plots: orthographic xy/xz projections of
//! the original and reconstructed points, and the bottleneck image (a strip
//! per component for 1-d bottlenecks, a plane scatter for 2-d). Coordinates
//! are written with fixed precision so identical runs produce identical
//! bytes.

use manifold_ae::geometry::Vec3;
use manifold_ae::PointSet;
use std::fmt::Write;

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];
const ORIGINAL_COLOR: &str = "#b0b0b0";

fn component_color(id: usize) -> &'static str {
    COLORS[id % COLORS.len()]
}

#[derive(Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Range { lo: -1.0, hi: 1.0 };
        }
        Range { lo, hi }.padded()
    }

    /// Pads by 8% and widens degenerate ranges so mapping never divides by
    /// zero.
    fn padded(self) -> Range {
        let span = self.hi - self.lo;
        let pad = if span <= 1e-12 { 1.0 } else { 0.08 * span };
        Range {
            lo: self.lo - pad,
            hi: self.hi + pad,
        }
    }

    /// Grows to `span` around the center (for equal-aspect panels).
    fn with_span(self, span: f64) -> Range {
        let mid = 0.5 * (self.lo + self.hi);
        Range {
            lo: mid - 0.5 * span,
            hi: mid + 0.5 * span,
        }
    }

    fn span(self) -> f64 {
        self.hi - self.lo
    }

    fn map(self, v: f64, px_lo: f64, px_hi: f64) -> f64 {
        px_lo + (v - self.lo) / (self.hi - self.lo) * (px_hi - px_lo)
    }
}

const PANEL: f64 = 360.0;
const MARGIN: f64 = 45.0;

fn svg_open(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r#"<rect width="{width:.0}" height="{height:.0}" fill="white"/>"#);
}

fn circle(out: &mut String, cx: f64, cy: f64, r: f64, fill: &str, opacity: f64) {
    let _ = writeln!(
        out,
        r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.1}" fill="{fill}" fill-opacity="{opacity:.2}"/>"#
    );
}

fn text(out: &mut String, x: f64, y: f64, size: f64, anchor: &str, body: &str) {
    let _ = writeln!(
        out,
        r##"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="{size:.0}" fill="#333" text-anchor="{anchor}">{body}</text>"##
    );
}

/// One square panel projecting 3-d points onto the axes picked by `proj`.
fn projection_panel(
    out: &mut String,
    x0: f64,
    y0: f64,
    title: &str,
    original: &[(usize, Vec3)],
    decoded: &[(usize, Vec3)],
    proj: fn(&Vec3) -> (f64, f64),
) {
    let everything = original.iter().chain(decoded.iter()).map(|(_, p)| proj(p));
    let hs: Vec<(f64, f64)> = everything.collect();
    let mut hr = Range::of(hs.iter().map(|&(h, _)| h));
    let mut vr = Range::of(hs.iter().map(|&(_, v)| v));
    let span = hr.span().max(vr.span());
    hr = hr.with_span(span);
    vr = vr.with_span(span);

    let _ = writeln!(
        out,
        r##"<rect x="{x0:.1}" y="{y0:.1}" width="{PANEL:.1}" height="{PANEL:.1}" fill="none" stroke="#444" stroke-width="1"/>"##
    );
    text(out, x0 + PANEL / 2.0, y0 - 10.0, 14.0, "middle", title);
    text(out, x0, y0 + PANEL + 16.0, 10.0, "start", &format!("{:.3}", hr.lo));
    text(out, x0 + PANEL, y0 + PANEL + 16.0, 10.0, "end", &format!("{:.3}", hr.hi));

    for (_, p) in original {
        let (h, v) = proj(p);
        circle(
            out,
            hr.map(h, x0, x0 + PANEL),
            vr.map(v, y0 + PANEL, y0),
            2.0,
            ORIGINAL_COLOR,
            0.6,
        );
    }
    for (id, p) in decoded {
        let (h, v) = proj(p);
        circle(
            out,
            hr.map(h, x0, x0 + PANEL),
            vr.map(v, y0 + PANEL, y0),
            2.0,
            component_color(*id),
            0.8,
        );
    }
}

/// xy and xz projections of the original points (gray) and their
/// reconstructions (colored by component).
pub fn decoded_svg(points: &PointSet, decoded: &[Vec3]) -> String {
    let original: Vec<(usize, Vec3)> = points
        .points
        .iter()
        .map(|p| (p.component_id, p.position))
        .collect();
    let decoded: Vec<(usize, Vec3)> = points
        .points
        .iter()
        .zip(decoded)
        .map(|(p, d)| (p.component_id, *d))
        .collect();

    let width = 2.0 * PANEL + 3.0 * MARGIN;
    let height = PANEL + 2.0 * MARGIN + 20.0;
    let mut out = String::new();
    svg_open(&mut out, width, height);
    projection_panel(
        &mut out,
        MARGIN,
        MARGIN,
        "xy projection",
        &original,
        &decoded,
        |p| (p.x, p.y),
    );
    projection_panel(
        &mut out,
        2.0 * MARGIN + PANEL,
        MARGIN,
        "xz projection",
        &original,
        &decoded,
        |p| (p.x, p.z),
    );
    text(
        &mut out,
        MARGIN,
        height - 8.0,
        11.0,
        "start",
        "gray: original points; colored: reconstructions by component",
    );
    out.push_str("</svg>\n");
    out
}

/// The bottleneck image: one horizontal strip per component for a 1-d
/// bottleneck (shared scale, so interval overlap is visible), or a single
/// (u0, u1) scatter for a 2-d bottleneck.
pub fn bottleneck_svg(points: &PointSet, latents: &[Vec<f64>]) -> String {
    let latent_dim = latents.first().map_or(1, Vec::len);
    if latent_dim >= 2 {
        return bottleneck_plane_svg(points, latents);
    }

    let n_components = points
        .points
        .iter()
        .map(|p| p.component_id + 1)
        .max()
        .unwrap_or(1);
    let range = Range::of(latents.iter().filter_map(|z| z.first().copied()));
    let width = 2.0 * PANEL + 3.0 * MARGIN;
    let row_gap = 46.0;
    let height = 2.0 * MARGIN + row_gap * n_components as f64;
    let (x_lo, x_hi) = (140.0, width - MARGIN);

    let mut out = String::new();
    svg_open(&mut out, width, height);
    text(&mut out, width / 2.0, 24.0, 14.0, "middle", "bottleneck image by component");
    for comp in 0..n_components {
        let y = MARGIN + row_gap * (comp as f64 + 0.5);
        let _ = writeln!(
            out,
            r##"<line x1="{x_lo:.1}" y1="{y:.1}" x2="{x_hi:.1}" y2="{y:.1}" stroke="#ccc" stroke-width="1"/>"##
        );
        text(&mut out, x_lo - 12.0, y + 4.0, 11.0, "end", &format!("component {comp}"));
    }
    for (p, z) in points.points.iter().zip(latents) {
        let Some(&u) = z.first() else { continue };
        let y = MARGIN + row_gap * (p.component_id as f64 + 0.5);
        circle(
            &mut out,
            range.map(u, x_lo, x_hi),
            y,
            2.5,
            component_color(p.component_id),
            0.55,
        );
    }
    let y_axis = height - 14.0;
    text(&mut out, x_lo, y_axis, 10.0, "start", &format!("{:.3}", range.lo));
    text(&mut out, x_hi, y_axis, 10.0, "end", &format!("{:.3}", range.hi));
    out.push_str("</svg>\n");
    out
}

fn bottleneck_plane_svg(points: &PointSet, latents: &[Vec<f64>]) -> String {
    let hr = Range::of(latents.iter().map(|z| z[0]));
    let vr = Range::of(latents.iter().map(|z| z[1]));
    let span = hr.span().max(vr.span());
    let (hr, vr) = (hr.with_span(span), vr.with_span(span));
    let width = PANEL + 2.0 * MARGIN;
    let height = PANEL + 2.0 * MARGIN + 20.0;

    let mut out = String::new();
    svg_open(&mut out, width, height);
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN:.1}" y="{MARGIN:.1}" width="{PANEL:.1}" height="{PANEL:.1}" fill="none" stroke="#444" stroke-width="1"/>"##
    );
    text(&mut out, MARGIN + PANEL / 2.0, MARGIN - 10.0, 14.0, "middle", "bottleneck image (u0, u1)");
    for (p, z) in points.points.iter().zip(latents) {
        circle(
            &mut out,
            hr.map(z[0], MARGIN, MARGIN + PANEL),
            vr.map(z[1], MARGIN + PANEL, MARGIN),
            2.0,
            component_color(p.component_id),
            0.7,
        );
    }
    text(&mut out, MARGIN, MARGIN + PANEL + 16.0, 10.0, "start", &format!("{:.3}", hr.lo));
    text(&mut out, MARGIN + PANEL, MARGIN + PANEL + 16.0, 10.0, "end", &format!("{:.3}", hr.hi));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use manifold_ae::geometry::SamplePoint;

    fn sample_points(n: usize) -> PointSet {
        PointSet::new(
            (0..n)
                .map(|i| SamplePoint {
                    component_id: i % 2,
                    params: vec![],
                    position: Vec3::new(i as f64 * 0.1, (i as f64 * 0.3).sin(), 0.2),
                })
                .collect(),
        )
    }

    #[test]
    fn decoded_svg_is_wellformed_and_deterministic() {
        let points = sample_points(10);
        let decoded: Vec<Vec3> = points.positions().map(|p| p + Vec3::new(0.01, 0.0, 0.0)).collect();
        let svg = decoded_svg(&points, &decoded);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        // Two panels x (10 original + 10 decoded) circles.
        assert_eq!(svg.matches("<circle").count(), 40);
        assert!(svg.contains("#1f77b4"));
        assert!(svg.contains("#d62728"));
        assert!(!svg.contains("NaN"));
        assert_eq!(svg, decoded_svg(&points, &decoded));
    }

    #[test]
    fn bottleneck_svg_handles_one_and_two_dims() {
        let points = sample_points(8);
        let one_d: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.1]).collect();
        let svg = bottleneck_svg(&points, &one_d);
        assert_eq!(svg.matches("<circle").count(), 8);
        assert!(svg.contains("component 0"));
        assert!(svg.contains("component 1"));

        let two_d: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 1.0 - i as f64]).collect();
        let svg = bottleneck_svg(&points, &two_d);
        assert_eq!(svg.matches("<circle").count(), 8);
        assert!(svg.contains("u0, u1"));
    }

    #[test]
    fn degenerate_inputs_do_not_produce_nan_coordinates() {
        let points = PointSet::new(vec![SamplePoint {
            component_id: 0,
            params: vec![],
            position: Vec3::new(0.5, 0.5, 0.5),
        }]);
        let svg = decoded_svg(&points, &[Vec3::new(0.5, 0.5, 0.5)]);
        assert!(!svg.contains("NaN"));
        let svg = bottleneck_svg(&points, &[vec![0.25]]);
        assert!(!svg.contains("NaN"));
    }
}
