//! SVG rendering of flow polylines.
//!
//! Each track is drawn as a coloured polyline with a square marking its first
//! position and a disc marking its last. Image y grows downwards, matching
//! pixel coordinates, so no flip is applied.

use std::fmt::Write as _;
use std::io::Write;

use super::FormatError;
use crate::analytics::{Bounds, FlowPolyline};

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

const MARGIN: f64 = 10.0;
const MARKER_SIZE: f64 = 6.0;

pub fn track_color(track_id: u32) -> &'static str {
    PALETTE[track_id as usize % PALETTE.len()]
}

/// Renders the polylines into a standalone SVG document. The view box is the
/// given bounds plus a fixed margin, so equal inputs give identical bytes.
pub fn render_flow_svg(polylines: &[FlowPolyline], bounds: &Bounds) -> String {
    let vx = bounds.min_x - MARGIN;
    let vy = bounds.min_y - MARGIN;
    let vw = bounds.width() + 2.0 * MARGIN;
    let vh = bounds.height() + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{vx} {vy} {vw} {vh}" width="{vw}" height="{vh}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{vx}" y="{vy}" width="{vw}" height="{vh}" fill="white"/>"#
    );
    let half = MARKER_SIZE / 2.0;
    for p in polylines {
        let color = track_color(p.track_id);
        let _ = writeln!(s, r#"<g id="track-{}">"#, p.track_id);
        let mut points = String::new();
        for (k, v) in p.vertices.iter().enumerate() {
            if k > 0 {
                points.push(' ');
            }
            let _ = write!(points, "{},{}", v.x, v.y);
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{MARKER_SIZE}" height="{MARKER_SIZE}" fill="black"/>"#,
            p.marker_start.x - half,
            p.marker_start.y - half
        );
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{}" r="{half}" fill="black"/>"#,
            p.marker_end.x, p.marker_end.y
        );
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    s
}

pub fn write_flow_svg<W: Write>(
    out: &mut W,
    polylines: &[FlowPolyline],
    bounds: &Bounds,
) -> Result<(), FormatError> {
    out.write_all(render_flow_svg(polylines, bounds).as_bytes())
        .map_err(FormatError::Write)
}
