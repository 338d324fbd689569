//! Static SVG figures: raw tracks, summary tracks and a point heatmap.
//!
//! Output is deterministic (fixed number formatting, id-ordered layers,
//! colors from a stable hash of the trajectory id) so figures diff cleanly.
//! Track geometry is emitted only as `<polyline points="...">`, one vertex
//! per raw sample or per summary, which makes vertex counts checkable with
//! [`count_vertices`].

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Point2, Rect, SampledTrajectory, SegmentKind, SegmentSummary, TrajId};
use crate::synth::HeatGrid;

/// World-to-pixel mapping with y pointing up in world space.
#[derive(Debug, Clone, Copy)]
struct Frame {
    bounds: Rect,
    scale: f64,
    width: f64,
    height: f64,
    margin: f64,
}

impl Frame {
    fn new(bounds: Rect, width_px: u32) -> Result<Self> {
        if width_px < 16 {
            return Err(Error::InvalidParam {
                name: "width",
                reason: format!("must be at least 16 pixels, got {width_px}"),
            });
        }
        let margin = 10.0;
        // pad degenerate extents so a single point still gets a frame
        let bounds = if bounds.width() <= 0.0 || bounds.height() <= 0.0 {
            bounds.inflate(bounds.width().max(bounds.height()).max(1.0) * 0.5)
        } else {
            bounds
        };
        let inner = width_px as f64 - 2.0 * margin;
        let scale = inner / bounds.width();
        Ok(Self {
            bounds,
            scale,
            width: width_px as f64,
            height: (bounds.height() * scale + 2.0 * margin).ceil(),
            margin,
        })
    }

    fn px(&self, p: Point2) -> (f64, f64) {
        (
            self.margin + (p.x - self.bounds.min_x) * self.scale,
            self.height - self.margin - (p.y - self.bounds.min_y) * self.scale,
        )
    }

    fn open(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(s, "<title>{}</title>", escape(title));
        let _ = writeln!(
            s,
            r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##,
            self.width, self.height
        );
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Stable color for a trajectory id (FNV-1a hash mapped to a hue).
pub fn id_color(id: &TrajId) -> String {
    let mut h: u32 = 0x811c_9dc5;
    for b in id.as_str().bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    format!("hsl({},65%,42%)", h % 360)
}

fn polyline(out: &mut String, frame: &Frame, id: &TrajId, pts: impl Iterator<Item = Point2>, class: &str) {
    let mut coords = String::new();
    for p in pts {
        let (x, y) = frame.px(p);
        if !coords.is_empty() {
            coords.push(' ');
        }
        let _ = write!(coords, "{x:.2},{y:.2}");
    }
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" data-id="{}" fill="none" stroke="{}" stroke-width="1" points="{coords}"/>"#,
        escape(id.as_str()),
        id_color(id)
    );
}

/// Every raw sample as a polyline vertex (the "full data" figure).
pub fn render_raw(trajs: &[SampledTrajectory], bounds: Rect, width_px: u32) -> Result<String> {
    let frame = Frame::new(bounds, width_px)?;
    let mut out = frame.open(&format!("Full data; {} trajectories", trajs.len()));
    let mut sorted: Vec<&SampledTrajectory> = trajs.iter().collect();
    sorted.sort_by(|a, b| a.id().cmp(b.id()));
    for t in sorted {
        polyline(&mut out, &frame, t.id(), t.samples().iter().map(|s| s.pos), "raw");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One vertex per summary centroid (the "segmented data" figure). Local
/// segments are marked by a dot on top of the line; dots are circles, not
/// polyline vertices.
pub fn render_segmented(
    tracks: &[(&TrajId, &[SegmentSummary])],
    bounds: Rect,
    width_px: u32,
) -> Result<String> {
    let frame = Frame::new(bounds, width_px)?;
    let mut out = frame.open(&format!("Segmented data; {} trajectories", tracks.len()));
    let mut sorted: Vec<&(&TrajId, &[SegmentSummary])> = tracks.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(b.0));
    for (id, segs) in &sorted {
        polyline(&mut out, &frame, id, segs.iter().map(|s| s.centroid), "segmented");
    }
    for (_, segs) in &sorted {
        for s in segs.iter().filter(|s| s.kind == SegmentKind::Local) {
            let (x, y) = frame.px(s.centroid);
            let _ = writeln!(
                out,
                r##"<circle class="local" cx="{x:.2}" cy="{y:.2}" r="2.5" fill="#d62728"/>"##
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Heat cells shaded by log-count; empty cells are not drawn.
pub fn render_heatmap(grid: &HeatGrid, width_px: u32) -> Result<String> {
    let frame = Frame::new(grid.bounds, width_px)?;
    let mut out = frame.open(&format!("Heatmap; {} points", grid.total()));
    let max = grid.counts.iter().copied().max().unwrap_or(0);
    let denom = ((max as f64) + 1.0).ln().max(f64::MIN_POSITIVE);
    let side = grid.cell * frame.scale;
    // grid shape lets readers recover per-cell shares, empty cells included
    let _ = writeln!(
        out,
        r#"<g class="heatmap" data-cols="{}" data-rows="{}" data-outside="{}">"#,
        grid.cols, grid.rows, grid.outside
    );
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let n = grid.get(col, row);
            if n == 0 {
                continue;
            }
            let corner = Point2::new(
                grid.bounds.min_x + col as f64 * grid.cell,
                grid.bounds.min_y + (row + 1) as f64 * grid.cell,
            );
            let (x, y) = frame.px(corner);
            let heat = ((n as f64) + 1.0).ln() / denom;
            let _ = writeln!(
                out,
                r##"<rect class="cell" data-count="{n}" x="{x:.2}" y="{y:.2}" width="{side:.2}" height="{side:.2}" fill="#b30000" fill-opacity="{heat:.3}"/>"##
            );
        }
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Number of coordinate pairs across all `points` attributes of an SVG.
pub fn count_vertices(svg: &str) -> usize {
    svg.split(r#"points=""#)
        .skip(1)
        .map(|rest| {
            let attr = &rest[..rest.find('"').unwrap_or(rest.len())];
            attr.split_whitespace().count()
        })
        .sum()
}
