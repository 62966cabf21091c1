//! Debug SVG overlay of result boxes against ground truth.

use std::io::Write;
use std::path::Path;

use simpletrack::io::{GroundTruth, ResultRecord};

/// Write an SVG with ground-truth boxes in green and result boxes in red,
/// all frames overlaid at low opacity. Intended for eyeballing drift and
/// identity jumps, not for rendering video.
pub fn write_overlay(
    path: &Path,
    gt: &GroundTruth,
    results: &[ResultRecord],
) -> std::io::Result<()> {
    let mut max_x: f64 = 1.0;
    let mut max_y: f64 = 1.0;
    for b in gt
        .records
        .iter()
        .map(|r| r.bbox)
        .chain(results.iter().map(|r| r.bbox))
    {
        max_x = max_x.max(b.x + b.w);
        max_y = max_y.max(b.y + b.h);
    }

    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {:.0} {:.0}\">",
        max_x + 10.0,
        max_y + 10.0
    )?;
    writeln!(f, "  <g stroke=\"#2a2\" fill=\"none\" stroke-opacity=\"0.5\">")?;
    for r in &gt.records {
        writeln!(
            f,
            "    <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\"><title>frame {} gt {}</title></rect>",
            r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h, r.frame, r.id
        )?;
    }
    writeln!(f, "  </g>")?;
    writeln!(f, "  <g stroke=\"#c33\" fill=\"none\" stroke-opacity=\"0.5\">")?;
    for r in results {
        writeln!(
            f,
            "    <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\"><title>frame {} id {}</title></rect>",
            r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h, r.frame, r.id
        )?;
    }
    writeln!(f, "  </g>")?;
    writeln!(f, "</svg>")?;
    f.flush()
}
