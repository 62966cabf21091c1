//! File formats: MOTChallenge-style results and ground truth, the
//! detections+embeddings text format, the binary embedding-grid sidecar,
//! and linear-interpolation post-processing.
//!
//! Results are CSV lines `frame,id,x,y,w,h,score,-1,-1,-1` so they drop
//! into existing evaluators. Detection files start with a `#dim=D` header
//! followed by `frame,x,y,w,h,score,e1,...,eD` rows printed at six
//! significant digits. Grids are stored per frame as a little-endian
//! header `[frame][H][W][D][stride]` (u32 each) followed by H*W*D f32
//! values, row-major, channel-last.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::grid::EmbeddingGrid;
use crate::tracker::{Detection, FrameInput};

/// One line of a tracker result file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub frame: i64,
    pub id: i64,
    pub bbox: BoundingBox,
    pub score: f64,
}

/// One line of a ground-truth file
/// (`frame,id,x,y,w,h,conf,class,visibility`).
#[derive(Debug, Clone, PartialEq)]
pub struct GtRecord {
    pub frame: i64,
    pub id: i64,
    pub bbox: BoundingBox,
    pub conf: f64,
    pub class: i64,
    pub visibility: f64,
}

/// Ground-truth boxes of one sequence, frame-sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub records: Vec<GtRecord>,
}

impl GroundTruth {
    pub fn new(mut records: Vec<GtRecord>) -> Self {
        records.sort_by_key(|r| r.frame);
        Self { records }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Row filter applied while reading ground truth. The MOT convention marks
/// ignorable rows with a zero in the confidence column; class and
/// visibility filtering are off by default.
#[derive(Debug, Clone)]
pub struct GtFilter {
    pub exclude_zero_conf: bool,
    pub min_visibility: f64,
    pub keep_classes: Option<Vec<i64>>,
}

impl Default for GtFilter {
    fn default() -> Self {
        Self {
            exclude_zero_conf: true,
            min_visibility: 0.0,
            keep_classes: None,
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("bad {field} value '{s}'")))
}

fn parse_i64(path: &Path, line: usize, field: &str, s: &str) -> Result<i64> {
    s.trim()
        .parse::<i64>()
        .map_err(|_| parse_err(path, line, format!("bad {field} value '{s}'")))
}

/// Format with six significant digits, the declared precision of the
/// detections format.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = 5 - exp;
    if decimals <= 0 {
        let scale = 10f64.powi(-decimals);
        format!("{:.0}", (x / scale).round() * scale)
    } else {
        format!("{:.*}", decimals as usize, x)
    }
}

// ---------------------------------------------------------------------------
// results files
// ---------------------------------------------------------------------------

pub fn write_results(path: impl AsRef<Path>, records: &[ResultRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},-1,-1,-1",
            r.frame, r.id, r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h, r.score
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 7 {
            return Err(parse_err(path, lineno, "expected at least 7 fields"));
        }
        let frame = parse_i64(path, lineno, "frame", fields[0])?;
        if frame < 1 {
            return Err(parse_err(path, lineno, "frame index must be >= 1"));
        }
        let id = parse_i64(path, lineno, "id", fields[1])?;
        let bbox = BoundingBox::new(
            parse_f64(path, lineno, "x", fields[2])?,
            parse_f64(path, lineno, "y", fields[3])?,
            parse_f64(path, lineno, "w", fields[4])?,
            parse_f64(path, lineno, "h", fields[5])?,
        )
        .map_err(|e| parse_err(path, lineno, e.to_string()))?;
        let score = parse_f64(path, lineno, "score", fields[6])?;
        out.push(ResultRecord {
            frame,
            id,
            bbox,
            score,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// ground truth
// ---------------------------------------------------------------------------

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    read_ground_truth_with(path, &GtFilter::default())
}

pub fn read_ground_truth_with(path: impl AsRef<Path>, filter: &GtFilter) -> Result<GroundTruth> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 9 {
            return Err(parse_err(path, lineno, "expected 9 fields"));
        }
        let rec = GtRecord {
            frame: parse_i64(path, lineno, "frame", fields[0])?,
            id: parse_i64(path, lineno, "id", fields[1])?,
            bbox: BoundingBox::new(
                parse_f64(path, lineno, "x", fields[2])?,
                parse_f64(path, lineno, "y", fields[3])?,
                parse_f64(path, lineno, "w", fields[4])?,
                parse_f64(path, lineno, "h", fields[5])?,
            )
            .map_err(|e| parse_err(path, lineno, e.to_string()))?,
            conf: parse_f64(path, lineno, "conf", fields[6])?,
            class: parse_i64(path, lineno, "class", fields[7])?,
            visibility: parse_f64(path, lineno, "visibility", fields[8])?,
        };
        if rec.frame < 1 {
            return Err(parse_err(path, lineno, "frame index must be >= 1"));
        }
        if filter.exclude_zero_conf && rec.conf == 0.0 {
            continue;
        }
        if rec.visibility < filter.min_visibility {
            continue;
        }
        if let Some(keep) = &filter.keep_classes {
            if !keep.contains(&rec.class) {
                continue;
            }
        }
        records.push(rec);
    }
    Ok(GroundTruth::new(records))
}

pub fn write_ground_truth(path: impl AsRef<Path>, gt: &GroundTruth) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for r in &gt.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.frame, r.id, r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h, r.conf, r.class, r.visibility
        )?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// detections + embeddings
// ---------------------------------------------------------------------------

pub fn write_detections(path: impl AsRef<Path>, frames: &[FrameInput], dim: usize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "#dim={dim}")?;
    for f in frames {
        for d in &f.detections {
            write!(
                w,
                "{},{},{},{},{},{}",
                f.frame,
                sig6(d.bbox.x),
                sig6(d.bbox.y),
                sig6(d.bbox.w),
                sig6(d.bbox.h),
                sig6(d.score)
            )?;
            let emb = d.embedding.as_ref().ok_or_else(|| Error::Format {
                path: path.as_ref().display().to_string(),
                msg: "detection without embedding cannot be serialized".into(),
            })?;
            if emb.dim() != dim {
                return Err(Error::Format {
                    path: path.as_ref().display().to_string(),
                    msg: format!("embedding dim {} does not match header {dim}", emb.dim()),
                });
            }
            for v in &emb.values {
                write!(w, ",{}", sig6(*v))?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a detections file into per-frame inputs, frames ascending. Grids
/// are attached separately from the sidecar file.
pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<FrameInput>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line?,
        None => {
            return Err(Error::Format {
                path: path.display().to_string(),
                msg: "missing #dim header".into(),
            })
        }
    };
    let dim: usize = header
        .trim()
        .strip_prefix("#dim=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            msg: format!("bad header line '{header}'"),
        })?;

    let mut by_frame: BTreeMap<i64, Vec<Detection>> = BTreeMap::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 + dim {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {} fields for dim={dim}, got {}", 6 + dim, fields.len()),
            ));
        }
        let frame = parse_i64(path, lineno, "frame", fields[0])?;
        if frame < 1 {
            return Err(parse_err(path, lineno, "frame index must be >= 1"));
        }
        let bbox = BoundingBox::new(
            parse_f64(path, lineno, "x", fields[1])?,
            parse_f64(path, lineno, "y", fields[2])?,
            parse_f64(path, lineno, "w", fields[3])?,
            parse_f64(path, lineno, "h", fields[4])?,
        )
        .map_err(|e| parse_err(path, lineno, e.to_string()))?;
        let score = parse_f64(path, lineno, "score", fields[5])?;
        let mut values = Vec::with_capacity(dim);
        for f in &fields[6..] {
            values.push(parse_f64(path, lineno, "embedding", f)?);
        }
        by_frame.entry(frame).or_default().push(Detection {
            bbox,
            score,
            embedding: Some(Embedding::new(values)),
        });
    }

    Ok(by_frame
        .into_iter()
        .map(|(frame, detections)| FrameInput {
            frame,
            detections,
            grid: None,
        })
        .collect())
}

// ---------------------------------------------------------------------------
// embedding-grid sidecar
// ---------------------------------------------------------------------------

pub fn write_grids(path: impl AsRef<Path>, grids: &[(i64, EmbeddingGrid)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for (frame, g) in grids {
        for v in [
            *frame as u32,
            g.height() as u32,
            g.width() as u32,
            g.dim() as u32,
            g.stride(),
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in g.values() {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Streaming reader over the grid sidecar; builds a frame index once and
/// seeks per request.
#[derive(Debug)]
pub struct GridReader {
    file: File,
    index: BTreeMap<i64, u64>,
    path: String,
}

impl GridReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path_str = path.as_ref().display().to_string();
        let mut file = File::open(path.as_ref())?;
        let len = file.metadata()?.len();
        let mut index = BTreeMap::new();
        let mut pos = 0u64;
        let mut header = [0u8; 20];
        while pos < len {
            file.seek(SeekFrom::Start(pos))?;
            file.read_exact(&mut header).map_err(|_| Error::Format {
                path: path_str.clone(),
                msg: format!("truncated grid header at offset {pos}"),
            })?;
            let word = |i: usize| u32::from_le_bytes(header[4 * i..4 * i + 4].try_into().unwrap());
            let (frame, h, w, d, stride) = (word(0), word(1), word(2), word(3), word(4));
            if stride == 0 {
                return Err(Error::Format {
                    path: path_str.clone(),
                    msg: format!("zero stride in grid header at offset {pos}"),
                });
            }
            index.insert(frame as i64, pos);
            pos += 20 + 4 * (h as u64) * (w as u64) * (d as u64);
        }
        if pos != len {
            return Err(Error::Format {
                path: path_str.clone(),
                msg: "grid file length does not match its headers".into(),
            });
        }
        Ok(Self {
            file,
            index,
            path: path_str,
        })
    }

    pub fn frames(&self) -> Vec<i64> {
        self.index.keys().copied().collect()
    }

    pub fn read_frame(&mut self, frame: i64) -> Result<Option<EmbeddingGrid>> {
        let Some(&offset) = self.index.get(&frame) else {
            return Ok(None);
        };
        self.file.seek(SeekFrom::Start(offset))?;
        let mut header = [0u8; 20];
        self.file.read_exact(&mut header)?;
        let word = |i: usize| u32::from_le_bytes(header[4 * i..4 * i + 4].try_into().unwrap());
        let (h, w, d, stride) = (
            word(1) as usize,
            word(2) as usize,
            word(3) as usize,
            word(4),
        );
        let mut payload = vec![0u8; 4 * h * w * d];
        self.file.read_exact(&mut payload).map_err(|_| Error::Format {
            path: self.path.clone(),
            msg: format!("truncated grid payload for frame {frame}"),
        })?;
        let values: Vec<f64> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(Some(EmbeddingGrid::new(h, w, d, stride, values)?))
    }
}

/// Read a single frame's grid from a sidecar file.
pub fn read_grid(path: impl AsRef<Path>, frame: i64) -> Result<EmbeddingGrid> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = GridReader::open(path)?;
    reader.read_frame(frame)?.ok_or_else(|| Error::Format {
        path: path_str,
        msg: format!("no grid stored for frame {frame}"),
    })
}

// ---------------------------------------------------------------------------
// linear interpolation
// ---------------------------------------------------------------------------

/// Fill per-identity gaps of up to `max_gap` frames with componentwise
/// linearly interpolated boxes; interpolated scores are the mean of the
/// two endpoints. Original records are preserved unchanged and the output
/// is sorted by (frame, id).
pub fn linear_interpolation(results: &[ResultRecord], max_gap: u32) -> Vec<ResultRecord> {
    let mut by_id: BTreeMap<i64, Vec<&ResultRecord>> = BTreeMap::new();
    for r in results {
        by_id.entry(r.id).or_default().push(r);
    }

    let mut out: Vec<ResultRecord> = results.to_vec();
    for (_, mut recs) in by_id {
        recs.sort_by_key(|r| r.frame);
        for pair in recs.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let gap = b.frame - a.frame - 1;
            if gap < 1 || gap > max_gap as i64 {
                continue;
            }
            let span = (b.frame - a.frame) as f64;
            for f in a.frame + 1..b.frame {
                let t = (f - a.frame) as f64 / span;
                let lerp = |x0: f64, x1: f64| x0 + (x1 - x0) * t;
                out.push(ResultRecord {
                    frame: f,
                    id: a.id,
                    bbox: BoundingBox {
                        x: lerp(a.bbox.x, b.bbox.x),
                        y: lerp(a.bbox.y, b.bbox.y),
                        w: lerp(a.bbox.w, b.bbox.w),
                        h: lerp(a.bbox.h, b.bbox.h),
                    },
                    score: (a.score + b.score) / 2.0,
                });
            }
        }
    }
    out.sort_by_key(|r| (r.frame, r.id));
    out
}
