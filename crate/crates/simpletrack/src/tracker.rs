//! The online tracker state machine.
//!
//! Each frame runs: score split into high/low confidence bands, Kalman
//! prediction for every live track, a first association of all live tracks
//! against high-confidence detections, a second association of the
//! remainder against low-confidence detections, optional grid-based
//! retrieval of still-unmatched tracks, lifecycle bookkeeping, and track
//! initialization from leftover high-confidence detections.
//!
//! Three association strategies share the pipeline and differ only in the
//! cost matrices and retrieval:
//!
//! - `SimpleTrack`: EG matrix (embedding cosine + GIoU) in both stages,
//!   retrieval enabled.
//! - `Byte`: IoU cost in both stages, no retrieval, embeddings ignored.
//! - `Jde`: embedding+motion fusion in the first stage, IoU in the second,
//!   no retrieval.

use serde::{Deserialize, Serialize};

use crate::assign::solve;
use crate::cost::{CostMatrix, INFEASIBLE};
use crate::embedding::{cosine_distance, Embedding};
use crate::error::{Error, Result};
use crate::geometry::{giou_distance, iou, BoundingBox};
use crate::grid::EmbeddingGrid;
use crate::kalman::{KalmanFilter, KalmanState};

/// 0.95 quantile of the chi-square distribution with 4 degrees of freedom;
/// gates the motion term of the EM baseline.
pub const CHI2_GATE_4DOF: f64 = 9.487729036781154;

/// Appearance weight of the EM fusion; the motion term gets the remainder.
pub const EM_APPEARANCE_WEIGHT: f64 = 0.98;

/// One detector output: box, confidence, and optionally an appearance
/// embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub score: f64,
    pub embedding: Option<Embedding>,
}

/// Everything the tracker consumes for one frame.
#[derive(Debug, Clone)]
pub struct FrameInput {
    pub frame: i64,
    pub detections: Vec<Detection>,
    pub grid: Option<EmbeddingGrid>,
}

/// Association strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    SimpleTrack,
    Byte,
    Jde,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simpletrack" => Ok(Strategy::SimpleTrack),
            "byte" => Ok(Strategy::Byte),
            "jde" => Ok(Strategy::Jde),
            other => Err(Error::InvalidConfig(format!("unknown strategy '{other}'"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::SimpleTrack => write!(f, "simpletrack"),
            Strategy::Byte => write!(f, "byte"),
            Strategy::Jde => write!(f, "jde"),
        }
    }
}

/// Tracker thresholds and weights. Defaults follow the reference
/// configuration of the strategy being reproduced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// High detection-score threshold; above it a detection joins the
    /// first association stage.
    pub tau_high: f64,
    /// Low detection-score threshold; detections in (tau_low, tau_high]
    /// join the second stage, at or below tau_low they are discarded.
    pub tau_low: f64,
    /// Minimum score for initializing a new track.
    pub eps_init: f64,
    /// Maximum neighborhood cosine distance for retrieval to recover an
    /// unmatched track.
    pub eps_retrieval: f64,
    /// Weight of the embedding cosine term in the EG matrix.
    pub lambda1: f64,
    /// Weight of the GIoU term in the EG matrix.
    pub lambda2: f64,
    /// Assignment gate for the first (high-confidence) stage.
    pub match_thresh_high: f64,
    /// Assignment gate for the second (low-confidence) stage.
    pub match_thresh_low: f64,
    /// Frames a lost track is kept alive before removal.
    pub max_time_lost: u32,
    /// Smoothing factor of the exponential moving average over embedding
    /// memory.
    pub ema_alpha: f64,
    pub strategy: Strategy,
    /// Master switch for grid-based retrieval (only the SimpleTrack
    /// strategy ever uses it).
    pub retrieval_enabled: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            tau_high: 0.3,
            tau_low: 0.2,
            eps_init: 0.6,
            eps_retrieval: 0.1,
            lambda1: 1.0,
            lambda2: 0.5,
            match_thresh_high: 0.8,
            match_thresh_low: 0.4,
            max_time_lost: 30,
            ema_alpha: 0.9,
            strategy: Strategy::SimpleTrack,
            retrieval_enabled: true,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.tau_low && self.tau_low <= self.tau_high && self.tau_high <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= tau_low <= tau_high <= 1, got {} / {}",
                self.tau_low, self.tau_high
            )));
        }
        let nonneg = [
            self.eps_init,
            self.eps_retrieval,
            self.lambda1,
            self.lambda2,
            self.match_thresh_high,
            self.match_thresh_low,
        ];
        if nonneg.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig("thresholds must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.ema_alpha) {
            return Err(Error::InvalidConfig("ema_alpha must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Tracked,
    Lost,
    Removed,
}

/// One tracked identity.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: i64,
    pub kf: KalmanState,
    /// EMA-smoothed appearance memory; only first-stage matches feed it.
    pub emb: Option<Embedding>,
    pub state: TrackState,
    /// Confidence of the last matched detection.
    pub score: f64,
    /// Frame of the last match or retrieval.
    pub last_frame: i64,
    /// Frames since the last match; zero exactly while Tracked.
    pub lost_age: u32,
}

/// Per-frame output row: identity, filtered box, last confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub id: i64,
    pub bbox: BoundingBox,
    pub score: f64,
}

enum StageCost {
    Eg,
    Iou,
    Em,
}

/// Online tracker over one sequence. Owned by a single worker; distinct
/// sequences run on independent instances.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    kf: KalmanFilter,
    tracks: Vec<Track>,
    next_id: i64,
    last_frame: Option<i64>,
    emb_dim: Option<usize>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            kf: KalmanFilter::new(),
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            emb_dim: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live tracks (Tracked or Lost), in creation order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Process one frame and return the boxes of currently Tracked
    /// identities. Frame indices must be strictly increasing.
    pub fn step(&mut self, input: &FrameInput) -> Result<Vec<TrackOutput>> {
        if let Some(last) = self.last_frame {
            if input.frame <= last {
                return Err(Error::OutOfOrderFrame {
                    got: input.frame,
                    last,
                });
            }
        }
        self.check_input(input)?;
        self.last_frame = Some(input.frame);

        // score split
        let mut high = Vec::new();
        let mut low = Vec::new();
        for (i, d) in input.detections.iter().enumerate() {
            if d.score > self.config.tau_high {
                high.push(i);
            } else if d.score > self.config.tau_low {
                low.push(i);
            }
        }

        // predict every live track
        for t in &mut self.tracks {
            t.kf = self.kf.predict(&t.kf);
        }

        let mut matched_track = vec![false; self.tracks.len()];
        let mut matched_det = vec![false; input.detections.len()];

        // first association: all live tracks vs high-confidence detections
        let stage1_kind = match self.config.strategy {
            Strategy::SimpleTrack => StageCost::Eg,
            Strategy::Byte => StageCost::Iou,
            Strategy::Jde => StageCost::Em,
        };
        let all_tracks: Vec<usize> = (0..self.tracks.len()).collect();
        self.associate(
            input,
            &all_tracks,
            &high,
            stage1_kind,
            self.config.match_thresh_high,
            true,
            &mut matched_track,
            &mut matched_det,
        )?;

        // second association: remaining tracks vs low-confidence detections
        let stage2_kind = match self.config.strategy {
            Strategy::SimpleTrack => StageCost::Eg,
            Strategy::Byte | Strategy::Jde => StageCost::Iou,
        };
        let remaining: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| !matched_track[i])
            .collect();
        self.associate(
            input,
            &remaining,
            &low,
            stage2_kind,
            self.config.match_thresh_low,
            false,
            &mut matched_track,
            &mut matched_det,
        )?;

        // tracking retrieval on still-unmatched tracks
        if self.config.strategy == Strategy::SimpleTrack && self.config.retrieval_enabled {
            if let Some(grid) = &input.grid {
                for i in 0..self.tracks.len() {
                    if matched_track[i] {
                        continue;
                    }
                    let t = &self.tracks[i];
                    let (Some(memory), Ok(_)) = (&t.emb, t.kf.bbox()) else {
                        continue;
                    };
                    let (cx, cy) = t.kf.center();
                    if let Some(d) = grid.min_cosine_distance(cx, cy, memory) {
                        if d < self.config.eps_retrieval {
                            // recovered at the predicted box; no measurement
                            // exists, so no Kalman update
                            matched_track[i] = true;
                            let t = &mut self.tracks[i];
                            t.state = TrackState::Tracked;
                            t.lost_age = 0;
                            t.last_frame = input.frame;
                        }
                    }
                }
            }
        }

        // lifecycle: unmatched tracks age toward removal
        for (i, t) in self.tracks.iter_mut().enumerate() {
            if !matched_track[i] {
                t.state = TrackState::Lost;
                t.lost_age += 1;
            }
        }
        let max_lost = self.config.max_time_lost;
        self.tracks.retain(|t| t.lost_age <= max_lost);

        // new tracks from leftover high-confidence detections
        for &j in &high {
            if matched_det[j] {
                continue;
            }
            let d = &input.detections[j];
            if d.score > self.config.eps_init {
                let emb = match &d.embedding {
                    Some(e) => e.normalized().ok(),
                    None => None,
                };
                self.tracks.push(Track {
                    id: self.next_id,
                    kf: self.kf.initiate(&d.bbox)?,
                    emb,
                    state: TrackState::Tracked,
                    score: d.score,
                    last_frame: input.frame,
                    lost_age: 0,
                });
                self.next_id += 1;
            }
        }

        // emit Tracked tracks
        let mut out = Vec::new();
        for t in &self.tracks {
            if t.state == TrackState::Tracked {
                if let Ok(bbox) = t.kf.bbox() {
                    out.push(TrackOutput {
                        id: t.id,
                        bbox,
                        score: t.score,
                    });
                }
            }
        }
        Ok(out)
    }

    // Embedding dimension must be uniform across the whole sequence and
    // match the grid.
    fn check_input(&mut self, input: &FrameInput) -> Result<()> {
        let mut dim = self.emb_dim;
        for d in &input.detections {
            d.bbox.validate()?;
            if !(0.0..=1.0).contains(&d.score) {
                return Err(Error::InvalidConfig(format!(
                    "detection score {} outside [0, 1]",
                    d.score
                )));
            }
            if let Some(e) = &d.embedding {
                match dim {
                    None => dim = Some(e.dim()),
                    Some(d0) if d0 != e.dim() => {
                        return Err(Error::DimensionMismatch(format!(
                            "detection embedding dims {d0} vs {}",
                            e.dim()
                        )))
                    }
                    _ => {}
                }
            }
        }
        if let (Some(grid), Some(d0)) = (&input.grid, dim) {
            if grid.dim() != d0 {
                return Err(Error::DimensionMismatch(format!(
                    "grid dim {} vs detection embedding dim {d0}",
                    grid.dim()
                )));
            }
        }
        self.emb_dim = dim;
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn associate(
        &mut self,
        input: &FrameInput,
        track_idx: &[usize],
        det_idx: &[usize],
        kind: StageCost,
        gate: f64,
        update_memory: bool,
        matched_track: &mut [bool],
        matched_det: &mut [bool],
    ) -> Result<()> {
        if track_idx.is_empty() || det_idx.is_empty() {
            return Ok(());
        }
        let cost = self.stage_cost(input, track_idx, det_idx, kind)?;
        let result = solve(&cost, gate);

        // row ids are positions into track_idx, col ids original det indices
        for (row, det_j, _) in result.matches {
            let ti = track_idx[row as usize];
            let d = &input.detections[det_j];
            matched_track[ti] = true;
            matched_det[det_j] = true;

            let t = &mut self.tracks[ti];
            t.kf = self.kf.update(&t.kf, &d.bbox)?;
            t.state = TrackState::Tracked;
            t.score = d.score;
            t.last_frame = input.frame;
            t.lost_age = 0;
            if update_memory && self.config.strategy != Strategy::Byte {
                if let Some(e) = &d.embedding {
                    update_embedding_memory(&mut t.emb, e, self.config.ema_alpha);
                }
            }
        }
        Ok(())
    }

    fn stage_cost(
        &self,
        input: &FrameInput,
        track_idx: &[usize],
        det_idx: &[usize],
        kind: StageCost,
    ) -> Result<CostMatrix> {
        let track_boxes: Vec<Option<BoundingBox>> = track_idx
            .iter()
            .map(|&i| self.tracks[i].kf.bbox().ok())
            .collect();
        // row ids are positions in track_idx so the caller can map back
        let mut m = CostMatrix::new(
            (0..track_idx.len() as i64).collect(),
            det_idx.to_vec(),
        );

        let motion: Option<Vec<Vec<f64>>> = match kind {
            StageCost::Em => {
                let det_boxes: Vec<BoundingBox> =
                    det_idx.iter().map(|&j| input.detections[j].bbox).collect();
                let mut rows = Vec::with_capacity(track_idx.len());
                for &i in track_idx {
                    rows.push(self.kf.gating_distance(&self.tracks[i].kf, &det_boxes)?);
                }
                Some(rows)
            }
            _ => None,
        };

        for (r, &ti) in track_idx.iter().enumerate() {
            for (c, &dj) in det_idx.iter().enumerate() {
                let det = &input.detections[dj];
                let entry = match kind {
                    StageCost::Iou => match &track_boxes[r] {
                        Some(tb) => iou(tb, &det.bbox).map(|v| 1.0 - v).unwrap_or(INFEASIBLE),
                        None => INFEASIBLE,
                    },
                    StageCost::Eg => {
                        match (&track_boxes[r], &self.tracks[ti].emb, &det.embedding) {
                            (Some(tb), Some(te), Some(de)) => {
                                let e = cosine_distance(te, de);
                                let g = giou_distance(tb, &det.bbox);
                                match (e, g) {
                                    (Ok(e), Ok(g)) => {
                                        self.config.lambda1 * e + self.config.lambda2 * g
                                    }
                                    _ => {
                                        log::warn!(
                                            "EG entry for track {} marked infeasible",
                                            self.tracks[ti].id
                                        );
                                        INFEASIBLE
                                    }
                                }
                            }
                            _ => INFEASIBLE,
                        }
                    }
                    StageCost::Em => {
                        let maha = motion.as_ref().unwrap()[r][c];
                        match (&self.tracks[ti].emb, &det.embedding) {
                            (Some(te), Some(de)) if maha <= CHI2_GATE_4DOF => {
                                match cosine_distance(te, de) {
                                    Ok(e) => {
                                        EM_APPEARANCE_WEIGHT * e
                                            + (1.0 - EM_APPEARANCE_WEIGHT) * maha / CHI2_GATE_4DOF
                                    }
                                    Err(_) => INFEASIBLE,
                                }
                            }
                            _ => INFEASIBLE,
                        }
                    }
                };
                m.set(r, c, entry);
            }
        }
        Ok(m)
    }
}

fn update_embedding_memory(memory: &mut Option<Embedding>, det_emb: &Embedding, alpha: f64) {
    let Ok(unit) = det_emb.normalized() else {
        return;
    };
    match memory {
        None => *memory = Some(unit),
        Some(m) => {
            let mixed: Vec<f64> = m
                .values
                .iter()
                .zip(&unit.values)
                .map(|(old, new)| alpha * old + (1.0 - alpha) * new)
                .collect();
            if let Ok(n) = Embedding::new(mixed).normalized() {
                *memory = Some(n);
            }
        }
    }
}
