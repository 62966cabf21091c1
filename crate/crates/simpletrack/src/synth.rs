//! Deterministic synthetic scenarios (ground truth, noisy detections,
//! embedding grids) and a timing harness for cost-matrix construction.
//!
//! Targets move along piecewise-linear center paths and carry a fixed
//! random unit embedding as identity signature. Detections add Gaussian
//! pixel noise on centers and log-normal jitter on sizes; embeddings are
//! the signature plus Gaussian noise, renormalized. Grid cells inside a
//! target's box hold its noisy signature, background cells random unit
//! vectors. Everything is a pure function of the spec and seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cost::{em_fused_cost_matrix, embedding_cost_matrix, eg_cost_matrix, iou_cost_matrix};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::grid::EmbeddingGrid;
use crate::io::{GroundTruth, GtRecord};
use crate::kalman::{KalmanFilter, KalmanState};
use crate::tracker::{Detection, FrameInput, CHI2_GATE_4DOF, EM_APPEARANCE_WEIGHT};

/// One synthetic target: lifetime, piecewise-linear center path, box size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetSpec {
    /// First frame the target exists (1-based, inclusive).
    pub spawn: i64,
    /// Last frame the target exists (inclusive).
    pub despawn: i64,
    /// (frame, cx, cy) waypoints; centers are interpolated linearly in
    /// between and clamped outside the waypoint range.
    pub waypoints: Vec<(i64, f64, f64)>,
    pub size: (f64, f64),
}

impl TargetSpec {
    fn center_at(&self, frame: i64) -> (f64, f64) {
        let first = self.waypoints.first().expect("validated non-empty");
        let last = self.waypoints.last().unwrap();
        if frame <= first.0 {
            return (first.1, first.2);
        }
        if frame >= last.0 {
            return (last.1, last.2);
        }
        for pair in self.waypoints.windows(2) {
            let (f0, x0, y0) = pair[0];
            let (f1, x1, y1) = pair[1];
            if frame >= f0 && frame <= f1 {
                let t = (frame - f0) as f64 / (f1 - f0) as f64;
                return (x0 + (x1 - x0) * t, y0 + (y1 - y0) * t);
            }
        }
        (last.1, last.2)
    }
}

/// What the detector emits for an occluded target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OccludedDetection {
    /// No detection at all.
    Drop,
    /// A detection with a score drawn from the occluded range.
    LowScore,
}

/// A window during which one target is occluded. Full occlusion hides the
/// target from the embedding grid and the ground truth as well; a detector
/// dropout keeps both visible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcclusionWindow {
    pub target: usize,
    /// First occluded frame (inclusive).
    pub start: i64,
    /// Last occluded frame (inclusive).
    pub end: i64,
    pub detection: OccludedDetection,
    pub visible_in_grid: bool,
    pub visible_in_gt: bool,
}

/// Score ranges for tracked and occluded (low-score) detections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreModel {
    pub tracked: (f64, f64),
    pub occluded: (f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub num_frames: i64,
    /// Image extent in pixels; the grid is width/stride x height/stride.
    pub width: u32,
    pub height: u32,
    pub stride: u32,
    pub targets: Vec<TargetSpec>,
    pub occlusions: Vec<OcclusionWindow>,
    /// Gaussian std of detection-center noise, pixels.
    pub det_noise_std: f64,
    /// Sigma of the log-normal multiplicative jitter on box sizes.
    pub size_jitter_std: f64,
    pub emb_dim: usize,
    /// Gaussian std per component added to identity signatures.
    pub emb_noise_std: f64,
    pub score_model: ScoreModel,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_frames < 1 || self.width == 0 || self.height == 0 || self.stride == 0 {
            return Err(Error::InvalidScenario("empty frame range or extent".into()));
        }
        if self.emb_dim == 0 {
            return Err(Error::InvalidScenario("embedding dim must be >= 1".into()));
        }
        if self.det_noise_std < 0.0 || self.size_jitter_std < 0.0 || self.emb_noise_std < 0.0 {
            return Err(Error::InvalidScenario("noise stds must be >= 0".into()));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if t.spawn < 1 || t.despawn > self.num_frames || t.spawn > t.despawn {
                return Err(Error::InvalidScenario(format!(
                    "target {i} lifetime {}..{} outside 1..{}",
                    t.spawn, t.despawn, self.num_frames
                )));
            }
            if t.waypoints.is_empty() {
                return Err(Error::InvalidScenario(format!("target {i} has no waypoints")));
            }
            if t.waypoints.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::InvalidScenario(format!(
                    "target {i} waypoint frames must be strictly increasing"
                )));
            }
            if t.size.0 <= 0.0 || t.size.1 <= 0.0 {
                return Err(Error::InvalidScenario(format!("target {i} has empty size")));
            }
        }
        for (i, o) in self.occlusions.iter().enumerate() {
            if o.target >= self.targets.len() {
                return Err(Error::InvalidScenario(format!(
                    "occlusion {i} names unknown target {}",
                    o.target
                )));
            }
            let t = &self.targets[o.target];
            if o.start > o.end || o.start < t.spawn || o.end > t.despawn {
                return Err(Error::InvalidScenario(format!(
                    "occlusion {i} frames {}..{} outside target lifetime",
                    o.start, o.end
                )));
            }
        }
        Ok(())
    }

    fn occlusion_at(&self, target: usize, frame: i64) -> Option<&OcclusionWindow> {
        self.occlusions
            .iter()
            .find(|o| o.target == target && frame >= o.start && frame <= o.end)
    }
}

/// Shipped presets; see [`preset`].
pub const PRESET_NAMES: &[&str] = &["crossing", "occlusion-reappear", "crowd-parallel"];

/// Build one of the named scenario presets.
///
/// - `crossing`: two targets on intersecting paths; one is fully occluded
///   for five frames at the crossing and changes course behind the other,
///   so IoU-only association re-identifies it as a new track while
///   appearance-based association keeps the identity.
/// - `occlusion-reappear`: one target whose detections drop out for four
///   frames while it stays visible in the embedding grid, the retrieval
///   case; ground truth keeps the target, so the gap also measures
///   interpolation gains.
/// - `crowd-parallel`: eight parallel targets whose scores all dip into
///   the low band for three frames, exercising second-stage matching;
///   every strategy should hold all eight identities.
pub fn preset(name: &str, seed: u64) -> Result<ScenarioSpec> {
    match name {
        "crossing" => Ok(ScenarioSpec {
            name: name.into(),
            num_frames: 36,
            width: 400,
            height: 160,
            stride: 4,
            targets: vec![
                TargetSpec {
                    spawn: 1,
                    despawn: 36,
                    waypoints: vec![(1, 30.0, 100.0), (36, 380.0, 100.0)],
                    size: (40.0, 40.0),
                },
                TargetSpec {
                    spawn: 1,
                    despawn: 36,
                    waypoints: vec![
                        (1, 370.0, 60.0),
                        (15, 230.0, 60.0),
                        (20, 180.0, 120.0),
                        (36, 20.0, 120.0),
                    ],
                    size: (40.0, 40.0),
                },
            ],
            occlusions: vec![OcclusionWindow {
                target: 1,
                start: 15,
                end: 19,
                detection: OccludedDetection::Drop,
                visible_in_grid: false,
                visible_in_gt: false,
            }],
            det_noise_std: 0.5,
            size_jitter_std: 0.01,
            emb_dim: 32,
            emb_noise_std: 0.02,
            score_model: ScoreModel {
                tracked: (0.75, 0.9),
                occluded: (0.21, 0.29),
            },
            seed,
        }),
        "occlusion-reappear" => Ok(ScenarioSpec {
            name: name.into(),
            num_frames: 30,
            width: 400,
            height: 120,
            stride: 4,
            targets: vec![TargetSpec {
                spawn: 1,
                despawn: 30,
                waypoints: vec![(1, 40.0, 60.0), (30, 330.0, 60.0)],
                size: (44.0, 44.0),
            }],
            occlusions: vec![OcclusionWindow {
                target: 0,
                start: 12,
                end: 15,
                detection: OccludedDetection::Drop,
                visible_in_grid: true,
                visible_in_gt: true,
            }],
            det_noise_std: 0.5,
            size_jitter_std: 0.01,
            emb_dim: 32,
            emb_noise_std: 0.02,
            score_model: ScoreModel {
                tracked: (0.75, 0.9),
                occluded: (0.21, 0.29),
            },
            seed,
        }),
        "crowd-parallel" => Ok(ScenarioSpec {
            name: name.into(),
            num_frames: 40,
            width: 360,
            height: 256,
            stride: 4,
            targets: (0..8)
                .map(|i| TargetSpec {
                    spawn: 1,
                    despawn: 40,
                    waypoints: vec![
                        (1, 30.0, 25.0 + 26.0 * i as f64),
                        (40, 225.0, 25.0 + 26.0 * i as f64),
                    ],
                    size: (22.0, 22.0),
                })
                .collect(),
            occlusions: (0..8)
                .map(|i| OcclusionWindow {
                    target: i,
                    start: 18,
                    end: 20,
                    detection: OccludedDetection::LowScore,
                    visible_in_grid: true,
                    visible_in_gt: true,
                })
                .collect(),
            det_noise_std: 0.4,
            size_jitter_std: 0.01,
            emb_dim: 32,
            emb_noise_std: 0.02,
            score_model: ScoreModel {
                tracked: (0.75, 0.9),
                occluded: (0.21, 0.29),
            },
            seed,
        }),
        other => Err(Error::InvalidScenario(format!(
            "unknown preset '{other}', expected one of {PRESET_NAMES:?}"
        ))),
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn noisy_signature(rng: &mut ChaCha8Rng, signature: &[f64], std: f64) -> Vec<f64> {
    let v: Vec<f64> = signature
        .iter()
        .map(|s| s + std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        v.into_iter().map(|x| x / norm).collect()
    } else {
        signature.to_vec()
    }
}

/// Generate the scenario: exact ground truth plus per-frame detections and
/// embedding grids, fully determined by the spec and its seed.
pub fn generate(spec: &ScenarioSpec) -> Result<(GroundTruth, Vec<FrameInput>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let signatures: Vec<Vec<f64>> = (0..spec.targets.len())
        .map(|_| random_unit(&mut rng, spec.emb_dim))
        .collect();

    let grid_h = spec.height.div_ceil(spec.stride) as usize;
    let grid_w = spec.width.div_ceil(spec.stride) as usize;

    let mut gt_records = Vec::new();
    let mut frames = Vec::with_capacity(spec.num_frames as usize);

    for frame in 1..=spec.num_frames {
        // background first, then targets overwrite their cells
        let mut grid = EmbeddingGrid::zeros(grid_h, grid_w, spec.emb_dim, spec.stride);
        for r in 0..grid_h {
            for c in 0..grid_w {
                let v = random_unit(&mut rng, spec.emb_dim);
                grid.cell_mut(r, c).copy_from_slice(&v);
            }
        }

        let mut detections = Vec::new();
        for (idx, target) in spec.targets.iter().enumerate() {
            if frame < target.spawn || frame > target.despawn {
                continue;
            }
            let (cx, cy) = target.center_at(frame);
            let (w, h) = target.size;
            let gt_box = BoundingBox::from_center(cx, cy, w, h)?;
            let occ = spec.occlusion_at(idx, frame);

            if occ.is_none_or(|o| o.visible_in_gt) {
                gt_records.push(GtRecord {
                    frame,
                    id: idx as i64 + 1,
                    bbox: gt_box,
                    conf: 1.0,
                    class: 1,
                    visibility: 1.0,
                });
            }

            if occ.is_none_or(|o| o.visible_in_grid) {
                for r in 0..grid_h {
                    for c in 0..grid_w {
                        let px = (c as f64 + 0.5) * spec.stride as f64;
                        let py = (r as f64 + 0.5) * spec.stride as f64;
                        if px >= gt_box.x
                            && px < gt_box.x + gt_box.w
                            && py >= gt_box.y
                            && py < gt_box.y + gt_box.h
                        {
                            let v = noisy_signature(&mut rng, &signatures[idx], spec.emb_noise_std);
                            grid.cell_mut(r, c).copy_from_slice(&v);
                        }
                    }
                }
            }

            let score_range = match occ.map(|o| o.detection) {
                Some(OccludedDetection::Drop) => None,
                Some(OccludedDetection::LowScore) => Some(spec.score_model.occluded),
                None => Some(spec.score_model.tracked),
            };
            if let Some((lo, hi)) = score_range {
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                let jw: f64 = rng.sample(StandardNormal);
                let jh: f64 = rng.sample(StandardNormal);
                let det_box = BoundingBox::from_center(
                    cx + spec.det_noise_std * nx,
                    cy + spec.det_noise_std * ny,
                    w * (spec.size_jitter_std * jw).exp(),
                    h * (spec.size_jitter_std * jh).exp(),
                )?;
                let score = rng.random_range(lo..hi);
                let emb = noisy_signature(&mut rng, &signatures[idx], spec.emb_noise_std);
                detections.push(Detection {
                    bbox: det_box,
                    score,
                    embedding: Some(Embedding::new(emb)),
                });
            }
        }

        frames.push(FrameInput {
            frame,
            detections,
            grid: Some(grid),
        });
    }

    Ok((GroundTruth::new(gt_records), frames))
}

// ---------------------------------------------------------------------------
// cost-matrix timing harness
// ---------------------------------------------------------------------------

/// Median wall time per cost-matrix construction, nanoseconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostTimings {
    pub eg_ns: u64,
    pub em_ns: u64,
    pub iou_ns: u64,
    pub tracks: usize,
    pub dets: usize,
    pub dim: usize,
    pub iterations: usize,
}

impl CostTimings {
    pub fn to_table(&self) -> String {
        format!(
            "cost matrix    median ns   ({} tracks x {} dets, dim {}, {} iterations)\n\
             EG          {:>12}\n\
             EM          {:>12}\n\
             IoU         {:>12}\n",
            self.tracks, self.dets, self.dim, self.iterations, self.eg_ns, self.em_ns, self.iou_ns
        )
    }
}

fn median_ns(samples: &mut [u128]) -> u64 {
    samples.sort_unstable();
    samples[samples.len() / 2] as u64
}

const BENCH_WARMUP: usize = 10;

/// Time EG, EM, and IoU cost-matrix construction on identical random
/// inputs: median of `iterations` runs after a warm-up, single-threaded.
pub fn bench_costs(
    num_tracks: usize,
    num_dets: usize,
    emb_dim: usize,
    iterations: usize,
    seed: u64,
) -> Result<CostTimings> {
    if num_tracks == 0 || num_dets == 0 || emb_dim == 0 || iterations == 0 {
        return Err(Error::InvalidScenario(
            "bench sizes and iterations must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boxes = |n: usize| -> Vec<BoundingBox> {
        (0..n)
            .map(|_| {
                BoundingBox::new(
                    rng.random_range(0.0..800.0),
                    rng.random_range(0.0..800.0),
                    rng.random_range(20.0..100.0),
                    rng.random_range(20.0..100.0),
                )
                .unwrap()
            })
            .collect()
    };
    let track_boxes = boxes(num_tracks);
    let det_boxes = boxes(num_dets);
    let track_embs: Vec<Embedding> = (0..num_tracks)
        .map(|_| Embedding::new(random_unit(&mut rng, emb_dim)))
        .collect();
    let det_embs: Vec<Embedding> = (0..num_dets)
        .map(|_| Embedding::new(random_unit(&mut rng, emb_dim)))
        .collect();

    let kf = KalmanFilter::new();
    let states: Vec<KalmanState> = track_boxes
        .iter()
        .map(|b| kf.predict(&kf.initiate(b).unwrap()))
        .collect();

    let track_pairs: Vec<(BoundingBox, Embedding)> = track_boxes
        .iter()
        .cloned()
        .zip(track_embs.iter().cloned())
        .collect();
    let det_pairs: Vec<(BoundingBox, Embedding)> = det_boxes
        .iter()
        .cloned()
        .zip(det_embs.iter().cloned())
        .collect();

    let time = |f: &mut dyn FnMut()| -> Vec<u128> {
        for _ in 0..BENCH_WARMUP {
            f();
        }
        (0..iterations)
            .map(|_| {
                let start = std::time::Instant::now();
                f();
                start.elapsed().as_nanos().max(1)
            })
            .collect()
    };

    let mut eg_samples = time(&mut || {
        std::hint::black_box(eg_cost_matrix(&track_pairs, &det_pairs, 1.0, 0.5));
    });
    let mut em_samples = time(&mut || {
        let emb_cost = embedding_cost_matrix(&track_embs, &det_embs);
        let motion: Vec<Vec<f64>> = states
            .iter()
            .map(|s| kf.gating_distance(s, &det_boxes).unwrap())
            .collect();
        std::hint::black_box(
            em_fused_cost_matrix(&emb_cost, &motion, CHI2_GATE_4DOF, EM_APPEARANCE_WEIGHT)
                .unwrap(),
        );
    });
    let mut iou_samples = time(&mut || {
        std::hint::black_box(iou_cost_matrix(&track_boxes, &det_boxes));
    });

    Ok(CostTimings {
        eg_ns: median_ns(&mut eg_samples),
        em_ns: median_ns(&mut em_samples),
        iou_ns: median_ns(&mut iou_samples),
        tracks: num_tracks,
        dets: num_dets,
        dim: emb_dim,
        iterations,
    })
}
