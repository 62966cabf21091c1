//! Command-line surface: `track`, `eval`, `synth`, `bench`, `interp`.
//!
//! Exit codes: 0 success, 1 usage, 2 malformed input, 3 internal invariant
//! violation. Every file-producing run writes a JSON manifest alongside
//! its outputs; re-running with the manifest's flags reproduces the
//! outputs byte for byte.

mod manifest;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manifest::RunManifest;
use simpletrack::io::{self, GridReader, ResultRecord};
use simpletrack::synth;
use simpletrack::{evaluate, Error, FrameInput, Strategy, Tracker, TrackerConfig};

#[derive(Parser)]
#[command(
    name = "simpletrack",
    version,
    about = "Online multi-object tracking: EG-matrix association, tracking retrieval, evaluation, and synthetic benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Tracker configuration flags, mirroring the config fields one to one.
#[derive(Args, Debug)]
struct ConfigFlags {
    /// High detection-score threshold (first association stage).
    #[arg(long, default_value_t = 0.3)]
    tau_high: f64,
    /// Low detection-score threshold (second association stage).
    #[arg(long, default_value_t = 0.2)]
    tau_low: f64,
    /// Minimum score for initializing a new track.
    #[arg(long, default_value_t = 0.6)]
    eps_init: f64,
    /// Maximum cosine distance for tracking retrieval.
    #[arg(long, default_value_t = 0.1)]
    eps_retrieval: f64,
    /// Weight of the embedding cosine term in the EG matrix.
    #[arg(long, default_value_t = 1.0)]
    lambda1: f64,
    /// Weight of the GIoU term in the EG matrix.
    #[arg(long, default_value_t = 0.5)]
    lambda2: f64,
    /// Assignment gate for high-confidence matching.
    #[arg(long, default_value_t = 0.8)]
    match_thresh_high: f64,
    /// Assignment gate for low-confidence matching.
    #[arg(long, default_value_t = 0.4)]
    match_thresh_low: f64,
    /// Frames a lost track is kept before removal.
    #[arg(long, default_value_t = 30)]
    max_time_lost: u32,
    /// Smoothing factor for the embedding memory.
    #[arg(long, default_value_t = 0.9)]
    ema_alpha: f64,
    /// Enable grid-based tracking retrieval.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    retrieval_enabled: bool,
}

impl ConfigFlags {
    fn to_config(&self, strategy: Strategy) -> TrackerConfig {
        TrackerConfig {
            tau_high: self.tau_high,
            tau_low: self.tau_low,
            eps_init: self.eps_init,
            eps_retrieval: self.eps_retrieval,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            match_thresh_high: self.match_thresh_high,
            match_thresh_low: self.match_thresh_low,
            max_time_lost: self.max_time_lost,
            ema_alpha: self.ema_alpha,
            strategy,
            retrieval_enabled: self.retrieval_enabled,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the tracker over a detections file (or a directory of
    /// per-sequence subdirectories) and write MOT-style results.
    Track {
        /// Detections file, or a directory whose subdirectories each hold
        /// a `dets.txt` (and optionally `grid.bin`).
        #[arg(long)]
        dets: PathBuf,
        /// Embedding-grid sidecar for tracking retrieval.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Association strategy.
        #[arg(long, default_value = "simpletrack", value_parser = ["simpletrack", "byte", "jde"])]
        strategy: String,
        /// Output results file (or directory in directory mode).
        #[arg(long)]
        out: PathBuf,
        /// Worker threads in directory mode.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        cfg: ConfigFlags,
    },
    /// Evaluate a results file against ground truth (MOTA, IDF1, IDsw...).
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        res: PathBuf,
        /// IoU threshold for box matching.
        #[arg(long, default_value_t = 0.5)]
        iou_thresh: f64,
        /// Directory for the text and key=value reports.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write an SVG overlay of result vs ground-truth boxes.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Generate a synthetic scenario (gt.txt, dets.txt, grid.bin).
    Synth {
        /// Preset name: crossing, occlusion-reappear, crowd-parallel.
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time EG/EM/IoU cost-matrix construction on random inputs.
    Bench {
        #[arg(long, default_value_t = 50)]
        tracks: usize,
        #[arg(long, default_value_t = 50)]
        dets: usize,
        #[arg(long, default_value_t = 128)]
        dim: usize,
        #[arg(long, default_value_t = 101)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the timing table to a file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fill short per-identity gaps in a results file by linear
    /// interpolation.
    Interp {
        #[arg(long)]
        res: PathBuf,
        #[arg(long, default_value_t = 20)]
        max_gap: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidScenario(_) => 1,
        Error::Parse { .. }
        | Error::Format { .. }
        | Error::Io(_)
        | Error::DimensionMismatch(_)
        | Error::OutOfOrderFrame { .. }
        | Error::EmptyGroundTruth
        | Error::InvalidBox { .. }
        | Error::DegenerateEmbedding(_) => 2,
        Error::ShapeMismatch(_) | Error::DegenerateState(_) => 3,
    }
}

fn run(command: Command) -> simpletrack::Result<()> {
    match command {
        Command::Track {
            dets,
            grid,
            strategy,
            out,
            jobs,
            cfg,
        } => {
            let strategy: Strategy = strategy.parse()?;
            let config = cfg.to_config(strategy);
            config.validate()?;
            let uses_grid = strategy == Strategy::SimpleTrack && config.retrieval_enabled;
            if grid.is_some() && !uses_grid {
                eprintln!(
                    "warning: --grid is ignored (strategy '{strategy}' does not use tracking retrieval)"
                );
            }
            let grid = if uses_grid { grid } else { None };
            if dets.is_dir() {
                track_directory(&dets, &config, &out, jobs)
            } else {
                track_one(&dets, grid.as_deref(), &config, &out)?;
                let mut inputs = vec![dets.as_path()];
                if let Some(g) = &grid {
                    inputs.push(g.as_path());
                }
                RunManifest::new("track", config.clone())
                    .with_inputs(&inputs)
                    .with_outputs(&[out.as_path()])
                    .write_beside(&out)?;
                Ok(())
            }
        }
        Command::Eval {
            gt,
            res,
            iou_thresh,
            out,
            plot,
        } => {
            let gtruth = io::read_ground_truth(&gt)?;
            let results = io::read_results(&res)?;
            let report = evaluate(&gtruth, &results, iou_thresh)?;
            print!("{}", report.to_aligned_text());
            if let Some(plot_path) = &plot {
                plot::write_overlay(plot_path, &gtruth, &results)?;
            }
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                let text_path = dir.join("report.txt");
                let kv_path = dir.join("report.kv");
                std::fs::write(&text_path, report.to_aligned_text())?;
                std::fs::write(&kv_path, report.to_key_values())?;
                let mut outputs = vec![text_path.as_path(), kv_path.as_path()];
                if let Some(p) = &plot {
                    outputs.push(p.as_path());
                }
                RunManifest::new("eval", TrackerConfig::default())
                    .with_inputs(&[gt.as_path(), res.as_path()])
                    .with_outputs(&outputs)
                    .write_into_dir(dir)?;
            }
            Ok(())
        }
        Command::Synth { preset, seed, out } => {
            let spec = synth::preset(&preset, seed)?;
            let (gt, frames) = synth::generate(&spec)?;
            std::fs::create_dir_all(&out)?;
            let gt_path = out.join("gt.txt");
            let dets_path = out.join("dets.txt");
            let grid_path = out.join("grid.bin");
            io::write_ground_truth(&gt_path, &gt)?;
            io::write_detections(&dets_path, &frames, spec.emb_dim)?;
            let grids: Vec<_> = frames
                .into_iter()
                .filter_map(|f| f.grid.map(|g| (f.frame, g)))
                .collect();
            io::write_grids(&grid_path, &grids)?;
            RunManifest::new("synth", TrackerConfig::default())
                .with_seed(seed)
                .with_outputs(&[gt_path.as_path(), dets_path.as_path(), grid_path.as_path()])
                .write_into_dir(&out)?;
            Ok(())
        }
        Command::Bench {
            tracks,
            dets,
            dim,
            iterations,
            seed,
            out,
        } => {
            let timings = synth::bench_costs(tracks, dets, dim, iterations, seed)?;
            print!("{}", timings.to_table());
            if let Some(path) = &out {
                std::fs::write(path, timings.to_table())?;
                RunManifest::new("bench", TrackerConfig::default())
                    .with_seed(seed)
                    .with_outputs(&[path.as_path()])
                    .write_beside(path)?;
            }
            Ok(())
        }
        Command::Interp { res, max_gap, out } => {
            let records = io::read_results(&res)?;
            let filled = io::linear_interpolation(&records, max_gap);
            io::write_results(&out, &filled)?;
            RunManifest::new("interp", TrackerConfig::default())
                .with_inputs(&[res.as_path()])
                .with_outputs(&[out.as_path()])
                .write_beside(&out)?;
            Ok(())
        }
    }
}

/// Track one sequence: detections file plus optional grid sidecar.
fn track_one(
    dets_path: &Path,
    grid_path: Option<&Path>,
    config: &TrackerConfig,
    out_path: &Path,
) -> simpletrack::Result<()> {
    let frames = io::read_detections(dets_path)?;
    let mut grid_reader = match grid_path {
        Some(p) => Some(GridReader::open(p)?),
        None => None,
    };
    let mut tracker = Tracker::new(config.clone())?;
    let mut records = Vec::new();
    for f in frames {
        let grid = match grid_reader.as_mut() {
            Some(reader) => reader.read_frame(f.frame)?,
            None => None,
        };
        let input = FrameInput { grid, ..f };
        for o in tracker.step(&input)? {
            records.push(ResultRecord {
                frame: input.frame,
                id: o.id,
                bbox: o.bbox,
                score: o.score,
            });
        }
    }
    io::write_results(out_path, &records)
}

/// Fan out over sequence subdirectories, `jobs` sequences at a time.
fn track_directory(
    dir: &Path,
    config: &TrackerConfig,
    out_dir: &Path,
    jobs: usize,
) -> simpletrack::Result<()> {
    let mut sequences = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let seq_dir = entry.path();
        if !seq_dir.is_dir() {
            continue;
        }
        let dets = seq_dir.join("dets.txt");
        if !dets.is_file() {
            continue;
        }
        let grid = seq_dir.join("grid.bin");
        let name = entry.file_name().to_string_lossy().to_string();
        sequences.push((name, dets, grid.is_file().then_some(grid)));
    }
    if sequences.is_empty() {
        return Err(Error::Format {
            path: dir.display().to_string(),
            msg: "no sequence subdirectories with dets.txt found".into(),
        });
    }
    std::fs::create_dir_all(out_dir)?;

    let jobs = jobs.clamp(1, sequences.len());
    let mut results: Vec<simpletrack::Result<()>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for worker in 0..jobs {
            let sequences = &sequences;
            handles.push(scope.spawn(move || {
                let mut worker_results = Vec::new();
                for (i, (name, dets, grid)) in sequences.iter().enumerate() {
                    if i % jobs != worker {
                        continue;
                    }
                    let out = out_dir.join(format!("{name}.txt"));
                    let r = track_one(dets, grid.as_deref(), config, &out);
                    worker_results.push((i, r));
                }
                worker_results
            }));
        }
        let mut collected: Vec<(usize, simpletrack::Result<()>)> = Vec::new();
        for h in handles {
            collected.extend(h.join().expect("tracker worker panicked"));
        }
        collected.sort_by_key(|(i, _)| *i);
        results = collected.into_iter().map(|(_, r)| r).collect();
    });
    for r in results {
        r?;
    }

    let inputs: Vec<&Path> = sequences.iter().map(|(_, d, _)| d.as_path()).collect();
    let outputs: Vec<PathBuf> = sequences
        .iter()
        .map(|(name, _, _)| out_dir.join(format!("{name}.txt")))
        .collect();
    let output_refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    RunManifest::new("track", config.clone())
        .with_inputs(&inputs)
        .with_outputs(&output_refs)
        .write_into_dir(out_dir)?;
    Ok(())
}
