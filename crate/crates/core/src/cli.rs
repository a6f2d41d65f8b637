//! Command-line surface.
//!
//! Every output is written to a temporary file beside its target and only
//! moved into place once the whole command has succeeded, so a failed run
//! leaves no partial files behind.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use tempfile::NamedTempFile;
use thiserror::Error;

use crate::analytics::{flow_export, speed_map, AnalyticsError, Bounds};
use crate::evaluation::{evaluate_trajectories, fdr_from_truth, EvalError};
use crate::gating::{GateConfig, GateError, DEFAULT_CONF_THRESHOLD};
use crate::io::svg::write_flow_svg;
use crate::io::yolo::{import_yolo_dir, FramePattern, FrameRange, DEFAULT_FRAME_PATTERN};
use crate::io::{
    read_json, read_trajectories, read_truth, write_detections, write_frame, write_json,
    write_speed_map, DetectionReader, EvalReportFile, FormatError, TrackReportFile,
    TrajectoryWriter, TruthWriter,
};
use crate::simulator::{SimConfig, SimError, Simulation};
use crate::tracker::{FrameUpdate, TrackError, Tracker};

#[derive(Debug, Parser)]
#[command(
    name = "droptrack",
    version,
    about = "Identity-stable tracking of fixed particle populations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic detection stream and its ground truth.
    Simulate(SimulateArgs),
    /// Gate and associate a detection stream into trajectories.
    Track(TrackArgs),
    /// Count identity switches against ground truth.
    Evaluate(EvaluateArgs),
    /// Speed map and flow drawing from trajectories.
    Analyze(AnalyzeArgs),
    /// Convert a directory of per-frame detector text files.
    ImportYolo(ImportYoloArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON file with simulation settings.
    #[arg(long)]
    pub config: PathBuf,
    /// Detection stream (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth CSV.
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub expected_count: usize,
    #[arg(long, default_value_t = DEFAULT_CONF_THRESHOLD)]
    pub conf_threshold: f64,
    /// Trajectory CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Gating report (JSON).
    #[arg(long)]
    pub report: PathBuf,
    /// Record the wall-clock time in the report.
    #[arg(long)]
    pub stamp: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub stamp: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    #[arg(long)]
    pub fps: f64,
    /// Speed map CSV (`row,col,mean_speed,count`).
    #[arg(long)]
    pub speed_map: PathBuf,
    /// Grid size as `WxH`.
    #[arg(long, value_parser = parse_grid)]
    pub grid: (usize, usize),
    /// Flow drawing (SVG).
    #[arg(long)]
    pub flow: PathBuf,
    /// Map extent as `min_x,min_y,max_x,max_y`; defaults to the trajectories' extent.
    #[arg(long, value_parser = parse_bounds)]
    pub bounds: Option<Bounds>,
}

#[derive(Debug, Args)]
pub struct ImportYoloArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub width: f64,
    #[arg(long)]
    pub height: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Filename regex whose first capture group is the frame number.
    #[arg(long, default_value = DEFAULT_FRAME_PATTERN)]
    pub pattern: String,
    #[arg(long)]
    pub first_frame: Option<u64>,
    #[arg(long)]
    pub last_frame: Option<u64>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("bad grid size {s:?}"))
    };
    Ok((parse(w)?, parse(h)?))
}

fn parse_bounds(s: &str) -> Result<Bounds, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("bad bounds {s:?}"))?;
    let [a, b, c, d] = v[..] else {
        return Err(format!("expected min_x,min_y,max_x,max_y, got {s:?}"));
    };
    Bounds::new(a, b, c, d).map_err(|e| e.to_string())
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

impl CliError {
    /// Stable machine-readable class printed in front of the message.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Format(f) => match f {
                FormatError::Io { .. } | FormatError::Write(_) => "io",
                FormatError::Order { .. } | FormatError::Ordering(_) => "ordering",
                _ => "parse",
            },
            CliError::Config { .. } => "config",
            CliError::Sim(SimError::InvalidConfig(_)) => "config",
            CliError::Sim(_) => "simulate",
            CliError::Gate(_) => "config",
            CliError::Track(_) => "track",
            CliError::Eval(_) => "evaluate",
            CliError::Analytics(_) => "analyze",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// `error[class]: message` on one line.
    pub fn render(&self) -> String {
        let message = self
            .to_string()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        format!("error[{}]: {message}", self.class())
    }

    pub fn from_clap(err: &clap::Error) -> CliError {
        let text = err.to_string();
        let first = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("invalid arguments");
        CliError::Usage(first.trim_start_matches("error:").trim().to_string())
    }
}

/// An output being written to a temporary file in the target's directory.
struct Staged {
    file: BufWriter<NamedTempFile>,
    target: PathBuf,
}

impl Staged {
    fn new(target: &Path) -> Result<Self, CliError> {
        let dir = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = NamedTempFile::new_in(dir).map_err(|source| CliError::Io {
            path: target.to_path_buf(),
            source,
        })?;
        Ok(Staged {
            file: BufWriter::new(tmp),
            target: target.to_path_buf(),
        })
    }

    fn writer(&mut self) -> &mut BufWriter<NamedTempFile> {
        &mut self.file
    }
}

/// Moves all staged outputs into place; any that are dropped unpersisted are
/// deleted.
fn commit(staged: Vec<Staged>) -> Result<(), CliError> {
    let mut ready = Vec::with_capacity(staged.len());
    for s in staged {
        let target = s.target;
        let tmp = s.file.into_inner().map_err(|e| CliError::Io {
            path: target.clone(),
            source: e.into_error(),
        })?;
        ready.push((tmp, target));
    }
    for (tmp, target) in ready {
        tmp.persist(&target).map_err(|e| CliError::Io {
            path: target,
            source: e.error,
        })?;
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn now_stamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Runs one command; human-readable progress goes to `log`.
pub fn run(cli: Cli, log: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(a, log),
        Command::Track(a) => track(a, log),
        Command::Evaluate(a) => evaluate(a, log),
        Command::Analyze(a) => analyze(a, log),
        Command::ImportYolo(a) => import_yolo(a, log),
    }
}

fn simulate(a: SimulateArgs, log: &mut dyn Write) -> Result<(), CliError> {
    let config: SimConfig = read_json(open(&a.config)?).map_err(|e| CliError::Config {
        path: a.config.clone(),
        message: e.to_string(),
    })?;
    let sim = Simulation::new(config)?;

    let mut out = Staged::new(&a.out)?;
    let mut truth_file = Staged::new(&a.truth)?;
    let mut truth = TruthWriter::new(truth_file.writer())?;
    let mut records = Vec::new();
    let mut frames = 0u64;
    for frame in sim {
        write_frame(out.writer(), &frame.detections)?;
        records.clear();
        records.extend(frame.truth_records());
        truth.write_records(&records)?;
        frames += 1;
    }
    truth.into_inner()?;
    commit(vec![out, truth_file])?;
    let _ = writeln!(log, "simulated {frames} frames");
    Ok(())
}

fn track(a: TrackArgs, log: &mut dyn Write) -> Result<(), CliError> {
    let config = GateConfig::new(a.expected_count, a.conf_threshold)?;
    let input = open(&a.input)?;
    let mut tracker = Tracker::new(config)?;

    let mut out = Staged::new(&a.out)?;
    let mut report_file = Staged::new(&a.report)?;
    let mut writer = TrajectoryWriter::new(out.writer())?;
    for frame in DetectionReader::new(input) {
        match tracker.push(&frame?)? {
            FrameUpdate::Initialized | FrameUpdate::Extended => {
                writer.write_tracks(tracker.tracks())?
            }
            FrameUpdate::Rejected(_) => {}
        }
    }
    writer.into_inner()?;

    let (fdr, rejected) = tracker.finish()?;
    let mut report = TrackReportFile::new(&config, &fdr, rejected);
    if a.stamp {
        report.generated_at = Some(now_stamp());
    }
    write_json(report_file.writer(), &report)?;
    commit(vec![out, report_file])?;
    let _ = writeln!(
        log,
        "accepted {} of {} frames (fdr {})",
        report.accepted_frames, report.total_frames, report.fdr
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs, log: &mut dyn Write) -> Result<(), CliError> {
    let trajectories = read_trajectories(open(&a.tracks)?)?;
    let truth = read_truth(open(&a.truth)?)?;
    let fdr = fdr_from_truth(&truth, &trajectories);
    let result = evaluate_trajectories(&truth, &trajectories, fdr)?;

    let mut report = EvalReportFile::from(&result);
    if a.stamp {
        report.generated_at = Some(now_stamp());
    }
    let mut report_file = Staged::new(&a.report)?;
    write_json(report_file.writer(), &report)?;
    commit(vec![report_file])?;
    let _ = writeln!(log, "id switches: {}", result.id_switches);
    Ok(())
}

fn analyze(a: AnalyzeArgs, log: &mut dyn Write) -> Result<(), CliError> {
    let trajectories = read_trajectories(open(&a.tracks)?)?;
    let bounds = match a.bounds {
        Some(b) => b,
        None => Bounds::enclosing(&trajectories).ok_or_else(|| {
            CliError::Usage(format!("{}: no trajectory points", a.tracks.display()))
        })?,
    };
    let (grid_w, grid_h) = a.grid;
    let map = speed_map(&trajectories, a.fps, grid_w, grid_h, bounds)?;
    let flows = trajectories
        .iter()
        .map(flow_export)
        .collect::<Result<Vec<_>, _>>()?;

    let mut map_file = Staged::new(&a.speed_map)?;
    write_speed_map(map_file.writer(), &map)?;
    let mut flow_file = Staged::new(&a.flow)?;
    write_flow_svg(flow_file.writer(), &flows, &bounds)?;
    commit(vec![map_file, flow_file])?;
    let _ = writeln!(log, "samples outside bounds: {}", map.overflow);
    Ok(())
}

fn import_yolo(a: ImportYoloArgs, log: &mut dyn Write) -> Result<(), CliError> {
    let pattern = FramePattern::new(&a.pattern)?;
    let range = FrameRange {
        first: a.first_frame,
        last: a.last_frame,
    };
    let frames = import_yolo_dir(&a.dir, a.width, a.height, &pattern, range)?;
    let mut out = Staged::new(&a.out)?;
    write_detections(out.writer(), &frames)?;
    commit(vec![out])?;
    let _ = writeln!(log, "imported {} frames", frames.len());
    Ok(())
}
