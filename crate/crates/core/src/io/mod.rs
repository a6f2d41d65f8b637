//! On-disk formats.
//!
//! * detections: one JSON object per line, `{"frame": n, "boxes": [...]}`
//! * trajectories: CSV `frame,track_id,x,y`, sorted by frame then track
//! * truth: CSV `frame,particle_id,x,y`, sorted by frame then particle
//! * reports: pretty-printed JSON
//!
//! Reals are written in shortest round-trip form, so reading a file back
//! reproduces the in-memory values bit for bit.

pub mod svg;
pub mod yolo;

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::SpeedMap;
use crate::evaluation::EvalReport;
use crate::gating::{round_fdr, FdrReport, GateConfig};
use crate::simulator::GroundTruthRecord;
use crate::tracker::{Track, TrackingReport, Trajectory};
use crate::types::{FrameDetections, Point2D, TypeError};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{path}:{line}: {message}")]
    FileParse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("line {line}: {source}")]
    InvalidBox { line: u64, source: TypeError },
    #[error("line {line}: frame {current} does not follow frame {previous}")]
    Order {
        line: u64,
        previous: u64,
        current: u64,
    },
    #[error("{0}")]
    Ordering(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Write(#[from] std::io::Error),
}

/// Streams frames from line-delimited JSON, enforcing strictly increasing
/// frame indices and valid boxes. Blank lines are skipped.
pub struct DetectionReader<R> {
    input: R,
    line: u64,
    previous: Option<u64>,
    buf: String,
    failed: bool,
}

impl<R: BufRead> DetectionReader<R> {
    pub fn new(input: R) -> Self {
        DetectionReader {
            input,
            line: 0,
            previous: None,
            buf: String::new(),
            failed: false,
        }
    }

    fn read_frame(&mut self) -> Option<Result<FrameDetections, FormatError>> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(FormatError::Write(e))),
            }
            self.line += 1;
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let line = self.line;
            let frame: FrameDetections = match serde_json::from_str(text) {
                Ok(f) => f,
                Err(e) => {
                    return Some(Err(FormatError::Parse {
                        line,
                        message: e.to_string(),
                    }))
                }
            };
            if let Err(source) = frame.validate() {
                return Some(Err(FormatError::InvalidBox { line, source }));
            }
            if let Some(previous) = self.previous {
                if frame.frame_index <= previous {
                    return Some(Err(FormatError::Order {
                        line,
                        previous,
                        current: frame.frame_index,
                    }));
                }
            }
            self.previous = Some(frame.frame_index);
            return Some(Ok(frame));
        }
    }
}

impl<R: BufRead> Iterator for DetectionReader<R> {
    type Item = Result<FrameDetections, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = self.read_frame();
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

pub fn read_detections<R: BufRead>(input: R) -> Result<Vec<FrameDetections>, FormatError> {
    DetectionReader::new(input).collect()
}

pub fn write_frame<W: Write>(out: &mut W, frame: &FrameDetections) -> Result<(), FormatError> {
    serde_json::to_writer(&mut *out, frame)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_detections<'a, W, I>(out: &mut W, frames: I) -> Result<(), FormatError>
where
    W: Write,
    I: IntoIterator<Item = &'a FrameDetections>,
{
    frames.into_iter().try_for_each(|f| write_frame(out, f))
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    frame: u64,
    track_id: u32,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRow {
    frame: u64,
    particle_id: u32,
    x: f64,
    y: f64,
}

/// Incremental writer for the trajectory CSV.
pub struct TrajectoryWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TrajectoryWriter<W> {
    /// Writes the header immediately, so a run without accepted frames
    /// still produces a well-formed file.
    pub fn new(out: W) -> Result<Self, FormatError> {
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        inner.write_record(["frame", "track_id", "x", "y"])?;
        Ok(TrajectoryWriter { inner })
    }

    /// Rows for one accepted frame, in track-id order.
    pub fn write_tracks(&mut self, tracks: &[Track]) -> Result<(), FormatError> {
        for t in tracks {
            self.inner.serialize(TrajectoryRow {
                frame: t.last_frame,
                track_id: t.track_id,
                x: t.last_position.x,
                y: t.last_position.y,
            })?;
        }
        Ok(())
    }

    pub fn write_trajectories(&mut self, trajs: &[Trajectory]) -> Result<(), FormatError> {
        let mut rows: Vec<TrajectoryRow> = trajs
            .iter()
            .flat_map(|t| {
                t.points.iter().map(move |p| TrajectoryRow {
                    frame: p.frame_index,
                    track_id: t.track_id,
                    x: p.position.x,
                    y: p.position.y,
                })
            })
            .collect();
        rows.sort_by_key(|r| (r.frame, r.track_id));
        rows.into_iter().try_for_each(|r| self.inner.serialize(r))?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W, FormatError> {
        self.inner
            .into_inner()
            .map_err(|e| FormatError::Write(e.into_error()))
    }
}

fn check_sorted(
    previous: &mut Option<(u64, u32)>,
    key: (u64, u32),
    what: &str,
) -> Result<(), FormatError> {
    if let Some(prev) = *previous {
        if key <= prev {
            return Err(FormatError::Ordering(format!(
                "{what} rows out of order or duplicated: ({}, {}) after ({}, {})",
                key.0, key.1, prev.0, prev.1
            )));
        }
    }
    *previous = Some(key);
    Ok(())
}

/// Trajectories ordered by track id.
pub fn read_trajectories<R: Read>(input: R) -> Result<Vec<Trajectory>, FormatError> {
    let mut by_id: BTreeMap<u32, Trajectory> = BTreeMap::new();
    let mut previous = None;
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: TrajectoryRow = row?;
        check_sorted(&mut previous, (row.frame, row.track_id), "trajectory")?;
        by_id
            .entry(row.track_id)
            .or_insert_with(|| Trajectory::new(row.track_id))
            .push(row.frame, Point2D::new(row.x, row.y));
    }
    Ok(by_id.into_values().collect())
}

pub fn write_truth<W: Write>(out: W, truth: &[GroundTruthRecord]) -> Result<(), FormatError> {
    let mut w = TruthWriter::new(out)?;
    w.write_records(truth)?;
    w.into_inner()?;
    Ok(())
}

pub struct TruthWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TruthWriter<W> {
    pub fn new(out: W) -> Result<Self, FormatError> {
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        inner.write_record(["frame", "particle_id", "x", "y"])?;
        Ok(TruthWriter { inner })
    }

    pub fn write_records(&mut self, records: &[GroundTruthRecord]) -> Result<(), FormatError> {
        for r in records {
            self.inner.serialize(TruthRow {
                frame: r.frame_index,
                particle_id: r.particle_id,
                x: r.position.x,
                y: r.position.y,
            })?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> Result<W, FormatError> {
        self.inner
            .into_inner()
            .map_err(|e| FormatError::Write(e.into_error()))
    }
}

pub fn read_truth<R: Read>(input: R) -> Result<Vec<GroundTruthRecord>, FormatError> {
    let mut out = Vec::new();
    let mut previous = None;
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: TruthRow = row?;
        check_sorted(&mut previous, (row.frame, row.particle_id), "truth")?;
        out.push(GroundTruthRecord {
            frame_index: row.frame,
            particle_id: row.particle_id,
            position: Point2D::new(row.x, row.y),
        });
    }
    Ok(out)
}

/// Report written by `track`. `fdr` is rounded to five decimals for display;
/// `fdr_full` carries the exact value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReportFile {
    pub expected_count: usize,
    pub conf_threshold: f64,
    pub total_frames: u64,
    pub accepted_frames: u64,
    pub rejected_frames: u64,
    pub fdr: f64,
    pub fdr_full: f64,
    pub rejection_histogram: BTreeMap<usize, u64>,
    pub rejected_frame_indices: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

impl TrackReportFile {
    pub fn new(config: &GateConfig, fdr: &FdrReport, rejected_frame_indices: Vec<u64>) -> Self {
        TrackReportFile {
            expected_count: config.expected_count,
            conf_threshold: config.conf_threshold,
            total_frames: fdr.total_frames,
            accepted_frames: fdr.accepted_frames,
            rejected_frames: fdr.rejected_frames,
            fdr: round_fdr(fdr.fdr),
            fdr_full: fdr.fdr,
            rejection_histogram: fdr.rejection_histogram.clone(),
            rejected_frame_indices,
            generated_at: None,
        }
    }

    pub fn from_report(config: &GateConfig, report: &TrackingReport) -> Self {
        Self::new(
            config,
            &report.fdr_report,
            report.rejected_frame_indices.clone(),
        )
    }

    pub fn fdr_report(&self) -> FdrReport {
        FdrReport {
            total_frames: self.total_frames,
            accepted_frames: self.accepted_frames,
            rejected_frames: self.rejected_frames,
            fdr: self.fdr_full,
            rejection_histogram: self.rejection_histogram.clone(),
        }
    }
}

/// Report written by `evaluate`; same display/full split for the rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReportFile {
    pub id_switches: u64,
    pub per_particle_switch_frames: BTreeMap<u32, Vec<u64>>,
    pub mean_localization_error: f64,
    pub max_localization_error: f64,
    pub matched_frames: u64,
    pub fdr: f64,
    pub fdr_full: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<u64>,
}

impl From<&EvalReport> for EvalReportFile {
    fn from(r: &EvalReport) -> Self {
        EvalReportFile {
            id_switches: r.id_switches,
            per_particle_switch_frames: r.per_particle_switch_frames.clone(),
            mean_localization_error: r.mean_localization_error,
            max_localization_error: r.max_localization_error,
            matched_frames: r.matched_frames,
            fdr: round_fdr(r.fdr),
            fdr_full: r.fdr,
            generated_at: None,
        }
    }
}

impl From<&EvalReportFile> for EvalReport {
    fn from(f: &EvalReportFile) -> Self {
        EvalReport {
            id_switches: f.id_switches,
            per_particle_switch_frames: f.per_particle_switch_frames.clone(),
            mean_localization_error: f.mean_localization_error,
            max_localization_error: f.max_localization_error,
            matched_frames: f.matched_frames,
            fdr: f.fdr_full,
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<(), FormatError> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<T, FormatError> {
    Ok(serde_json::from_reader(input)?)
}

/// Speed-map grid as CSV `row,col,mean_speed,count`, every cell included.
pub fn write_speed_map<W: Write>(out: W, map: &SpeedMap) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "mean_speed", "count"])?;
    for row in 0..map.grid_h {
        for col in 0..map.grid_w {
            let c = map.cell(row, col);
            w.serialize((row, col, c.mean_speed, c.sample_count))?;
        }
    }
    w.flush()?;
    Ok(())
}
