//! Fixed-population, motion-only tracking over a gated detection stream.
//!
//! Identities are assigned once, on the first accepted frame, in the order
//! the centers appear. Every later accepted frame is associated against the
//! last accepted positions by minimum total Euclidean distance; no track is
//! ever created or destroyed. Rejected frames leave the tracks untouched.

use std::borrow::Borrow;

use thiserror::Error;

use crate::assignment::{AssignmentError, CostMatrix, Hungarian};
use crate::gating::{gate_into, FdrReport, GateConfig, GateError, RejectReason};
use crate::types::{FrameDetections, Point2D, TypeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error("cannot initialize tracks from an empty set of centers")]
    EmptyInitialization,
    #[error("{tracks} tracks but {centers} centers")]
    SizeMismatch { tracks: usize, centers: usize },
    #[error("frame {current} does not follow frame {previous}")]
    NonMonotonicFrame { previous: u64, current: u64 },
    #[error("invalid box in frame {frame}: {source}")]
    InvalidBox { frame: u64, source: TypeError },
    #[error("no frame passed the gate; tracks were never initialized")]
    NoAcceptedFrames,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Track {
    pub track_id: u32,
    pub last_position: Point2D,
    pub last_frame: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub frame_index: u64,
    pub position: Point2D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub track_id: u32,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn new(track_id: u32) -> Self {
        Trajectory {
            track_id,
            points: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, frame_index: u64, position: Point2D) {
        self.points.push(TrajectoryPoint {
            frame_index,
            position,
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingReport {
    pub fdr_report: FdrReport,
    pub rejected_frame_indices: Vec<u64>,
    pub trajectories: Vec<Trajectory>,
}

/// IDs `0..n` in input order, all anchored at `frame_index`.
pub fn init_tracks(first_accepted: &[Point2D], frame_index: u64) -> Result<Vec<Track>, TrackError> {
    if first_accepted.is_empty() {
        return Err(TrackError::EmptyInitialization);
    }
    Ok(first_accepted
        .iter()
        .enumerate()
        .map(|(id, &p)| Track {
            track_id: id as u32,
            last_position: p,
            last_frame: frame_index,
        })
        .collect())
}

/// Extends every track by one accepted frame.
pub fn step(tracks: &mut [Track], frame_index: u64, centers: &[Point2D]) -> Result<(), TrackError> {
    let mut assoc = Associator::default();
    assoc.step(tracks, frame_index, centers)
}

/// Scratch space for one association step, kept between frames.
#[derive(Debug, Default, Clone)]
struct Associator {
    solver: Hungarian,
    costs: Option<CostMatrix>,
    previous: Vec<Point2D>,
    mapping: Vec<usize>,
}

impl Associator {
    fn step(
        &mut self,
        tracks: &mut [Track],
        frame_index: u64,
        centers: &[Point2D],
    ) -> Result<(), TrackError> {
        if tracks.len() != centers.len() {
            return Err(TrackError::SizeMismatch {
                tracks: tracks.len(),
                centers: centers.len(),
            });
        }
        if let Some(t) = tracks.iter().find(|t| t.last_frame >= frame_index) {
            return Err(TrackError::NonMonotonicFrame {
                previous: t.last_frame,
                current: frame_index,
            });
        }
        self.previous.clear();
        self.previous.extend(tracks.iter().map(|t| t.last_position));
        let costs = self.costs.get_or_insert_with(CostMatrix::empty);
        costs.refill(&self.previous, centers)?;
        self.solver.solve_into(costs, &mut self.mapping);
        for (track, &col) in tracks.iter_mut().zip(&self.mapping) {
            track.last_position = centers[col];
            track.last_frame = frame_index;
        }
        Ok(())
    }
}

/// What one pushed frame did to the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameUpdate {
    Initialized,
    Extended,
    Rejected(RejectReason),
}

impl FrameUpdate {
    pub fn is_accepted(&self) -> bool {
        !matches!(self, FrameUpdate::Rejected(_))
    }
}

/// Incremental single-stream tracker.
///
/// State is the current track set plus frame accounting; positions are not
/// retained, so memory does not grow with stream length. Callers that want
/// full trajectories read [`Tracker::tracks`] after each accepted frame (as
/// [`run`] does).
#[derive(Debug, Clone)]
pub struct Tracker {
    config: GateConfig,
    tracks: Vec<Track>,
    assoc: Associator,
    centers: Vec<Point2D>,
    fdr: FdrReport,
    rejected: Vec<u64>,
    last_frame: Option<u64>,
}

impl Tracker {
    pub fn new(config: GateConfig) -> Result<Self, TrackError> {
        config.validate()?;
        Ok(Tracker {
            config,
            tracks: Vec::with_capacity(config.expected_count),
            assoc: Associator::default(),
            centers: Vec::with_capacity(config.expected_count),
            fdr: FdrReport::new(),
            rejected: Vec::new(),
            last_frame: None,
        })
    }

    pub fn config(&self) -> &GateConfig {
        &self.config
    }

    /// Empty until the first accepted frame.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn is_initialized(&self) -> bool {
        !self.tracks.is_empty()
    }

    pub fn fdr_report(&self) -> &FdrReport {
        &self.fdr
    }

    pub fn rejected_frame_indices(&self) -> &[u64] {
        &self.rejected
    }

    pub fn push(&mut self, frame: &FrameDetections) -> Result<FrameUpdate, TrackError> {
        if let Some(previous) = self.last_frame {
            if frame.frame_index <= previous {
                return Err(TrackError::NonMonotonicFrame {
                    previous,
                    current: frame.frame_index,
                });
            }
        }
        frame.validate().map_err(|source| TrackError::InvalidBox {
            frame: frame.frame_index,
            source,
        })?;

        let outcome = gate_into(frame, &self.config, &mut self.centers);
        let update = match outcome {
            Some(reason) => {
                self.rejected.push(frame.frame_index);
                FrameUpdate::Rejected(reason)
            }
            None if self.tracks.is_empty() => {
                self.tracks = init_tracks(&self.centers, frame.frame_index)?;
                FrameUpdate::Initialized
            }
            None => {
                self.assoc
                    .step(&mut self.tracks, frame.frame_index, &self.centers)?;
                FrameUpdate::Extended
            }
        };
        self.fdr.record(outcome);
        self.last_frame = Some(frame.frame_index);
        Ok(update)
    }

    /// Consumes the tracker, returning its frame accounting.
    pub fn finish(self) -> Result<(FdrReport, Vec<u64>), TrackError> {
        if self.tracks.is_empty() {
            return Err(TrackError::NoAcceptedFrames);
        }
        Ok((self.fdr, self.rejected))
    }
}

/// Gate and track a whole stream, collecting every trajectory.
pub fn run<I>(stream: I, config: GateConfig) -> Result<TrackingReport, TrackError>
where
    I: IntoIterator,
    I::Item: Borrow<FrameDetections>,
{
    let mut tracker = Tracker::new(config)?;
    let mut trajectories: Vec<Trajectory> = Vec::new();
    for frame in stream {
        let frame = frame.borrow();
        match tracker.push(frame)? {
            FrameUpdate::Rejected(_) => continue,
            FrameUpdate::Initialized => {
                trajectories = tracker
                    .tracks()
                    .iter()
                    .map(|t| Trajectory::new(t.track_id))
                    .collect();
            }
            FrameUpdate::Extended => {}
        }
        for (traj, track) in trajectories.iter_mut().zip(tracker.tracks()) {
            traj.push(track.last_frame, track.last_position);
        }
    }
    let (fdr_report, rejected_frame_indices) = tracker.finish()?;
    Ok(TrackingReport {
        fdr_report,
        rejected_frame_indices,
        trajectories,
    })
}
