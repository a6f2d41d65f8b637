//! Identity-switch counting and localization error against ground truth.
//!
//! At every accepted frame the true particles are matched to the tracks by
//! minimum total distance. A particle's first match sets its baseline; each
//! later change of matched track ID counts as one switch for that particle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{build_cost_matrix, AssignmentError, CostMatrix, Hungarian};
use crate::gating::compute_fdr;
use crate::simulator::{truth_by_frame, GroundTruthRecord};
use crate::tracker::{TrackingReport, Trajectory};
use crate::types::Point2D;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{truth} true particles but {tracks} tracks")]
    SizeMismatch { truth: usize, tracks: usize },
    #[error("no ground truth for tracked frame {0}")]
    MissingTruth(u64),
    #[error("trajectory {track_id} does not cover the same frames as trajectory {reference}")]
    TrajectoryFrameMismatch { track_id: u32, reference: u32 },
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMatch {
    pub particle_id: u32,
    pub track_id: u32,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub id_switches: u64,
    /// Every ground-truth particle, with the frames at which its matched
    /// track changed (empty when it never did).
    pub per_particle_switch_frames: BTreeMap<u32, Vec<u64>>,
    pub mean_localization_error: f64,
    pub max_localization_error: f64,
    pub matched_frames: u64,
    pub fdr: f64,
}

/// Minimum-distance matching between the true particles and the tracks of
/// one frame. Results follow the order of `truth_positions`.
pub fn match_frame(
    truth_positions: &[(u32, Point2D)],
    track_positions: &[(u32, Point2D)],
) -> Result<Vec<FrameMatch>, EvalError> {
    FrameMatcher::default().match_frame(truth_positions, track_positions)
}

#[derive(Default)]
struct FrameMatcher {
    solver: Hungarian,
    truth_points: Vec<Point2D>,
    track_points: Vec<Point2D>,
    mapping: Vec<usize>,
}

impl FrameMatcher {
    fn match_frame(
        &mut self,
        truth_positions: &[(u32, Point2D)],
        track_positions: &[(u32, Point2D)],
    ) -> Result<Vec<FrameMatch>, EvalError> {
        if truth_positions.len() != track_positions.len() {
            return Err(EvalError::SizeMismatch {
                truth: truth_positions.len(),
                tracks: track_positions.len(),
            });
        }
        if truth_positions.is_empty() {
            return Ok(Vec::new());
        }
        self.truth_points.clear();
        self.truth_points
            .extend(truth_positions.iter().map(|(_, p)| *p));
        self.track_points.clear();
        self.track_points
            .extend(track_positions.iter().map(|(_, p)| *p));
        let costs: CostMatrix = build_cost_matrix(&self.truth_points, &self.track_points)?;
        self.solver.solve_into(&costs, &mut self.mapping);
        Ok(self
            .mapping
            .iter()
            .enumerate()
            .map(|(i, &j)| FrameMatch {
                particle_id: truth_positions[i].0,
                track_id: track_positions[j].0,
                distance: costs.get(i, j),
            })
            .collect())
    }
}

/// Scores a tracking run against the simulator's truth log.
pub fn count_id_switches(
    truth: &[GroundTruthRecord],
    report: &TrackingReport,
) -> Result<EvalReport, EvalError> {
    evaluate_trajectories(truth, &report.trajectories, report.fdr_report.fdr)
}

/// Rate of tracked frames among all frames the truth log covers; equals the
/// gate's rate whenever the truth log spans the whole detection stream.
pub fn fdr_from_truth(truth: &[GroundTruthRecord], trajectories: &[Trajectory]) -> f64 {
    let mut frames: Vec<u64> = truth.iter().map(|r| r.frame_index).collect();
    frames.sort_unstable();
    frames.dedup();
    let matched = trajectories.first().map_or(0, |t| t.len()) as u64;
    compute_fdr(matched, frames.len() as u64).unwrap_or(0.0)
}

/// Same as [`count_id_switches`] for trajectories read back from disk.
pub fn evaluate_trajectories(
    truth: &[GroundTruthRecord],
    trajectories: &[Trajectory],
    fdr: f64,
) -> Result<EvalReport, EvalError> {
    let frames = truth_by_frame(truth);
    let mut per_particle: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    let mut baseline: BTreeMap<u32, u32> = BTreeMap::new();
    let mut report = EvalReport {
        id_switches: 0,
        per_particle_switch_frames: BTreeMap::new(),
        mean_localization_error: 0.0,
        max_localization_error: 0.0,
        matched_frames: 0,
        fdr,
    };

    let Some(reference) = trajectories.first() else {
        return Ok(report);
    };
    for t in trajectories {
        let same_frames = t.len() == reference.len()
            && t.points
                .iter()
                .zip(&reference.points)
                .all(|(a, b)| a.frame_index == b.frame_index);
        if !same_frames {
            return Err(EvalError::TrajectoryFrameMismatch {
                track_id: t.track_id,
                reference: reference.track_id,
            });
        }
    }

    let mut matcher = FrameMatcher::default();
    let mut tracks: Vec<(u32, Point2D)> = Vec::with_capacity(trajectories.len());
    let (mut error_sum, mut error_count) = (0.0, 0u64);
    for (k, point) in reference.points.iter().enumerate() {
        let frame = point.frame_index;
        let truth_positions = frames.get(&frame).ok_or(EvalError::MissingTruth(frame))?;
        tracks.clear();
        tracks.extend(
            trajectories
                .iter()
                .map(|t| (t.track_id, t.points[k].position)),
        );
        for m in matcher.match_frame(truth_positions, &tracks)? {
            per_particle.entry(m.particle_id).or_default();
            match baseline.insert(m.particle_id, m.track_id) {
                Some(previous) if previous != m.track_id => {
                    report.id_switches += 1;
                    per_particle.entry(m.particle_id).or_default().push(frame);
                }
                _ => {}
            }
            error_sum += m.distance;
            error_count += 1;
            report.max_localization_error = report.max_localization_error.max(m.distance);
        }
        report.matched_frames += 1;
    }
    if error_count > 0 {
        report.mean_localization_error = error_sum / error_count as f64;
    }
    report.per_particle_switch_frames = per_particle;
    Ok(report)
}
