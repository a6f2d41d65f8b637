//! Per-frame acceptance test and frame-detection-rate accounting.
//!
//! A frame is accepted when, after discarding boxes whose confidence is
//! below the threshold, exactly the expected number of boxes remain. The
//! comparison is inclusive: a box at exactly the threshold survives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{FrameDetections, Point2D};

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.45;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("expected_count must be at least 1")]
    ZeroExpectedCount,
    #[error("confidence threshold {0} outside [0, 1]")]
    ThresholdRange(f64),
    #[error("frame detection rate undefined for zero total frames")]
    UndefinedRate,
    #[error("accepted frames {accepted} exceed total frames {total}")]
    AcceptedExceedsTotal { accepted: u64, total: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub expected_count: usize,
    pub conf_threshold: f64,
}

impl GateConfig {
    pub fn new(expected_count: usize, conf_threshold: f64) -> Result<Self, GateError> {
        let config = GateConfig {
            expected_count,
            conf_threshold,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_default_threshold(expected_count: usize) -> Result<Self, GateError> {
        Self::new(expected_count, DEFAULT_CONF_THRESHOLD)
    }

    pub fn validate(&self) -> Result<(), GateError> {
        if self.expected_count == 0 {
            return Err(GateError::ZeroExpectedCount);
        }
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return Err(GateError::ThresholdRange(self.conf_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    /// Number of boxes that survived the confidence filter.
    CountMismatch { found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateOutcome {
    /// Centers of the surviving boxes, in stream order.
    Accepted(Vec<Point2D>),
    Rejected(RejectReason),
}

impl GateOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, GateOutcome::Accepted(_))
    }
}

/// Filter-then-count, writing accepted centers into `centers`.
///
/// Returns `None` on acceptance, or the rejection reason. `centers` holds the
/// survivors either way and is only meaningful on acceptance.
pub(crate) fn gate_into(
    frame: &FrameDetections,
    config: &GateConfig,
    centers: &mut Vec<Point2D>,
) -> Option<RejectReason> {
    centers.clear();
    centers.extend(
        frame
            .boxes
            .iter()
            .filter(|b| b.conf >= config.conf_threshold)
            .map(|b| b.center()),
    );
    if centers.len() == config.expected_count {
        None
    } else {
        Some(RejectReason::CountMismatch {
            found: centers.len(),
        })
    }
}

pub fn gate_frame(frame: &FrameDetections, config: &GateConfig) -> GateOutcome {
    let mut centers = Vec::with_capacity(frame.boxes.len());
    match gate_into(frame, config, &mut centers) {
        None => GateOutcome::Accepted(centers),
        Some(reason) => GateOutcome::Rejected(reason),
    }
}

/// `accepted / total`.
pub fn compute_fdr(accepted_frames: u64, total_frames: u64) -> Result<f64, GateError> {
    if total_frames == 0 {
        return Err(GateError::UndefinedRate);
    }
    if accepted_frames > total_frames {
        return Err(GateError::AcceptedExceedsTotal {
            accepted: accepted_frames,
            total: total_frames,
        });
    }
    Ok(accepted_frames as f64 / total_frames as f64)
}

/// Rounds a rate to five decimals for display in report files.
pub fn round_fdr(fdr: f64) -> f64 {
    (fdr * 1e5).round() / 1e5
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FdrReport {
    pub total_frames: u64,
    pub accepted_frames: u64,
    pub rejected_frames: u64,
    /// Full-precision rate; 0 when no frames were seen.
    pub fdr: f64,
    /// Surviving-box count → number of frames rejected with that count.
    pub rejection_histogram: BTreeMap<usize, u64>,
}

impl FdrReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, outcome: Option<RejectReason>) {
        self.total_frames += 1;
        match outcome {
            None => self.accepted_frames += 1,
            Some(RejectReason::CountMismatch { found }) => {
                self.rejected_frames += 1;
                *self.rejection_histogram.entry(found).or_insert(0) += 1;
            }
        }
        self.fdr = compute_fdr(self.accepted_frames, self.total_frames).unwrap_or(0.0);
    }

    pub fn record_outcome(&mut self, outcome: &GateOutcome) {
        self.record(match outcome {
            GateOutcome::Accepted(_) => None,
            GateOutcome::Rejected(reason) => Some(*reason),
        });
    }

    pub fn fdr_rounded(&self) -> f64 {
        round_fdr(self.fdr)
    }
}
