//! Detection-agnostic multi-object tracking for fixed populations of
//! visually identical particles.
//!
//! Frames are gated on confidence and exact count, associated to the previous
//! accepted positions by a minimum-cost Euclidean assignment, and written out
//! as identity-stable trajectories. A seeded particle simulator, an
//! identity-switch evaluator and trajectory analytics sit around the tracker.

pub mod analytics;
pub mod assignment;
pub mod cli;
pub mod evaluation;
pub mod gating;
pub mod io;
pub mod simulator;
pub mod tracker;
pub mod types;

pub use analytics::{
    flow_export, speed_map, speeds, AnalyticsError, Bounds, FlowPolyline, SpeedCell, SpeedMap,
    SpeedSample,
};
pub use assignment::{
    brute_force_assignment, build_cost_matrix, solve_assignment, Assignment, AssignmentError,
    CostMatrix, Hungarian,
};
pub use evaluation::{
    count_id_switches, evaluate_trajectories, match_frame, EvalError, EvalReport, FrameMatch,
};
pub use gating::{
    compute_fdr, gate_frame, FdrReport, GateConfig, GateError, GateOutcome, RejectReason,
    DEFAULT_CONF_THRESHOLD,
};
pub use simulator::{
    displacement_bound_check, simulate, BoundCheck, BoundCheckError, GroundTruthRecord, SimConfig,
    SimError, SimFrame, Simulation,
};
pub use tracker::{
    init_tracks, run, step, FrameUpdate, Track, TrackError, Tracker, TrackingReport, Trajectory,
    TrajectoryPoint,
};
pub use types::{center, euclidean_distance, BoundingBox, FrameDetections, Point2D, TypeError};
