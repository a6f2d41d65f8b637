//! Speeds, gridded speed maps and flow polylines derived from trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tracker::{Trajectory, TrajectoryPoint};
use crate::types::{euclidean_distance, Point2D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("fps must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("trajectory {track_id} has {points} points; at least 2 are needed")]
    InsufficientData { track_id: u32, points: usize },
    #[error("grid dimensions must be positive, got {w}x{h}")]
    EmptyGrid { w: usize, h: usize },
    #[error("degenerate bounds {0:?}")]
    DegenerateBounds(Bounds),
    #[error("trajectory {0} is empty")]
    EmptyTrajectory(u32),
    #[error("frames {previous} and {current} are not increasing in trajectory {track_id}")]
    NonIncreasingFrames {
        track_id: u32,
        previous: u64,
        current: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedSample {
    /// Later frame of the step.
    pub frame_index: u64,
    /// px/s
    pub speed: f64,
    /// Midpoint of the step; the binning key.
    pub position: Point2D,
}

/// Axis-aligned rectangle in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self, AnalyticsError> {
        let b = Bounds {
            min_x,
            min_y,
            max_x,
            max_y,
        };
        let finite = [min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite());
        if !finite || max_x <= min_x || max_y <= min_y {
            return Err(AnalyticsError::DegenerateBounds(b));
        }
        Ok(b)
    }

    /// Smallest rectangle holding every trajectory point, widened by half a
    /// pixel along any axis with zero extent. `None` if there are no points.
    pub fn enclosing(trajs: &[Trajectory]) -> Option<Bounds> {
        let mut pts = trajs.iter().flat_map(|t| &t.points).map(|p| p.position);
        let first = pts.next()?;
        let (mut lo, mut hi) = (first, first);
        for p in pts {
            lo = Point2D::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2D::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if hi.x == lo.x {
            lo.x -= 0.5;
            hi.x += 0.5;
        }
        if hi.y == lo.y {
            lo.y -= 0.5;
            hi.y += 0.5;
        }
        Some(Bounds {
            min_x: lo.x,
            min_y: lo.y,
            max_x: hi.x,
            max_y: hi.y,
        })
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// One speed per consecutive point pair. Gaps left by rejected frames are
/// honoured: the elapsed time is the actual frame difference over `fps`.
pub fn speeds(traj: &Trajectory, fps: f64) -> Result<Vec<SpeedSample>, AnalyticsError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(AnalyticsError::InvalidFps(fps));
    }
    if traj.len() < 2 {
        return Err(AnalyticsError::InsufficientData {
            track_id: traj.track_id,
            points: traj.len(),
        });
    }
    traj.points
        .windows(2)
        .map(|w| {
            let (a, b): (&TrajectoryPoint, &TrajectoryPoint) = (&w[0], &w[1]);
            if b.frame_index <= a.frame_index {
                return Err(AnalyticsError::NonIncreasingFrames {
                    track_id: traj.track_id,
                    previous: a.frame_index,
                    current: b.frame_index,
                });
            }
            let frames = (b.frame_index - a.frame_index) as f64;
            Ok(SpeedSample {
                frame_index: b.frame_index,
                speed: euclidean_distance(a.position, b.position) * fps / frames,
                position: a.position.midpoint(&b.position),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpeedCell {
    pub mean_speed: f64,
    pub sample_count: u64,
}

/// Mean speed per grid cell. Row `r` spans y, column `c` spans x; cells are
/// half-open `[lo, hi)` except the last row/column, which is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedMap {
    pub grid_w: usize,
    pub grid_h: usize,
    pub bounds: Bounds,
    /// Row-major, `grid_h` rows of `grid_w` cells.
    pub cells: Vec<SpeedCell>,
    /// Samples whose midpoint fell outside `bounds`.
    pub overflow: u64,
}

impl SpeedMap {
    pub fn cell(&self, row: usize, col: usize) -> &SpeedCell {
        &self.cells[row * self.grid_w + col]
    }

    pub fn cell_width(&self) -> f64 {
        self.bounds.width() / self.grid_w as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.bounds.height() / self.grid_h as f64
    }

    /// `(row, col)` for a point, or `None` outside the bounds.
    pub fn locate(&self, p: Point2D) -> Option<(usize, usize)> {
        let col = bin(p.x, self.bounds.min_x, self.bounds.max_x, self.grid_w)?;
        let row = bin(p.y, self.bounds.min_y, self.bounds.max_y, self.grid_h)?;
        Some((row, col))
    }

    pub fn binned_samples(&self) -> u64 {
        self.cells.iter().map(|c| c.sample_count).sum()
    }
}

fn bin(v: f64, lo: f64, hi: f64, n: usize) -> Option<usize> {
    if !(lo..=hi).contains(&v) {
        return None;
    }
    let k = ((v - lo) / (hi - lo) * n as f64).floor() as usize;
    Some(k.min(n - 1))
}

pub fn speed_map(
    trajs: &[Trajectory],
    fps: f64,
    grid_w: usize,
    grid_h: usize,
    bounds: Bounds,
) -> Result<SpeedMap, AnalyticsError> {
    if grid_w == 0 || grid_h == 0 {
        return Err(AnalyticsError::EmptyGrid {
            w: grid_w,
            h: grid_h,
        });
    }
    let bounds = Bounds::new(bounds.min_x, bounds.min_y, bounds.max_x, bounds.max_y)?;
    let mut map = SpeedMap {
        grid_w,
        grid_h,
        bounds,
        cells: vec![SpeedCell::default(); grid_w * grid_h],
        overflow: 0,
    };
    let mut sums = vec![0.0; grid_w * grid_h];
    for traj in trajs {
        if traj.len() < 2 {
            continue;
        }
        for s in speeds(traj, fps)? {
            match map.locate(s.position) {
                Some((row, col)) => {
                    let k = row * grid_w + col;
                    sums[k] += s.speed;
                    map.cells[k].sample_count += 1;
                }
                None => map.overflow += 1,
            }
        }
    }
    for (cell, sum) in map.cells.iter_mut().zip(sums) {
        if cell.sample_count > 0 {
            cell.mean_speed = sum / cell.sample_count as f64;
        }
    }
    Ok(map)
}

/// A trajectory as an unsmoothed polyline with its first and last vertices
/// singled out for start/end markers.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPolyline {
    pub track_id: u32,
    pub vertices: Vec<Point2D>,
    pub marker_start: Point2D,
    pub marker_end: Point2D,
}

pub fn flow_export(traj: &Trajectory) -> Result<FlowPolyline, AnalyticsError> {
    let (first, last) = match (traj.points.first(), traj.points.last()) {
        (Some(f), Some(l)) => (f.position, l.position),
        _ => return Err(AnalyticsError::EmptyTrajectory(traj.track_id)),
    };
    Ok(FlowPolyline {
        track_id: traj.track_id,
        vertices: traj.points.iter().map(|p| p.position).collect(),
        marker_start: first,
        marker_end: last,
    })
}
