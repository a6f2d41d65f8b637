//! Geometric primitives and detector-output value types.
//!
//! Coordinates are image pixels with the origin at the top-left corner,
//! x growing rightward and y growing downward. Values are never rounded.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("non-finite value in field `{0}`")]
    NonFinite(&'static str),
    #[error("negative box extent: w={w}, h={h}")]
    NegativeExtent { w: f64, h: f64 },
    #[error("confidence {0} outside [0, 1]")]
    ConfidenceRange(f64),
}

/// A position in pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    /// Checked constructor rejecting NaN and infinities.
    pub fn try_new(x: f64, y: f64) -> Result<Self, TypeError> {
        if !x.is_finite() {
            return Err(TypeError::NonFinite("x"));
        }
        if !y.is_finite() {
            return Err(TypeError::NonFinite("y"));
        }
        Ok(Point2D { x, y })
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn midpoint(&self, other: &Point2D) -> Point2D {
        Point2D::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl Add for Point2D {
    type Output = Point2D;
    fn add(self, rhs: Point2D) -> Point2D {
        Point2D::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2D {
    type Output = Point2D;
    fn sub(self, rhs: Point2D) -> Point2D {
        Point2D::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl fmt::Display for Point2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Euclidean distance between two points, in pixels.
pub fn euclidean_distance(a: Point2D, b: Point2D) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// One detector box, stored as center plus extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub conf: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, conf: f64) -> Result<Self, TypeError> {
        let b = BoundingBox { cx, cy, w, h, conf };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        for (name, v) in [
            ("cx", self.cx),
            ("cy", self.cy),
            ("w", self.w),
            ("h", self.h),
            ("conf", self.conf),
        ] {
            if !v.is_finite() {
                return Err(TypeError::NonFinite(name));
            }
        }
        if self.w < 0.0 || self.h < 0.0 {
            return Err(TypeError::NegativeExtent {
                w: self.w,
                h: self.h,
            });
        }
        if !(0.0..=1.0).contains(&self.conf) {
            return Err(TypeError::ConfidenceRange(self.conf));
        }
        Ok(())
    }

    pub fn center(&self) -> Point2D {
        Point2D::new(self.cx, self.cy)
    }
}

/// Center of a box.
pub fn center(bbox: &BoundingBox) -> Point2D {
    bbox.center()
}

/// Everything the detector reported for a single frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    pub boxes: Vec<BoundingBox>,
}

impl FrameDetections {
    pub fn new(frame_index: u64, boxes: Vec<BoundingBox>) -> Self {
        FrameDetections { frame_index, boxes }
    }

    pub fn validate(&self) -> Result<(), TypeError> {
        self.boxes.iter().try_for_each(BoundingBox::validate)
    }
}
