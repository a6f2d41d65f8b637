//! Synthetic walker/intruder experiments with a ground-truth log.
//!
//! Particles live in a disk of radius `domain_radius` centred on the origin.
//! Each frame a particle
//!
//! 1. turns by a Gaussian angle with standard deviation `π·(1 − persistence)`,
//! 2. draws a speed from `N(speed_mean, speed_std)` clipped to
//!    `[0, speed_mean + 3·speed_std]`,
//! 3. receives a kick of `repulsion_strength·(1 − d/repulsion_radius)` away
//!    from every neighbour closer than `repulsion_radius` (and a pull of
//!    `attraction_strength·(1 − d/repulsion_radius)` toward it, zero by default),
//! 4. is reflected specularly off the wall.
//!
//! Kicks are computed from the positions at the start of the frame, so the
//! update order of particles does not matter.
//!
//! # Random streams
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)` split with
//! `set_stream`:
//!
//! | stream          | use                                                  |
//! |-----------------|------------------------------------------------------|
//! | `i`             | heading and speed of particle `i`                    |
//! | `u64::MAX - 1`  | initial placement (rejection sampling in the disk)   |
//! | `u64::MAX`      | detection noise, misses, false positives, box order  |
//!
//! Per frame the noise stream draws, for each particle in id order: a miss
//! uniform, x jitter, y jitter, confidence. Then the false-positive count
//! (Poisson), for each false positive a position and a confidence, and
//! finally a Fisher-Yates shuffle of the frame's boxes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{euclidean_distance, BoundingBox, FrameDetections, Point2D};

const PLACEMENT_STREAM: u64 = u64::MAX - 1;
const NOISE_STREAM: u64 = u64::MAX;
const PLACEMENT_ATTEMPTS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("could not place {num_particles} particles {min_separation} px apart in radius {domain_radius}")]
    InfeasiblePlacement {
        num_particles: usize,
        min_separation: f64,
        domain_radius: f64,
    },
}

fn default_box_size() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub num_particles: usize,
    /// Corral radius, px.
    pub domain_radius: f64,
    pub frame_count: u64,
    pub fps: f64,
    /// px/frame
    pub speed_mean: f64,
    pub speed_std: f64,
    /// Heading momentum in [0, 1]; 1 keeps a straight course.
    pub persistence: f64,
    pub repulsion_radius: f64,
    /// px/frame² at contact, falling linearly to zero at `repulsion_radius`.
    pub repulsion_strength: f64,
    #[serde(default)]
    pub attraction_strength: f64,
    /// σ of the isotropic Gaussian added to detection centers, px.
    pub jitter_std: f64,
    pub conf_low: f64,
    pub conf_high: f64,
    pub p_miss: f64,
    /// Mean number of spurious boxes per frame.
    pub p_false_positive: f64,
    /// Side of the square detection boxes, px.
    #[serde(default = "default_box_size")]
    pub box_size: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_particles: 10,
            domain_radius: 400.0,
            frame_count: 10_000,
            fps: 30.0,
            speed_mean: 2.0,
            speed_std: 0.5,
            persistence: 0.9,
            repulsion_radius: 60.0,
            repulsion_strength: 7.0,
            attraction_strength: 0.0,
            jitter_std: 0.5,
            conf_low: 0.6,
            conf_high: 0.99,
            p_miss: 0.0,
            p_false_positive: 0.0,
            box_size: default_box_size(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        let reals = [
            ("domain_radius", self.domain_radius),
            ("fps", self.fps),
            ("speed_mean", self.speed_mean),
            ("speed_std", self.speed_std),
            ("persistence", self.persistence),
            ("repulsion_radius", self.repulsion_radius),
            ("repulsion_strength", self.repulsion_strength),
            ("attraction_strength", self.attraction_strength),
            ("jitter_std", self.jitter_std),
            ("conf_low", self.conf_low),
            ("conf_high", self.conf_high),
            ("p_miss", self.p_miss),
            ("p_false_positive", self.p_false_positive),
            ("box_size", self.box_size),
        ];
        for (name, v) in reals {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if self.num_particles == 0 {
            return bad("num_particles must be at least 1".into());
        }
        if self.frame_count == 0 {
            return bad("frame_count must be at least 1".into());
        }
        if self.fps <= 0.0 {
            return bad("fps must be positive".into());
        }
        if !(self.repulsion_radius > 0.0 && self.domain_radius > self.repulsion_radius) {
            return bad(format!(
                "need domain_radius > repulsion_radius > 0, got {} and {}",
                self.domain_radius, self.repulsion_radius
            ));
        }
        for (name, v) in [("persistence", self.persistence), ("p_miss", self.p_miss)] {
            if v > 1.0 {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.conf_high > 1.0 || self.conf_low > self.conf_high {
            return bad(format!(
                "need 0 <= conf_low <= conf_high <= 1, got {} and {}",
                self.conf_low, self.conf_high
            ));
        }
        Ok(())
    }

    /// Largest per-frame self-propelled step.
    pub fn max_speed(&self) -> f64 {
        self.speed_mean + 3.0 * self.speed_std
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthRecord {
    pub frame_index: u64,
    pub particle_id: u32,
    pub position: Point2D,
}

/// One generated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub detections: FrameDetections,
    /// True positions indexed by particle id.
    pub truth: Vec<Point2D>,
}

impl SimFrame {
    pub fn truth_records(&self) -> impl Iterator<Item = GroundTruthRecord> + '_ {
        let frame_index = self.detections.frame_index;
        self.truth
            .iter()
            .enumerate()
            .map(move |(id, &position)| GroundTruthRecord {
                frame_index,
                particle_id: id as u32,
                position,
            })
    }
}

struct Particle {
    position: Point2D,
    heading: f64,
    rng: ChaCha8Rng,
}

/// Frame-by-frame generator; yields exactly `frame_count` frames.
pub struct Simulation {
    config: SimConfig,
    particles: Vec<Particle>,
    noise: ChaCha8Rng,
    turn: Option<Normal<f64>>,
    speed: Option<Normal<f64>>,
    jitter: Option<Normal<f64>>,
    false_positives: Option<Poisson<f64>>,
    next_frame: u64,
    kicks: Vec<Point2D>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform point in the disk of the given radius.
fn sample_disk<R: Rng>(rng: &mut R, radius: f64) -> Point2D {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    Point2D::new(r * theta.cos(), r * theta.sin())
}

/// Reflects a point that left the disk back inside; flips the radial
/// component of the heading.
fn reflect(position: Point2D, heading: f64, radius: f64) -> (Point2D, f64) {
    let r = position.norm();
    if r <= radius {
        return (position, heading);
    }
    let (nx, ny) = (position.x / r, position.y / r);
    let inside = (2.0 * radius - r).max(0.0);
    let (dx, dy) = (heading.cos(), heading.sin());
    let dot = dx * nx + dy * ny;
    let (rx, ry) = (dx - 2.0 * dot * nx, dy - 2.0 * dot * ny);
    (Point2D::new(nx * inside, ny * inside), ry.atan2(rx))
}

fn normal(std: f64) -> Option<Normal<f64>> {
    (std > 0.0).then(|| Normal::new(0.0, std).expect("finite positive std"))
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let positions = place_particles(&config)?;
        let particles = positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| {
                let mut rng = stream(config.seed, i as u64);
                let heading = rng.random_range(0.0..std::f64::consts::TAU);
                Particle {
                    position,
                    heading,
                    rng,
                }
            })
            .collect();
        Ok(Simulation {
            turn: normal(std::f64::consts::PI * (1.0 - config.persistence)),
            speed: normal(config.speed_std),
            jitter: normal(config.jitter_std),
            false_positives: (config.p_false_positive > 0.0)
                .then(|| Poisson::new(config.p_false_positive).expect("positive rate")),
            noise: stream(config.seed, NOISE_STREAM),
            kicks: vec![Point2D::default(); config.num_particles],
            particles,
            next_frame: 0,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    fn advance(&mut self) {
        let c = &self.config;
        for k in self.kicks.iter_mut() {
            *k = Point2D::default();
        }
        let n = self.particles.len();
        for i in 0..n {
            for j in i + 1..n {
                let delta = self.particles[i].position - self.particles[j].position;
                let d = delta.norm();
                if d >= c.repulsion_radius {
                    continue;
                }
                let falloff = 1.0 - d / c.repulsion_radius;
                let magnitude = (c.repulsion_strength - c.attraction_strength) * falloff;
                let dir = if d > 0.0 {
                    Point2D::new(delta.x / d, delta.y / d)
                } else {
                    Point2D::new(1.0, 0.0)
                };
                let push = Point2D::new(dir.x * magnitude, dir.y * magnitude);
                self.kicks[i] = self.kicks[i] + push;
                self.kicks[j] = self.kicks[j] - push;
            }
        }

        let cap = c.max_speed();
        for (p, kick) in self.particles.iter_mut().zip(&self.kicks) {
            if let Some(turn) = &self.turn {
                p.heading += turn.sample(&mut p.rng);
            }
            let speed = match &self.speed {
                Some(s) => (c.speed_mean + s.sample(&mut p.rng)).clamp(0.0, cap),
                None => c.speed_mean,
            };
            let moved =
                p.position + Point2D::new(speed * p.heading.cos(), speed * p.heading.sin()) + *kick;
            let (position, heading) = reflect(moved, p.heading, c.domain_radius);
            p.position = position;
            p.heading = heading.rem_euclid(std::f64::consts::TAU);
        }
    }

    fn detect(&mut self, frame_index: u64) -> FrameDetections {
        let c = &self.config;
        let mut boxes = Vec::with_capacity(self.particles.len() + 1);
        let conf = |rng: &mut ChaCha8Rng| {
            if c.conf_high > c.conf_low {
                rng.random_range(c.conf_low..=c.conf_high)
            } else {
                c.conf_low
            }
        };
        for p in &self.particles {
            let missed = self.noise.random::<f64>() < c.p_miss;
            let (jx, jy) = match &self.jitter {
                Some(j) => (j.sample(&mut self.noise), j.sample(&mut self.noise)),
                None => (0.0, 0.0),
            };
            let confidence = conf(&mut self.noise);
            if !missed {
                boxes.push(BoundingBox {
                    cx: p.position.x + jx,
                    cy: p.position.y + jy,
                    w: c.box_size,
                    h: c.box_size,
                    conf: confidence,
                });
            }
        }
        let spurious = match &self.false_positives {
            Some(dist) => dist.sample(&mut self.noise) as usize,
            None => 0,
        };
        for _ in 0..spurious {
            let at = sample_disk(&mut self.noise, c.domain_radius);
            let confidence = conf(&mut self.noise);
            boxes.push(BoundingBox {
                cx: at.x,
                cy: at.y,
                w: c.box_size,
                h: c.box_size,
                conf: confidence,
            });
        }
        boxes.shuffle(&mut self.noise);
        FrameDetections::new(frame_index, boxes)
    }
}

impl Iterator for Simulation {
    type Item = SimFrame;

    fn next(&mut self) -> Option<SimFrame> {
        if self.next_frame >= self.config.frame_count {
            return None;
        }
        let frame_index = self.next_frame;
        if frame_index > 0 {
            self.advance();
        }
        self.next_frame += 1;
        let detections = self.detect(frame_index);
        Some(SimFrame {
            detections,
            truth: self.particles.iter().map(|p| p.position).collect(),
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.config.frame_count - self.next_frame) as usize;
        (left, Some(left))
    }
}

fn place_particles(c: &SimConfig) -> Result<Vec<Point2D>, SimError> {
    let min_separation = 2.0 * c.repulsion_radius;
    let mut rng = stream(c.seed, PLACEMENT_STREAM);
    let mut placed: Vec<Point2D> = Vec::with_capacity(c.num_particles);
    let mut attempts = 0;
    while placed.len() < c.num_particles {
        if attempts == PLACEMENT_ATTEMPTS {
            return Err(SimError::InfeasiblePlacement {
                num_particles: c.num_particles,
                min_separation,
                domain_radius: c.domain_radius,
            });
        }
        attempts += 1;
        let candidate = sample_disk(&mut rng, c.domain_radius);
        if placed
            .iter()
            .all(|q| euclidean_distance(*q, candidate) >= min_separation)
        {
            placed.push(candidate);
        }
    }
    Ok(placed)
}

/// Runs a whole simulation in memory.
pub fn simulate(
    config: &SimConfig,
) -> Result<(Vec<FrameDetections>, Vec<GroundTruthRecord>), SimError> {
    let sim = Simulation::new(config.clone())?;
    let mut detections = Vec::with_capacity(config.frame_count as usize);
    let mut truth = Vec::with_capacity(config.frame_count as usize * config.num_particles);
    for frame in sim {
        truth.extend(frame.truth_records());
        detections.push(frame.detections);
    }
    Ok((detections, truth))
}

/// Result of [`displacement_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub holds: bool,
    /// Smallest value of `½·min_separation(earlier) − max_displacement` over
    /// all consecutive accepted-frame pairs. With a single accepted frame it
    /// is half the minimum separation; with one particle it is infinite.
    pub margin: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundCheckError {
    #[error("no ground truth for accepted frame {0}")]
    MissingFrame(u64),
    #[error("ground truth for frame {frame} lists {found} particles, expected {expected}")]
    PopulationChanged {
        frame: u64,
        found: usize,
        expected: usize,
    },
}

/// Groups truth records by frame, each frame's positions ordered by particle id.
pub(crate) fn truth_by_frame(
    truth: &[GroundTruthRecord],
) -> std::collections::BTreeMap<u64, Vec<(u32, Point2D)>> {
    let mut frames: std::collections::BTreeMap<u64, Vec<(u32, Point2D)>> = Default::default();
    for r in truth {
        frames
            .entry(r.frame_index)
            .or_default()
            .push((r.particle_id, r.position));
    }
    for v in frames.values_mut() {
        v.sort_by_key(|(id, _)| *id);
    }
    frames
}

fn min_pairwise(points: &[(u32, Point2D)]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(euclidean_distance(points[i].1, points[j].1));
        }
    }
    best
}

/// Checks the condition under which nearest assignment cannot swap
/// identities: between consecutive accepted frames every particle moves less
/// than half the smallest pairwise distance at the earlier frame.
pub fn displacement_bound_check(
    truth: &[GroundTruthRecord],
    accepted_frames: &[u64],
) -> Result<BoundCheck, BoundCheckError> {
    let frames = truth_by_frame(truth);
    let lookup = |f: u64| frames.get(&f).ok_or(BoundCheckError::MissingFrame(f));

    let mut margin = f64::INFINITY;
    if let [only] = accepted_frames {
        margin = 0.5 * min_pairwise(lookup(*only)?);
    }
    for pair in accepted_frames.windows(2) {
        let (earlier, later) = (lookup(pair[0])?, lookup(pair[1])?);
        if later.len() != earlier.len() {
            return Err(BoundCheckError::PopulationChanged {
                frame: pair[1],
                found: later.len(),
                expected: earlier.len(),
            });
        }
        let half_sep = 0.5 * min_pairwise(earlier);
        let max_step = earlier
            .iter()
            .zip(later)
            .map(|(a, b)| euclidean_distance(a.1, b.1))
            .fold(0.0, f64::max);
        margin = margin.min(half_sep - max_step);
    }
    Ok(BoundCheck {
        holds: margin > 0.0,
        margin,
    })
}
