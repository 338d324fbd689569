//! Shared value types: sampled trajectories, segmentations and segment summaries.
//!
//! Indexes are 0-based. A segmentation's cutoffs `0 = c_0 < c_1 < ... < c_k = n`
//! induce half-open segments `[c_{i-1}, c_i)`, so every sample belongs to
//! exactly one segment.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

/// Planar position in abstract units (projected meters for geographic input).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(self, other: Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub(crate) fn check(self) -> Result<Self> {
        check_finite("x coordinate", self.x)?;
        check_finite("y coordinate", self.y)?;
        Ok(self)
    }

    /// Linear interpolation, `s` in [0, 1].
    pub fn lerp(self, other: Point2, s: f64) -> Point2 {
        self + (other - self) * s
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Point2 {
    type Output = Point2;
    fn div(self, s: f64) -> Point2 {
        Point2::new(self.x / s, self.y / s)
    }
}

/// Closed axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        let r = Self {
            min_x,
            min_y,
            max_x,
            max_y,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.min_x, self.min_y, self.max_x, self.max_y] {
            check_finite("rectangle bound", v)?;
        }
        if self.min_x > self.max_x || self.min_y > self.max_y {
            return Err(Error::InvalidParam {
                name: "rect",
                reason: format!(
                    "empty rectangle [{}, {}] x [{}, {}]",
                    self.min_x, self.max_x, self.min_y, self.max_y
                ),
            });
        }
        Ok(())
    }

    /// Smallest rectangle containing all points, `None` for no points.
    pub fn bounding<I: IntoIterator<Item = Point2>>(points: I) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut r = Rect {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for p in it {
            r.min_x = r.min_x.min(p.x);
            r.min_y = r.min_y.min(p.y);
            r.max_x = r.max_x.max(p.x);
            r.max_y = r.max_y.max(p.y);
        }
        Some(r)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Euclidean distance from `p` to the rectangle (0 inside).
    pub fn distance_to(&self, p: Point2) -> f64 {
        let dx = (self.min_x - p.x).max(0.0).max(p.x - self.max_x);
        let dy = (self.min_y - p.y).max(0.0).max(p.y - self.max_y);
        dx.hypot(dy)
    }

    pub fn intersects_circle(&self, center: Point2, radius: f64) -> bool {
        self.distance_to(center) <= radius
    }

    pub fn inflate(&self, by: f64) -> Rect {
        Rect {
            min_x: self.min_x - by,
            min_y: self.min_y - by,
            max_x: self.max_x + by,
            max_y: self.max_y + by,
        }
    }

    pub fn union(&self, o: &Rect) -> Rect {
        Rect {
            min_x: self.min_x.min(o.min_x),
            min_y: self.min_y.min(o.min_y),
            max_x: self.max_x.max(o.max_x),
            max_y: self.max_y.max(o.max_y),
        }
    }
}

/// Opaque trajectory identifier. Ordering is lexicographic and is used for
/// every tie-break in the crate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrajId(String);

impl TrajId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TrajId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TrajId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for TrajId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// One timestamped position of a trajectory whose id is known from context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub pos: Point2,
}

impl Sample {
    pub const fn new(t: f64, x: f64, y: f64) -> Self {
        Self {
            t,
            pos: Point2::new(x, y),
        }
    }

    pub(crate) fn check(self) -> Result<Self> {
        check_finite("timestamp", self.t)?;
        self.pos.check()?;
        Ok(self)
    }
}

/// The stream unit: an observation tagged with the trajectory it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub traj_id: TrajId,
    pub t: f64,
    pub pos: Point2,
}

impl SamplePoint {
    pub fn new(traj_id: impl Into<TrajId>, t: f64, x: f64, y: f64) -> Self {
        Self {
            traj_id: traj_id.into(),
            t,
            pos: Point2::new(x, y),
        }
    }

    pub fn sample(&self) -> Sample {
        Sample {
            t: self.t,
            pos: self.pos,
        }
    }
}

/// A non-empty, time-ordered sequence of samples of one moving entity.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    id: TrajId,
    samples: Vec<Sample>,
}

impl SampledTrajectory {
    pub fn new(id: impl Into<TrajId>, samples: Vec<Sample>) -> Result<Self> {
        let id = id.into();
        if samples.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let mut last = f64::NEG_INFINITY;
        for s in &samples {
            s.check()?;
            if s.t < last {
                return Err(Error::TimestampRegression {
                    traj_id: id,
                    last,
                    got: s.t,
                });
            }
            last = s.t;
        }
        Ok(Self { id, samples })
    }

    /// Builds a trajectory from `(t, x, y)` triples.
    pub fn from_triples(id: impl Into<TrajId>, rows: &[(f64, f64, f64)]) -> Result<Self> {
        Self::new(
            id,
            rows.iter().map(|&(t, x, y)| Sample::new(t, x, y)).collect(),
        )
    }

    pub fn id(&self) -> &TrajId {
        &self.id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.samples[0].t, self.samples[self.samples.len() - 1].t)
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    /// Sum of distances between consecutive samples.
    pub fn path_length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[0].pos.dist(w[1].pos))
            .sum()
    }
}

/// Cutoff indexes `0 = c_0 < ... < c_k = n`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Segmentation {
    pub cutoffs: Vec<usize>,
}

impl Segmentation {
    pub fn new(cutoffs: Vec<usize>) -> Self {
        Self { cutoffs }
    }

    pub fn num_segments(&self) -> usize {
        self.cutoffs.len().saturating_sub(1)
    }

    /// Half-open index ranges of the segments.
    pub fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.cutoffs.windows(2).map(|w| w[0]..w[1])
    }

    pub fn is_valid_for(&self, len: usize) -> bool {
        self.cutoffs.first() == Some(&0)
            && self.cutoffs.last() == Some(&len)
            && self.cutoffs.windows(2).all(|w| w[0] < w[1])
    }
}

/// True iff the cutoffs strictly increase, start at 0 and end at the trajectory length.
pub fn validate_segmentation(traj: &SampledTrajectory, seg: &Segmentation) -> bool {
    seg.is_valid_for(traj.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    /// Grew past `min_r` while staying dense: a stay / local bout.
    Local,
    /// Everything else; directed movement decimated at `min_r` scale.
    Locomotive,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Local => "local",
            SegmentKind::Locomotive => "locomotive",
        }
    }
}

/// One closed segment. Field order is the JSON-lines export order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub traj_id: TrajId,
    pub centroid: Point2,
    pub t_rep: f64,
    /// Running-circle radius: max distance of each arriving sample to the
    /// centroid current at its arrival.
    pub radius: f64,
    pub n_points: usize,
    pub start_idx: usize,
    pub end_idx: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub kind: SegmentKind,
    /// Upper bound on the distance from the final centroid to any member
    /// sample. Unlike `radius` this survives centroid drift.
    pub extent: f64,
}

impl SegmentSummary {
    pub fn sample(&self) -> Sample {
        Sample {
            t: self.t_rep,
            pos: self.centroid,
        }
    }

    /// Containment radius used by the index: never smaller than `radius`.
    pub fn reach(&self) -> f64 {
        self.extent.max(self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TRepMode {
    #[default]
    MeanTime,
    StartTime,
}

/// Density estimator driving the cut decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    RunningCircle,
    BoundingRect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmenterParams {
    pub min_r: f64,
    pub min_density: f64,
    #[serde(default)]
    pub t_rep_mode: TRepMode,
    #[serde(default)]
    pub estimator: EstimatorKind,
}

impl SegmenterParams {
    pub fn new(min_r: f64, min_density: f64) -> Result<Self> {
        let p = Self {
            min_r,
            min_density,
            t_rep_mode: TRepMode::default(),
            estimator: EstimatorKind::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_t_rep_mode(mut self, mode: TRepMode) -> Self {
        self.t_rep_mode = mode;
        self
    }

    pub fn with_estimator(mut self, estimator: EstimatorKind) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_r.is_finite() && self.min_r > 0.0) {
            return Err(Error::InvalidParam {
                name: "min_r",
                reason: format!("must be a positive finite length, got {}", self.min_r),
            });
        }
        if !(self.min_density.is_finite() && self.min_density > 0.0) {
            return Err(Error::InvalidParam {
                name: "min_density",
                reason: format!("must be positive and finite, got {}", self.min_density),
            });
        }
        Ok(())
    }
}

/// Turns a summary sequence into the trajectory of `(t_rep, centroid)` samples.
pub fn summaries_as_trajectory(summaries: &[SegmentSummary]) -> Result<SampledTrajectory> {
    let first = summaries.first().ok_or(Error::EmptyTrajectory)?;
    SampledTrajectory::new(
        first.traj_id.clone(),
        summaries.iter().map(SegmentSummary::sample).collect(),
    )
}
