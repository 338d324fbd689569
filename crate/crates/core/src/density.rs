//! Point-set density estimators.
//!
//! Two constant-memory streaming estimators (running circle, bounding
//! rectangle) used by the segmenter, and two exact offline references
//! (minimum enclosing circle, convex hull) used to check them. Density is
//! points per unit area and is `+inf` when the enclosing shape has zero area.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    RunningCircle,
    BoundingRect,
    MinEnclosingCircle,
    ConvexHull,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub n: usize,
    pub area: f64,
    pub density: f64,
    pub shape: Shape,
}

impl DensityEstimate {
    pub fn new(n: usize, area: f64, shape: Shape) -> Self {
        let density = if n == 0 {
            0.0
        } else if area > 0.0 {
            n as f64 / area
        } else {
            f64::INFINITY
        };
        Self {
            n,
            area,
            density,
            shape,
        }
    }
}

/// Running centroid and radius of the current segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningCircleState {
    pub centroid: Point2,
    pub radius: f64,
    pub n: usize,
}

impl RunningCircleState {
    pub fn new(first: Point2) -> Self {
        Self {
            centroid: first,
            radius: 0.0,
            n: 1,
        }
    }

    /// Counts `p` and grows the radius against the current (pre-update) centroid.
    #[inline]
    pub fn observe(&mut self, p: Point2) {
        self.n += 1;
        // plain sqrt(dx^2 + dy^2), not hypot: keeps cut decisions bit-identical
        // to a literal evaluation of the loop
        self.radius = self.radius.max(self.centroid.dist_sq(p).sqrt());
    }

    /// Folds `p` into the running mean. Must follow [`observe`](Self::observe)
    /// for the same point, so `n` already includes it.
    #[inline]
    pub fn absorb(&mut self, p: Point2) {
        let n = self.n as f64;
        self.centroid = (self.centroid * (n - 1.0) + p) / n;
    }

    /// Radius update followed by mean update.
    pub fn update(mut self, p: Point2) -> Result<Self> {
        p.check()?;
        self.observe(p);
        self.absorb(p);
        Ok(self)
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn density(&self) -> DensityEstimate {
        DensityEstimate::new(self.n, self.area(), Shape::RunningCircle)
    }
}

/// Streaming axis-aligned bounding box with a point count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingRectState {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
    pub n: usize,
}

impl Default for BoundingRectState {
    fn default() -> Self {
        Self::empty()
    }
}

impl BoundingRectState {
    pub const fn empty() -> Self {
        Self {
            min_x: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            min_y: f64::INFINITY,
            max_y: f64::NEG_INFINITY,
            n: 0,
        }
    }

    pub fn from_point(p: Point2) -> Self {
        let mut s = Self::empty();
        s.extend(p);
        s
    }

    #[inline]
    pub fn extend(&mut self, p: Point2) {
        self.n += 1;
        self.max_x = self.max_x.max(p.x);
        self.max_y = self.max_y.max(p.y);
        self.min_x = self.min_x.min(p.x);
        self.min_y = self.min_y.min(p.y);
    }

    pub fn update(mut self, p: Point2) -> Result<Self> {
        p.check()?;
        self.extend(p);
        Ok(self)
    }

    pub fn area(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.max_x - self.min_x) * (self.max_y - self.min_y)
        }
    }

    pub fn density(&self) -> DensityEstimate {
        DensityEstimate::new(self.n, self.area(), Shape::BoundingRect)
    }
}

/// Streams `points` through a fresh bounding rectangle.
pub fn bounding_rect_density(points: &[Point2]) -> Result<DensityEstimate> {
    let mut s = BoundingRectState::empty();
    for &p in points {
        s = s.update(p)?;
    }
    Ok(s.density())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point2,
    pub radius: f64,
}

impl Circle {
    fn contains(&self, p: Point2) -> bool {
        self.center.dist(p) <= self.radius * (1.0 + 1e-12) + 1e-12
    }

    fn diameter(a: Point2, b: Point2) -> Circle {
        let center = a.lerp(b, 0.5);
        Circle {
            center,
            radius: center.dist(a).max(center.dist(b)),
        }
    }

    fn through(a: Point2, b: Point2, c: Point2) -> Circle {
        let bx = b.x - a.x;
        let by = b.y - a.y;
        let cx = c.x - a.x;
        let cy = c.y - a.y;
        let d = 2.0 * (bx * cy - by * cx);
        if d.abs() < 1e-300 {
            // collinear: the widest pair spans the others
            let mut best = Circle::diameter(a, b);
            for cand in [Circle::diameter(a, c), Circle::diameter(b, c)] {
                if cand.radius > best.radius {
                    best = cand;
                }
            }
            return best;
        }
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        let center = Point2::new(a.x + ux, a.y + uy);
        Circle {
            center,
            radius: center.dist(a).max(center.dist(b)).max(center.dist(c)),
        }
    }
}

/// Smallest circle enclosing all points (randomized incremental, expected
/// linear time). The shuffle uses a fixed seed so results are reproducible.
pub fn min_enclosing_circle(points: &[Point2]) -> Result<Circle> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    for p in points {
        p.check()?;
    }
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed_c1c1e));

    let mut c = Circle {
        center: pts[0],
        radius: 0.0,
    };
    for i in 1..pts.len() {
        if c.contains(pts[i]) {
            continue;
        }
        c = Circle {
            center: pts[i],
            radius: 0.0,
        };
        for j in 0..i {
            if c.contains(pts[j]) {
                continue;
            }
            c = Circle::diameter(pts[i], pts[j]);
            for k in 0..j {
                if !c.contains(pts[k]) {
                    c = Circle::through(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    Ok(c)
}

pub fn min_enclosing_circle_density(points: &[Point2]) -> Result<DensityEstimate> {
    let c = min_enclosing_circle(points)?;
    Ok(DensityEstimate::new(
        points.len(),
        PI * c.radius * c.radius,
        Shape::MinEnclosingCircle,
    ))
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull in counter-clockwise order (monotone chain, O(n log n)).
/// Collinear boundary points are dropped.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Shoelace area of a simple polygon (absolute value).
pub fn polygon_area(poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        twice += a.x * b.y - b.x * a.y;
    }
    twice.abs() / 2.0
}

/// Points divided by convex-hull area. Needs the whole point set in memory,
/// so it is an offline reference, not a streaming estimator.
pub fn convex_hull_density(points: &[Point2]) -> Result<DensityEstimate> {
    for p in points {
        p.check()?;
    }
    let hull = convex_hull(points);
    Ok(DensityEstimate::new(
        points.len(),
        polygon_area(&hull),
        Shape::ConvexHull,
    ))
}
