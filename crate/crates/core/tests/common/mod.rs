//! Independent reference implementations used as test oracles. None of
//! these call into the library's algorithms; they only share the plain data
//! types.

#![allow(dead_code)]

use std::f64::consts::PI;

use trajseg_core::{Point2, Sample, SampledTrajectory};

/// Result of the scalar trace of the segmentation loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub cutoffs: Vec<usize>,
    pub centroids: Vec<(f64, f64)>,
    pub radii: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Line-by-line scalar transcription of the segmentation loop:
///
/// ```text
/// centroid <- T[0]; n <- 1; radius <- 0; cutoffs <- [0]
/// for i in 1..len:
///     n <- n + 1
///     radius <- max(radius, |T[i] - centroid|)
///     if radius > min_r:
///         density <- n / (pi radius^2)
///         if density < min_density:
///             append i; centroid <- T[i]; n <- 1; radius <- 0; continue
///     centroid <- ((n - 1) centroid + T[i]) / n
/// append len
/// ```
pub fn trace(xy: &[(f64, f64)], min_r: f64, min_density: f64) -> Trace {
    let mut out = Trace {
        cutoffs: vec![0],
        centroids: vec![],
        radii: vec![],
        counts: vec![],
    };
    let (mut cx, mut cy) = xy[0];
    let mut n: usize = 1;
    let mut radius = 0.0_f64;
    let mut i = 1;
    while i < xy.len() {
        let (x, y) = xy[i];
        n += 1;
        let radius_prev = radius;
        let d = ((x - cx) * (x - cx) + (y - cy) * (y - cy)).sqrt();
        if d > radius {
            radius = d;
        }
        if radius > min_r {
            let density = n as f64 / (PI * radius * radius);
            if density < min_density {
                out.cutoffs.push(i);
                out.centroids.push((cx, cy));
                out.radii.push(radius_prev);
                out.counts.push(n - 1);
                cx = x;
                cy = y;
                n = 1;
                radius = 0.0;
                i += 1;
                continue;
            }
        }
        cx = ((n - 1) as f64 * cx + x) / n as f64;
        cy = ((n - 1) as f64 * cy + y) / n as f64;
        i += 1;
    }
    out.cutoffs.push(xy.len());
    out.centroids.push((cx, cy));
    out.radii.push(radius);
    out.counts.push(n);
    out
}

pub fn xy(t: &SampledTrajectory) -> Vec<(f64, f64)> {
    t.samples().iter().map(|s| (s.pos.x, s.pos.y)).collect()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

pub fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// O(n m) symmetric Hausdorff distance.
pub fn hausdorff_oracle(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut h = 0.0_f64;
    for p in a {
        let mut best = f64::INFINITY;
        for q in b {
            best = best.min(euclid(*p, *q));
        }
        h = h.max(best);
    }
    for q in b {
        let mut best = f64::INFINITY;
        for p in a {
            best = best.min(euclid(*p, *q));
        }
        h = h.max(best);
    }
    h
}

/// Full quadratic DTW table.
pub fn dtw_oracle(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![f64::INFINITY; m + 1]; n + 1];
    d[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let best = d[i - 1][j - 1].min(d[i - 1][j]).min(d[i][j - 1]);
            d[i][j] = euclid(a[i - 1], b[j - 1]) + best;
        }
    }
    d[n][m]
}

pub fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
    v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
}

/// Position by linear interpolation; `None` outside the sampled span.
pub fn interpolate(track: &[Sample], t: f64) -> Option<(f64, f64)> {
    if track.is_empty() || t < track[0].t || t > track[track.len() - 1].t {
        return None;
    }
    // first sample at or after t
    let (mut lo, mut hi) = (0usize, track.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if track[mid].t < t {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if lo == 0 || track[lo].t == track[lo - 1].t {
        return Some((track[lo].pos.x, track[lo].pos.y));
    }
    let (a, b) = (track[lo - 1], track[lo]);
    let s = (t - a.t) / (b.t - a.t);
    Some((a.pos.x + s * (b.pos.x - a.pos.x), a.pos.y + s * (b.pos.y - a.pos.y)))
}

/// Brute force over complete raw tracks: maximal time intervals in which
/// the interpolated positions are within `tol`, with the minimum distance
/// in each. Works piece by piece on the merged sample times, solving the
/// quadratic for the squared distance on every piece.
pub fn brute_meetings(a: &[Sample], b: &[Sample], tol: f64) -> Vec<(f64, f64, f64)> {
    let lo = a[0].t.max(b[0].t);
    let hi = a[a.len() - 1].t.min(b[b.len() - 1].t);
    if lo > hi {
        return vec![];
    }
    let mut times: Vec<f64> = a
        .iter()
        .chain(b.iter())
        .map(|s| s.t)
        .filter(|t| *t >= lo && *t <= hi)
        .collect();
    times.sort_by(|x, y| x.partial_cmp(y).unwrap());
    times.dedup();
    let diff = |t: f64| {
        let p = interpolate(a, t).unwrap();
        let q = interpolate(b, t).unwrap();
        (p.0 - q.0, p.1 - q.1)
    };
    let mut out: Vec<(f64, f64, f64)> = vec![];
    let mut add = |s: f64, e: f64, d: f64| {
        if let Some(last) = out.last_mut() {
            if s <= last.1 + 1e-9 {
                last.1 = last.1.max(e);
                last.2 = last.2.min(d);
                return;
            }
        }
        out.push((s, e, d));
    };
    if times.len() == 1 {
        let (dx, dy) = diff(times[0]);
        let d = dx.hypot(dy);
        if d <= tol {
            add(times[0], times[0], d);
        }
        return out;
    }
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let (ux, uy) = diff(t0);
        let (wx, wy) = diff(t1);
        let (vx, vy) = (wx - ux, wy - uy);
        // distance^2(s) = A s^2 + B s + C
        let a2 = vx * vx + vy * vy;
        let b2 = 2.0 * (ux * vx + uy * vy);
        let c2 = ux * ux + uy * uy;
        let mut s_star = 0.0;
        if a2 > 0.0 {
            s_star = (-b2 / (2.0 * a2)).max(0.0).min(1.0);
        }
        let dmin = (a2 * s_star * s_star + b2 * s_star + c2).max(0.0).sqrt();
        if dmin > tol {
            continue;
        }
        let (s0, s1) = if a2 == 0.0 {
            (0.0, 1.0)
        } else {
            let root = (b2 * b2 - 4.0 * a2 * (c2 - tol * tol)).max(0.0).sqrt();
            (
                ((-b2 - root) / (2.0 * a2)).max(0.0),
                ((-b2 + root) / (2.0 * a2)).min(1.0),
            )
        };
        add(t0 + s0 * (t1 - t0), t0 + s1 * (t1 - t0), dmin);
    }
    out
}
