//! Queries over the summary index, and hybrid queries that refine index
//! candidates against raw data.
//!
//! Index-only queries take a [`SegmentStore`] and nothing else, so they
//! cannot touch raw data. Only [`query_hybrid_meet`] reads the
//! [`RawStore`].
//!
//! Pairwise time semantics: a trajectory's position between samples is the
//! linear interpolation of its neighbours. Every raw sample of summary `i`
//! lies within `reach_i` of its centroid `c_i`, so positions in
//! `[t_start_i, t_end_i]` stay in that disc. Between `t_end_i` and
//! `t_start_{i+1}` the position moves along a chord whose ends are within
//! `reach_i` of `c_i` and `reach_{i+1}` of `c_{i+1}`, so it stays in the
//! capsule around `c_i..c_{i+1}` with radius `max(reach_i, reach_{i+1})`.
//! Meeting candidates built from these covers are therefore a superset of
//! the exact raw meetings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Span};
use crate::model::{Point2, Rect, Sample, SampledTrajectory, SegmentSummary, TrajId};
use crate::segmenter::segment_trajectory;
use crate::store::{Database, RawStore, SegmentStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Symmetric discrete Hausdorff distance between centroid sets.
    #[default]
    Hausdorff,
    /// Dynamic time warping over centroid sequences, Euclidean ground
    /// distance, no window, not length-normalised.
    Dtw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    IndexOnly,
    HybridRefined,
}

/// KNN query subject: a stored trajectory id, or raw `[t, x, y]` samples
/// that are segmented with the store's parameters first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KnnSubject {
    Id(TrajId),
    Samples(Vec<[f64; 3]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QuerySpec {
    Range {
        rect: Rect,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t0: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t1: Option<f64>,
    },
    Knn {
        query: KnnSubject,
        k: usize,
        #[serde(default)]
        metric: Metric,
    },
    ClosestApproach {
        a: TrajId,
        b: TrajId,
    },
    Meet {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ids: Option<Vec<TrajId>>,
        dist_tol: f64,
        #[serde(default)]
        time_tol: f64,
    },
    HybridMeet {
        target: TrajId,
        exact_tol: f64,
        #[serde(default)]
        time_tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: TrajId,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meeting {
    pub a: TrajId,
    pub b: TrajId,
    pub t_start: f64,
    pub t_end: f64,
    pub min_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QueryResult {
    Ids {
        ids: Vec<TrajId>,
        provenance: Provenance,
    },
    Ranked {
        neighbors: Vec<Neighbor>,
        /// `k` exceeded the number of candidates.
        truncated: bool,
        provenance: Provenance,
    },
    ClosestApproach {
        t_a: f64,
        t_b: f64,
        distance: f64,
        provenance: Provenance,
    },
    Meetings {
        meetings: Vec<Meeting>,
        raw_points_touched: u64,
        provenance: Provenance,
    },
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            reason: format!("must be positive, got {v}"),
        })
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            reason: format!("must be non-negative, got {v}"),
        })
    }
}

fn summaries<'a>(store: &'a SegmentStore, id: &TrajId) -> Result<&'a [SegmentSummary]> {
    store
        .trajectory(id)
        .ok_or_else(|| Error::UnknownTrajectory(id.clone()))
}

/// Ids of trajectories with a summary disk meeting `rect` during `[t0, t1]`.
pub fn query_range(store: &SegmentStore, rect: &Rect, t0: f64, t1: f64) -> Result<Vec<TrajId>> {
    rect.validate()?;
    if t0.is_nan() || t1.is_nan() || t0 > t1 {
        return Err(Error::InvalidParam {
            name: "time window",
            reason: format!("need t0 <= t1, got [{t0}, {t1}]"),
        });
    }
    let mut ids: Vec<TrajId> = store
        .rect_candidates(rect, t0, t1)
        .into_iter()
        .map(|s| s.traj_id.clone())
        .collect();
    ids.dedup();
    Ok(ids)
}

fn directed_hausdorff(a: &[Point2], b: &[Point2]) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| p.dist(*q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Distance between two centroid sequences.
pub fn traj_distance(a: &[Point2], b: &[Point2], metric: Metric) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    Ok(match metric {
        Metric::Hausdorff => directed_hausdorff(a, b).max(directed_hausdorff(b, a)),
        Metric::Dtw => {
            let mut prev = vec![f64::INFINITY; b.len() + 1];
            let mut cur = vec![f64::INFINITY; b.len() + 1];
            prev[0] = 0.0;
            for p in a {
                cur[0] = f64::INFINITY;
                for (j, q) in b.iter().enumerate() {
                    let best = prev[j].min(prev[j + 1]).min(cur[j]);
                    cur[j + 1] = p.dist(*q) + best;
                }
                std::mem::swap(&mut prev, &mut cur);
            }
            prev[b.len()]
        }
    })
}

fn centroids(s: &[SegmentSummary]) -> Vec<Point2> {
    s.iter().map(|s| s.centroid).collect()
}

/// The `k` stored trajectories closest to `query` (excluding `exclude`),
/// ascending by distance, ties by id. The flag is set when fewer than `k`
/// candidates exist.
pub fn query_knn(
    store: &SegmentStore,
    query: &[Point2],
    exclude: Option<&TrajId>,
    k: usize,
    metric: Metric,
) -> Result<(Vec<Neighbor>, bool)> {
    if k == 0 {
        return Err(Error::InvalidParam {
            name: "k",
            reason: "must be at least 1".into(),
        });
    }
    if query.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut all = store
        .iter()
        .filter(|(id, _)| Some(*id) != exclude)
        .map(|(id, segs)| {
            Ok(Neighbor {
                id: id.clone(),
                distance: traj_distance(query, &centroids(segs), metric)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    all.sort_by(|x, y| x.distance.total_cmp(&y.distance).then_with(|| x.id.cmp(&y.id)));
    let truncated = k > all.len();
    all.truncate(k);
    Ok((all, truncated))
}

/// Piecewise-linear position at `t`, clamped to the sample span.
fn position_at(track: &[Sample], t: f64) -> Point2 {
    let i = track.partition_point(|s| s.t < t);
    if i == 0 {
        return track[0].pos;
    }
    if i == track.len() {
        return track[track.len() - 1].pos;
    }
    let (a, b) = (track[i - 1], track[i]);
    if b.t <= a.t {
        return b.pos;
    }
    a.pos.lerp(b.pos, (t - a.t) / (b.t - a.t))
}

fn span_of(track: &[Sample]) -> Span {
    Span {
        start: track[0].t,
        end: track[track.len() - 1].t,
    }
}

/// Time and distance of the closest approach of two summary trajectories,
/// evaluated at every `t_rep` of either inside their common time span.
pub fn query_closest_approach(
    store: &SegmentStore,
    a: &TrajId,
    b: &TrajId,
) -> Result<(f64, f64, f64)> {
    let ta: Vec<Sample> = summaries(store, a)?.iter().map(SegmentSummary::sample).collect();
    let tb: Vec<Sample> = summaries(store, b)?.iter().map(SegmentSummary::sample).collect();
    let (sa, sb) = (span_of(&ta), span_of(&tb));
    let lo = sa.start.max(sb.start);
    let hi = sa.end.min(sb.end);
    if lo > hi {
        return Err(Error::DisjointTime {
            a: a.clone(),
            a_span: sa,
            b: b.clone(),
            b_span: sb,
        });
    }
    let mut times: Vec<f64> = ta
        .iter()
        .chain(&tb)
        .map(|s| s.t)
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut best = (f64::NAN, f64::INFINITY);
    for t in times {
        let d = position_at(&ta, t).dist(position_at(&tb, t));
        if d < best.1 {
            best = (t, d);
        }
    }
    Ok((best.0, best.0, best.1))
}

/// A time window together with a capsule (segment `p..q` inflated by
/// `radius`) that contains every interpolated position in the window.
#[derive(Debug, Clone, Copy)]
struct Cover {
    start: f64,
    end: f64,
    p: Point2,
    q: Point2,
    radius: f64,
}

/// Covers of a summary sequence (see module docs): one disc per summary
/// span, one capsule per gap between consecutive summaries.
fn covers(segs: &[SegmentSummary]) -> Vec<Cover> {
    let mut out = Vec::with_capacity(2 * segs.len());
    for (i, s) in segs.iter().enumerate() {
        out.push(Cover {
            start: s.t_start,
            end: s.t_end,
            p: s.centroid,
            q: s.centroid,
            radius: s.reach(),
        });
        if let Some(next) = segs.get(i + 1) {
            out.push(Cover {
                start: s.t_end,
                end: next.t_start,
                p: s.centroid,
                q: next.centroid,
                radius: s.reach().max(next.reach()),
            });
        }
    }
    out
}

fn point_segment_dist(x: Point2, p: Point2, q: Point2) -> f64 {
    let d = q - p;
    let len_sq = d.x * d.x + d.y * d.y;
    if len_sq == 0.0 {
        return x.dist(p);
    }
    let s = (((x.x - p.x) * d.x + (x.y - p.y) * d.y) / len_sq).clamp(0.0, 1.0);
    x.dist(p.lerp(q, s))
}

/// Euclidean distance between the closed segments `a0..a1` and `b0..b1`.
fn segment_dist(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> f64 {
    let cross = |o: Point2, u: Point2, v: Point2| (u.x - o.x) * (v.y - o.y) - (u.y - o.y) * (v.x - o.x);
    let (d1, d2) = (cross(a0, a1, b0), cross(a0, a1, b1));
    let (d3, d4) = (cross(b0, b1, a0), cross(b0, b1, a1));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return 0.0;
    }
    point_segment_dist(a0, b0, b1)
        .min(point_segment_dist(a1, b0, b1))
        .min(point_segment_dist(b0, a0, a1))
        .min(point_segment_dist(b1, a0, a1))
}

fn pair_meetings(a: &[Cover], b: &[Cover], dist_tol: f64, time_tol: f64) -> Vec<(f64, f64, f64)> {
    let mut hits: Vec<(f64, f64, f64)> = Vec::new();
    for ca in a {
        let first = b.partition_point(|cb| cb.end < ca.start - time_tol);
        for cb in b[first..].iter().take_while(|cb| cb.start <= ca.end + time_tol) {
            let d = segment_dist(ca.p, ca.q, cb.p, cb.q);
            if d <= (dist_tol + ca.radius + cb.radius) * (1.0 + 1e-12) + 1e-12 {
                let lo = ca.start.max(cb.start);
                let hi = ca.end.min(cb.end);
                let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
                hits.push((lo, hi, d));
            }
        }
    }
    hits.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64, f64)> = Vec::new();
    for h in hits {
        match merged.last_mut() {
            Some(m) if h.0 <= m.1 => {
                m.1 = m.1.max(h.1);
                m.2 = m.2.min(h.2);
            }
            _ => merged.push(h),
        }
    }
    merged
}

/// Index-only meeting detection among `ids` (all stored trajectories when
/// `None`). Pairs are reported with `a < b`.
pub fn query_meet(
    store: &SegmentStore,
    ids: Option<&[TrajId]>,
    dist_tol: f64,
    time_tol: f64,
) -> Result<Vec<Meeting>> {
    positive("dist_tol", dist_tol)?;
    non_negative("time_tol", time_tol)?;
    let mut ids: Vec<TrajId> = match ids {
        Some(ids) => ids.to_vec(),
        None => store.ids().into_iter().cloned().collect(),
    };
    ids.sort();
    ids.dedup();
    let cover_lists = ids
        .iter()
        .map(|id| summaries(store, id).map(covers))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            for (lo, hi, d) in pair_meetings(&cover_lists[i], &cover_lists[j], dist_tol, time_tol) {
                out.push(Meeting {
                    a: ids[i].clone(),
                    b: ids[j].clone(),
                    t_start: lo,
                    t_end: hi,
                    min_distance: d,
                });
            }
        }
    }
    Ok(out)
}

/// Exact proximity of two piecewise-linear tracks over `[lo, hi]`: the
/// maximal sub-intervals where they are within `tol`, each with its minimum
/// distance.
pub fn proximity_intervals(
    a: &[Sample],
    b: &[Sample],
    lo: f64,
    hi: f64,
    tol: f64,
) -> Vec<(f64, f64, f64)> {
    let mut breaks: Vec<f64> = a
        .iter()
        .chain(b)
        .map(|s| s.t)
        .filter(|&t| t > lo && t < hi)
        .collect();
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    let mut push = |s: f64, e: f64, d: f64| match out.last_mut() {
        Some(last) if s <= last.1 => {
            last.1 = last.1.max(e);
            last.2 = last.2.min(d);
        }
        _ => out.push((s, e, d)),
    };
    let diff = |t: f64| position_at(a, t) - position_at(b, t);

    if breaks.len() == 1 {
        let d = diff(lo).norm();
        if d <= tol {
            push(lo, lo, d);
        }
        return out;
    }
    let tol_sq = tol * tol;
    for w in breaks.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let d0 = diff(t0);
        let v = diff(t1) - d0;
        // |d0 + s v|^2 = qa s^2 + qb s + qc for s in [0, 1]
        let qa = v.x * v.x + v.y * v.y;
        let qb = 2.0 * (d0.x * v.x + d0.y * v.y);
        let qc = d0.x * d0.x + d0.y * d0.y;
        let s_min = if qa > 0.0 { (-qb / (2.0 * qa)).clamp(0.0, 1.0) } else { 0.0 };
        let dmin = (qa * s_min * s_min + qb * s_min + qc).max(0.0).sqrt();
        if dmin > tol {
            continue;
        }
        let (s_lo, s_hi) = if qa > 0.0 {
            let disc = (qb * qb - 4.0 * qa * (qc - tol_sq)).max(0.0).sqrt();
            (
                ((-qb - disc) / (2.0 * qa)).clamp(0.0, s_min),
                ((-qb + disc) / (2.0 * qa)).clamp(s_min, 1.0),
            )
        } else {
            (0.0, 1.0)
        };
        // exact endpoints, so pieces from adjacent windows chain up
        let at = |s: f64| match s {
            s if s <= 0.0 => t0,
            s if s >= 1.0 => t1,
            s => t0 + s * (t1 - t0),
        };
        push(at(s_lo), at(s_hi), dmin);
    }
    out
}

/// Outcome of a hybrid meeting query.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridOutcome {
    pub meetings: Vec<Meeting>,
    pub raw_points_touched: u64,
    pub candidates: usize,
}

/// Exact meetings (within `exact_tol`, same instant) between `target` and
/// every other trajectory. Stage one asks the index for candidate windows
/// at tolerance `min_r + exact_tol`; stage two reads raw samples only inside
/// those windows (padded by `time_tol`) and keeps verified intervals.
pub fn query_hybrid_meet(
    store: &SegmentStore,
    raw: &RawStore,
    target: &TrajId,
    exact_tol: f64,
    time_tol: f64,
    min_r: f64,
) -> Result<HybridOutcome> {
    positive("exact_tol", exact_tol)?;
    non_negative("time_tol", time_tol)?;
    let target_covers = covers(summaries(store, target)?);
    let mut out = HybridOutcome {
        meetings: Vec::new(),
        raw_points_touched: 0,
        candidates: 0,
    };
    for (other, segs) in store.iter() {
        if other == target {
            continue;
        }
        let (a, b) = if target < other {
            (target, other)
        } else {
            (other, target)
        };
        let candidates = pair_meetings(&target_covers, &covers(segs), min_r + exact_tol, 0.0);
        out.candidates += candidates.len();
        let mut verified: Vec<Meeting> = Vec::new();
        for (lo, hi, _) in candidates {
            let (lo, hi) = (lo - time_tol, hi + time_tol);
            let ra = raw.slice_bracketed(a, lo, hi)?;
            let rb = raw.slice_bracketed(b, lo, hi)?;
            out.raw_points_touched += (ra.len() + rb.len()) as u64;
            if ra.is_empty() || rb.is_empty() {
                continue;
            }
            let lo = lo.max(ra[0].t).max(rb[0].t);
            let hi = hi.min(ra[ra.len() - 1].t).min(rb[rb.len() - 1].t);
            if lo > hi {
                continue;
            }
            for (s, e, d) in proximity_intervals(&ra, &rb, lo, hi, exact_tol) {
                match verified.last_mut() {
                    Some(last) if s <= last.t_end => {
                        last.t_end = last.t_end.max(e);
                        last.min_distance = last.min_distance.min(d);
                    }
                    _ => verified.push(Meeting {
                        a: a.clone(),
                        b: b.clone(),
                        t_start: s,
                        t_end: e,
                        min_distance: d,
                    }),
                }
            }
        }
        out.meetings.extend(verified);
    }
    Ok(out)
}

impl Database {
    /// Runs a declarative query. Everything except `hybrid_meet` is answered
    /// from the summary index alone.
    pub fn query(&self, spec: &QuerySpec) -> Result<QueryResult> {
        let store = self.segments();
        match spec {
            QuerySpec::Range { rect, t0, t1 } => Ok(QueryResult::Ids {
                ids: query_range(
                    store,
                    rect,
                    t0.unwrap_or(f64::NEG_INFINITY),
                    t1.unwrap_or(f64::INFINITY),
                )?,
                provenance: Provenance::IndexOnly,
            }),
            QuerySpec::Knn { query, k, metric } => {
                let (points, exclude) = match query {
                    KnnSubject::Id(id) => (centroids(summaries(store, id)?), Some(id)),
                    KnnSubject::Samples(rows) => {
                        let traj = SampledTrajectory::new(
                            "query",
                            rows.iter().map(|&[t, x, y]| Sample::new(t, x, y)).collect(),
                        )?;
                        let (_, segs) = segment_trajectory(&traj, self.params())?;
                        (centroids(&segs), None)
                    }
                };
                let (neighbors, truncated) = query_knn(store, &points, exclude, *k, *metric)?;
                Ok(QueryResult::Ranked {
                    neighbors,
                    truncated,
                    provenance: Provenance::IndexOnly,
                })
            }
            QuerySpec::ClosestApproach { a, b } => {
                let (t_a, t_b, distance) = query_closest_approach(store, a, b)?;
                Ok(QueryResult::ClosestApproach {
                    t_a,
                    t_b,
                    distance,
                    provenance: Provenance::IndexOnly,
                })
            }
            QuerySpec::Meet {
                ids,
                dist_tol,
                time_tol,
            } => Ok(QueryResult::Meetings {
                meetings: query_meet(store, ids.as_deref(), *dist_tol, *time_tol)?,
                raw_points_touched: 0,
                provenance: Provenance::IndexOnly,
            }),
            QuerySpec::HybridMeet {
                target,
                exact_tol,
                time_tol,
            } => {
                let out = query_hybrid_meet(
                    store,
                    self.raw(),
                    target,
                    *exact_tol,
                    *time_tol,
                    self.params().min_r,
                )?;
                Ok(QueryResult::Meetings {
                    meetings: out.meetings,
                    raw_points_touched: out.raw_points_touched,
                    provenance: Provenance::HybridRefined,
                })
            }
        }
    }
}
