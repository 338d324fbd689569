//! Online density-based segmentation.
//!
//! A segment grows around a running centroid. Once its radius passes
//! `min_r`, the segment is kept open only while its density stays at or
//! above `min_density`; the first sample that breaks the density floor
//! starts a new segment. Sparse movement is therefore decimated at the
//! `min_r` scale while dense stays collapse into a single segment.
//!
//! [`SegmenterState`] is the constant-size per-trajectory state.
//! [`segment_trajectory`] runs it over a whole trajectory, [`StreamEngine`]
//! runs many of them over an interleaved stream.

use std::collections::HashMap;

use crate::density::{BoundingRectState, RunningCircleState};
use crate::error::{Error, Result};
use crate::model::{
    summaries_as_trajectory, EstimatorKind, Sample, SamplePoint, SampledTrajectory,
    SegmentKind, SegmentSummary, Segmentation, SegmenterParams, TRepMode, TrajId,
};

/// Running state of the open segment of one trajectory. Plain scalars only:
/// the size does not depend on how many samples were consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterState {
    circle: RunningCircleState,
    rect: BoundingRectState,
    extent: f64,
    start_idx: usize,
    next_idx: usize,
    t_start: f64,
    t_last: f64,
    t_sum: f64,
    dense_growth: bool,
}

impl SegmenterState {
    /// Opens a segment at `sample`, which has index `idx` in its trajectory.
    pub fn start(idx: usize, sample: Sample) -> Self {
        Self {
            circle: RunningCircleState::new(sample.pos),
            rect: BoundingRectState::from_point(sample.pos),
            extent: 0.0,
            start_idx: idx,
            next_idx: idx + 1,
            t_start: sample.t,
            t_last: sample.t,
            t_sum: sample.t,
            dense_growth: false,
        }
    }

    /// Index the next consumed sample will get.
    pub fn next_idx(&self) -> usize {
        self.next_idx
    }

    pub fn last_t(&self) -> f64 {
        self.t_last
    }

    pub fn circle(&self) -> &RunningCircleState {
        &self.circle
    }

    /// Consumes one sample. Returns the closed segment when the sample
    /// starts a new one. The caller is responsible for input validation.
    #[inline]
    pub fn step(
        &mut self,
        params: &SegmenterParams,
        traj_id: &TrajId,
        sample: Sample,
    ) -> Option<SegmentSummary> {
        let p = sample.pos;
        let mut circle = self.circle;
        circle.observe(p);

        if circle.radius > params.min_r {
            let density = match params.estimator {
                EstimatorKind::RunningCircle => circle.density().density,
                EstimatorKind::BoundingRect => {
                    let mut rect = self.rect;
                    rect.extend(p);
                    rect.density().density
                }
            };
            if density < params.min_density {
                let closed = self.summary(params.t_rep_mode, traj_id);
                *self = Self::start(self.next_idx, sample);
                return Some(closed);
            }
            self.dense_growth = true;
        }

        let before = circle.centroid;
        circle.absorb(p);
        let drift = circle.centroid.dist(before);
        self.extent = (self.extent + drift).max(p.dist(circle.centroid));
        self.circle = circle;
        self.rect.extend(p);
        self.next_idx += 1;
        self.t_last = sample.t;
        self.t_sum += sample.t;
        None
    }

    /// Summary of the open segment as it stands.
    pub fn summary(&self, mode: TRepMode, traj_id: &TrajId) -> SegmentSummary {
        let n = self.circle.n;
        let t_rep = match mode {
            TRepMode::MeanTime => (self.t_sum / n as f64).clamp(self.t_start, self.t_last),
            TRepMode::StartTime => self.t_start,
        };
        SegmentSummary {
            traj_id: traj_id.clone(),
            centroid: self.circle.centroid,
            t_rep,
            radius: self.circle.radius,
            n_points: n,
            start_idx: self.start_idx,
            end_idx: self.next_idx,
            t_start: self.t_start,
            t_end: self.t_last,
            kind: if self.dense_growth {
                SegmentKind::Local
            } else {
                SegmentKind::Locomotive
            },
            extent: self.extent,
        }
    }
}

/// Segments a whole trajectory in one pass.
pub fn segment_trajectory(
    traj: &SampledTrajectory,
    params: &SegmenterParams,
) -> Result<(Segmentation, Vec<SegmentSummary>)> {
    params.validate()?;
    let samples = traj.samples();
    let first = *samples.first().ok_or(Error::EmptyTrajectory)?;
    let id = traj.id();

    let mut state = SegmenterState::start(0, first);
    let mut cutoffs = vec![0];
    let mut summaries = Vec::new();
    for (i, &s) in samples.iter().enumerate().skip(1) {
        if let Some(closed) = state.step(params, id, s) {
            cutoffs.push(i);
            summaries.push(closed);
        }
    }
    cutoffs.push(samples.len());
    summaries.push(state.summary(params.t_rep_mode, id));
    Ok((Segmentation::new(cutoffs), summaries))
}

/// Re-segments the summary trajectory of each level with the next parameter
/// set. Level 0 is the segmentation of `traj` itself.
pub fn segment_hierarchy(
    traj: &SampledTrajectory,
    ladder: &[SegmenterParams],
) -> Result<Vec<Vec<SegmentSummary>>> {
    if ladder.is_empty() {
        return Err(Error::InvalidParam {
            name: "params_ladder",
            reason: "must not be empty".into(),
        });
    }
    if ladder.windows(2).any(|w| w[1].min_r <= w[0].min_r) {
        return Err(Error::InvalidParam {
            name: "params_ladder",
            reason: "min_r must strictly increase".into(),
        });
    }
    let mut levels: Vec<Vec<SegmentSummary>> = Vec::with_capacity(ladder.len());
    for params in ladder {
        let (_, summaries) = match levels.last() {
            None => segment_trajectory(traj, params)?,
            Some(prev) => segment_trajectory(&summaries_as_trajectory(prev)?, params)?,
        };
        levels.push(summaries);
    }
    Ok(levels)
}

/// Predicted summary/raw size ratio for a locomotive stretch of length `l`
/// (`n1` samples) followed by a local bout of `n2` samples, at radius `r`.
pub fn estimate_compression(l: f64, r: f64, n1: f64, n2: f64) -> f64 {
    (l / r + 1.0) / (n1 + n2)
}

#[derive(Debug, Clone, Copy)]
struct Resume {
    next_idx: usize,
    last_t: f64,
}

/// Segments an interleaved multi-trajectory stream, keeping one
/// [`SegmenterState`] per live trajectory.
///
/// Flushed trajectories leave a two-scalar tombstone so that later samples
/// of the same id continue its index sequence and still get the
/// timestamp-regression check.
#[derive(Debug, Clone)]
pub struct StreamEngine {
    params: SegmenterParams,
    live: HashMap<TrajId, SegmenterState>,
    retired: HashMap<TrajId, Resume>,
}

impl StreamEngine {
    pub fn new(params: SegmenterParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            live: HashMap::new(),
            retired: HashMap::new(),
        })
    }

    pub fn params(&self) -> &SegmenterParams {
        &self.params
    }

    /// Consumes one point; returns the segment it closed, if any.
    pub fn ingest(&mut self, p: &SamplePoint) -> Result<Option<SegmentSummary>> {
        let sample = p.sample().check()?;
        if let Some(state) = self.live.get_mut(&p.traj_id) {
            if sample.t < state.last_t() {
                return Err(Error::TimestampRegression {
                    traj_id: p.traj_id.clone(),
                    last: state.last_t(),
                    got: sample.t,
                });
            }
            return Ok(state.step(&self.params, &p.traj_id, sample));
        }

        let idx = match self.retired.get(&p.traj_id) {
            Some(r) if sample.t < r.last_t => {
                return Err(Error::TimestampRegression {
                    traj_id: p.traj_id.clone(),
                    last: r.last_t,
                    got: sample.t,
                });
            }
            Some(r) => {
                let idx = r.next_idx;
                self.retired.remove(&p.traj_id);
                idx
            }
            None => 0,
        };
        self.live
            .insert(p.traj_id.clone(), SegmenterState::start(idx, sample));
        Ok(None)
    }

    /// Closes the open segment of `id`. `Ok(None)` if it was already flushed.
    pub fn flush(&mut self, id: &TrajId) -> Result<Option<SegmentSummary>> {
        match self.live.remove(id) {
            Some(state) => {
                self.retired.insert(
                    id.clone(),
                    Resume {
                        next_idx: state.next_idx(),
                        last_t: state.last_t(),
                    },
                );
                Ok(Some(state.summary(self.params.t_rep_mode, id)))
            }
            None if self.retired.contains_key(id) => Ok(None),
            None => Err(Error::UnknownTrajectory(id.clone())),
        }
    }

    /// Closes every open segment, ordered by trajectory id.
    pub fn flush_all(&mut self) -> Vec<SegmentSummary> {
        let mut ids: Vec<TrajId> = self.live.keys().cloned().collect();
        ids.sort();
        ids.iter()
            .filter_map(|id| self.flush(id).ok().flatten())
            .collect()
    }

    /// Registers a trajectory already holding `next_idx` samples (the last
    /// at `last_t`) without an open segment, e.g. after reloading a store.
    pub fn resume(&mut self, id: TrajId, next_idx: usize, last_t: f64) {
        if !self.live.contains_key(&id) {
            self.retired.insert(id, Resume { next_idx, last_t });
        }
    }

    pub fn live_trajectories(&self) -> usize {
        self.live.len()
    }

    pub fn state(&self, id: &TrajId) -> Option<&SegmenterState> {
        self.live.get(id)
    }

    /// Bytes of per-trajectory segmentation state currently held (excluding
    /// hash-table overhead and key strings).
    pub fn state_bytes(&self) -> usize {
        self.live.len() * std::mem::size_of::<SegmenterState>()
    }

    /// Last timestamp seen for `id`, live or flushed.
    pub fn last_t(&self, id: &TrajId) -> Option<f64> {
        self.live
            .get(id)
            .map(SegmenterState::last_t)
            .or_else(|| self.retired.get(id).map(|r| r.last_t))
    }
}
