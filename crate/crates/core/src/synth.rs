//! Deterministic synthetic trajectories with intermittent locomotive and
//! local bouts, plus the pooled point heatmap.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with a 64-bit
//! integer; normal deviates use `rand_distr::Normal`. Each trajectory gets
//! its own stream derived from `(seed, trajectory index)`, so adding
//! trajectories never perturbs existing ones.
//!
//! * Locomotive bouts are correlated random walks: the heading changes by a
//!   normal increment with standard deviation `(1 - heading_persistence) * pi`
//!   (wrapped to `(-pi, pi]`) and the walker advances `step_len` per sample.
//! * Local bouts are i.i.d. normal clouds of standard deviation `cloud_sigma`
//!   around the position where the bout starts. The walk resumes from that
//!   anchor, so consecutive bouts are spatially continuous.
//! * Every emitted position carries extra normal noise of `noise_sigma`.
//! * Samples are 1 s apart starting at `t = 0`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Point2, Rect, Sample, SampledTrajectory, TrajId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoutSpec {
    Locomotive {
        duration: usize,
        step_len: f64,
        heading_persistence: f64,
        noise_sigma: f64,
    },
    Local {
        duration: usize,
        cloud_sigma: f64,
        noise_sigma: f64,
    },
}

impl BoutSpec {
    pub fn duration(&self) -> usize {
        match *self {
            BoutSpec::Locomotive { duration, .. } | BoutSpec::Local { duration, .. } => duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| {
            Err(Error::InvalidParam {
                name,
                reason: reason.to_owned(),
            })
        };
        if self.duration() == 0 {
            return bad("duration", "must be at least 1");
        }
        match *self {
            BoutSpec::Locomotive {
                step_len,
                heading_persistence,
                noise_sigma,
                ..
            } => {
                if !(step_len.is_finite() && step_len > 0.0) {
                    return bad("step_len", "must be positive");
                }
                if !(0.0..=1.0).contains(&heading_persistence) {
                    return bad("heading_persistence", "must lie in [0, 1]");
                }
                if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
                    return bad("noise_sigma", "must be non-negative");
                }
            }
            BoutSpec::Local {
                cloud_sigma,
                noise_sigma,
                ..
            } => {
                if !(cloud_sigma.is_finite() && cloud_sigma > 0.0) {
                    return bad("cloud_sigma", "must be positive");
                }
                if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
                    return bad("noise_sigma", "must be non-negative");
                }
            }
        }
        Ok(())
    }
}

/// Randomised alternating bout sequence; durations are drawn uniformly
/// from the inclusive ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomBouts {
    pub min_bouts: usize,
    pub max_bouts: usize,
    pub locomotive_duration: [usize; 2],
    pub local_duration: [usize; 2],
    pub step_len: f64,
    pub heading_persistence: f64,
    pub cloud_sigma: f64,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plan", rename_all = "snake_case")]
pub enum BoutPlan {
    /// Every trajectory follows the same bout sequence.
    Fixed { bouts: Vec<BoutSpec> },
    Random(RandomBouts),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    pub n_trajectories: usize,
    /// Trajectory origins are uniform in `[-spread, spread]^2`.
    pub origin_spread: f64,
    pub bouts: BoutPlan,
}

impl Default for GenSpec {
    /// Twenty trajectories with two to five alternating bouts each.
    fn default() -> Self {
        Self {
            seed: 7,
            n_trajectories: 20,
            origin_spread: 300.0,
            bouts: BoutPlan::Random(RandomBouts {
                min_bouts: 2,
                max_bouts: 5,
                locomotive_duration: [150, 400],
                local_duration: [300, 700],
                step_len: 1.0,
                heading_persistence: 0.93,
                cloud_sigma: 2.0,
                noise_sigma: 0.1,
            }),
        }
    }
}

impl GenSpec {
    pub fn with_trajectories(mut self, n: usize) -> Self {
        self.n_trajectories = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::InvalidParam {
                name: "n_trajectories",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.origin_spread.is_finite() && self.origin_spread >= 0.0) {
            return Err(Error::InvalidParam {
                name: "origin_spread",
                reason: "must be non-negative".into(),
            });
        }
        match &self.bouts {
            BoutPlan::Fixed { bouts } => {
                if bouts.is_empty() {
                    return Err(Error::InvalidParam {
                        name: "bouts",
                        reason: "must not be empty".into(),
                    });
                }
                bouts.iter().try_for_each(BoutSpec::validate)
            }
            BoutPlan::Random(r) => {
                if r.min_bouts == 0 || r.min_bouts > r.max_bouts {
                    return Err(Error::InvalidParam {
                        name: "min_bouts",
                        reason: "need 1 <= min_bouts <= max_bouts".into(),
                    });
                }
                for range in [r.locomotive_duration, r.local_duration] {
                    if range[0] == 0 || range[0] > range[1] {
                        return Err(Error::InvalidParam {
                            name: "duration range",
                            reason: format!("bad range {range:?}"),
                        });
                    }
                }
                r.template(BoutKind::Locomotive, 1).validate()?;
                r.template(BoutKind::Local, 1).validate()
            }
        }
    }
}

#[derive(Clone, Copy)]
enum BoutKind {
    Locomotive,
    Local,
}

impl RandomBouts {
    fn template(&self, kind: BoutKind, duration: usize) -> BoutSpec {
        match kind {
            BoutKind::Locomotive => BoutSpec::Locomotive {
                duration,
                step_len: self.step_len,
                heading_persistence: self.heading_persistence,
                noise_sigma: self.noise_sigma,
            },
            BoutKind::Local => BoutSpec::Local {
                duration,
                cloud_sigma: self.cloud_sigma,
                noise_sigma: self.noise_sigma,
            },
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<BoutSpec> {
        let n = rng.random_range(self.min_bouts..=self.max_bouts);
        let mut kind = if rng.random_bool(0.5) {
            BoutKind::Locomotive
        } else {
            BoutKind::Local
        };
        (0..n)
            .map(|_| {
                let range = match kind {
                    BoutKind::Locomotive => self.locomotive_duration,
                    BoutKind::Local => self.local_duration,
                };
                let spec = self.template(kind, rng.random_range(range[0]..=range[1]));
                kind = match kind {
                    BoutKind::Locomotive => BoutKind::Local,
                    BoutKind::Local => BoutKind::Locomotive,
                };
                spec
            })
            .collect()
    }
}

/// Zero-padded id so lexicographic order matches generation order.
pub fn traj_name(index: usize) -> TrajId {
    TrajId::new(format!("t{index:03}"))
}

/// Deterministic generator for stream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Ground truth of one generated bout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoutTruth {
    pub spec: BoutSpec,
    pub start_idx: usize,
    pub end_idx: usize,
    /// Cloud center for local bouts, start position for locomotive ones.
    pub anchor: Point2,
    /// Walk length (noise-free) for locomotive bouts, 0 for local ones.
    pub path_length: f64,
}

/// Generates one trajectory from an explicit bout list.
pub fn generate_bouts(
    id: impl Into<TrajId>,
    origin: Point2,
    bouts: &[BoutSpec],
    rng: &mut ChaCha8Rng,
) -> Result<(SampledTrajectory, Vec<BoutTruth>)> {
    if bouts.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    for b in bouts {
        b.validate()?;
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut pos = origin;
    let mut heading = rng.random_range(-PI..PI);
    let mut samples = Vec::with_capacity(bouts.iter().map(BoutSpec::duration).sum());
    let mut truth = Vec::with_capacity(bouts.len());

    for spec in bouts {
        let start_idx = samples.len();
        let anchor = pos;
        let mut path_length = 0.0;
        match *spec {
            BoutSpec::Locomotive {
                duration,
                step_len,
                heading_persistence,
                noise_sigma,
            } => {
                let turn = (1.0 - heading_persistence) * PI;
                for _ in 0..duration {
                    heading = wrap_angle(heading + turn * std_normal.sample(rng));
                    pos = pos + Point2::new(heading.cos(), heading.sin()) * step_len;
                    path_length += step_len;
                    let noisy = pos
                        + Point2::new(std_normal.sample(rng), std_normal.sample(rng)) * noise_sigma;
                    samples.push(Sample {
                        t: samples.len() as f64,
                        pos: noisy,
                    });
                }
            }
            BoutSpec::Local {
                duration,
                cloud_sigma,
                noise_sigma,
            } => {
                let spread = cloud_sigma.hypot(noise_sigma);
                for _ in 0..duration {
                    let p = anchor
                        + Point2::new(std_normal.sample(rng), std_normal.sample(rng)) * spread;
                    samples.push(Sample {
                        t: samples.len() as f64,
                        pos: p,
                    });
                }
            }
        }
        truth.push(BoutTruth {
            spec: *spec,
            start_idx,
            end_idx: samples.len(),
            anchor,
            path_length,
        });
    }
    Ok((SampledTrajectory::new(id, samples)?, truth))
}

/// A generated trajectory and its bout ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub trajectory: SampledTrajectory,
    pub bouts: Vec<BoutTruth>,
}

/// Generates the dataset described by `spec`.
pub fn generate_with_truth(spec: &GenSpec) -> Result<Vec<Generated>> {
    spec.validate()?;
    (0..spec.n_trajectories)
        .map(|i| {
            let mut rng = rng_for(spec.seed, i as u64);
            let s = spec.origin_spread;
            let origin = if s > 0.0 {
                Point2::new(rng.random_range(-s..=s), rng.random_range(-s..=s))
            } else {
                Point2::default()
            };
            let bouts = match &spec.bouts {
                BoutPlan::Fixed { bouts } => bouts.clone(),
                BoutPlan::Random(r) => r.draw(&mut rng),
            };
            let (trajectory, bouts) = generate_bouts(traj_name(i), origin, &bouts, &mut rng)?;
            Ok(Generated { trajectory, bouts })
        })
        .collect()
}

pub fn generate(spec: &GenSpec) -> Result<Vec<SampledTrajectory>> {
    Ok(generate_with_truth(spec)?
        .into_iter()
        .map(|g| g.trajectory)
        .collect())
}

/// Builds a trajectory sharing `base`'s timestamps that travels with `base`
/// at `offset` over the index window `[from, to)` and approaches from and
/// leaves towards points `far` units away elsewhere.
pub fn companion(
    base: &SampledTrajectory,
    id: impl Into<TrajId>,
    from: usize,
    to: usize,
    offset: Point2,
    far: f64,
) -> Result<SampledTrajectory> {
    let s = base.samples();
    if from >= to || to > s.len() {
        return Err(Error::InvalidParam {
            name: "window",
            reason: format!("[{from}, {to}) outside 0..{}", s.len()),
        });
    }
    let join = s[from].pos + offset;
    let leave = s[to - 1].pos + offset;
    let start = join + Point2::new(far, far);
    let end = leave + Point2::new(far, -far);
    let out = s
        .iter()
        .enumerate()
        .map(|(i, smp)| {
            let pos = if i < from {
                start.lerp(join, i as f64 / from as f64)
            } else if i < to {
                smp.pos + offset
            } else {
                let tail = s.len() - to;
                leave.lerp(end, (i - to + 1) as f64 / tail as f64)
            };
            Sample { t: smp.t, pos }
        })
        .collect();
    SampledTrajectory::new(id, out)
}

/// Per-cell point counts over a regular grid. Row 0 is the bottom
/// (`min_y`) row, column 0 the left one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatGrid {
    pub bounds: Rect,
    pub cell: f64,
    pub cols: usize,
    pub rows: usize,
    pub counts: Vec<u64>,
    /// Points that fell outside `bounds`.
    pub outside: u64,
}

impl HeatGrid {
    pub fn new(bounds: Rect, cell: f64) -> Result<Self> {
        bounds.validate()?;
        if !(cell.is_finite() && cell > 0.0) {
            return Err(Error::InvalidParam {
                name: "cell",
                reason: format!("must be positive, got {cell}"),
            });
        }
        let cols = ((bounds.width() / cell).ceil() as usize).max(1);
        let rows = ((bounds.height() / cell).ceil() as usize).max(1);
        Ok(Self {
            bounds,
            cell,
            cols,
            rows,
            counts: vec![0; cols * rows],
            outside: 0,
        })
    }

    pub fn add(&mut self, p: Point2) {
        if !self.bounds.contains(p) {
            self.outside += 1;
            return;
        }
        let c = (((p.x - self.bounds.min_x) / self.cell) as usize).min(self.cols - 1);
        let r = (((p.y - self.bounds.min_y) / self.cell) as usize).min(self.rows - 1);
        self.counts[r * self.cols + c] += 1;
    }

    pub fn get(&self, col: usize, row: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Share of in-bounds points held by the densest `fraction` of cells
    /// (at least one cell).
    pub fn top_share(&self, fraction: f64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let mut sorted = self.counts.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let k = ((sorted.len() as f64 * fraction).floor() as usize).max(1);
        sorted[..k].iter().sum::<u64>() as f64 / total as f64
    }

    /// CSV matrix, one line per row from the top (`max_y`) row down.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in (0..self.rows).rev() {
            let line: Vec<String> = (0..self.cols).map(|c| self.get(c, r).to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Pools the samples of all trajectories into a grid of raw counts.
pub fn heatmap_grid(trajs: &[SampledTrajectory], cell: f64, bounds: Rect) -> Result<HeatGrid> {
    let mut grid = HeatGrid::new(bounds, cell)?;
    for t in trajs {
        for s in t.samples() {
            grid.add(s.pos);
        }
    }
    Ok(grid)
}

/// Bounding rectangle of all samples.
pub fn dataset_bounds(trajs: &[SampledTrajectory]) -> Option<Rect> {
    Rect::bounding(trajs.iter().flat_map(|t| t.samples().iter().map(|s| s.pos)))
}
