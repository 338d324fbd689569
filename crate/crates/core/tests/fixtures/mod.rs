//! Seeded datasets shared by the query tests and the acceptance harness.
//! Expects a sibling `common` module with the oracles.

#![allow(dead_code)]

use trajseg_core::store::Database;
use trajseg_core::synth::{companion, generate, generate_bouts, rng_for, BoutSpec, GenSpec};
use trajseg_core::{Point2, Sample, SampledTrajectory, SegmenterParams, TrajId};

/// Tiny deterministic generator for query workloads, independent of the
/// library's PRNG plumbing.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

pub fn params() -> SegmenterParams {
    SegmenterParams::new(15.0, 0.1).unwrap()
}

pub fn build(trajs: &[SampledTrajectory]) -> Database {
    Database::from_trajectories(params(), trajs).unwrap()
}

pub fn centroid_xy(db: &Database, id: &TrajId) -> Vec<(f64, f64)> {
    db.segments()
        .trajectory(id)
        .unwrap()
        .iter()
        .map(|s| (s.centroid.x, s.centroid.y))
        .collect()
}

/// 25 pairs of near-duplicate trajectories, pairs far apart from each other.
pub fn pair_clusters() -> Vec<SampledTrajectory> {
    let mut out = Vec::new();
    let mut noise = Lcg(5);
    for c in 0..25 {
        let origin = Point2::new((c % 5) as f64 * 4000.0, (c / 5) as f64 * 4000.0);
        let mut rng = rng_for(1234, c as u64);
        let bouts = [
            BoutSpec::Locomotive { duration: 300, step_len: 1.0, heading_persistence: 0.95, noise_sigma: 0.1 },
            BoutSpec::Local { duration: 300, cloud_sigma: 2.0, noise_sigma: 0.1 },
            BoutSpec::Locomotive { duration: 200, step_len: 1.0, heading_persistence: 0.95, noise_sigma: 0.1 },
        ];
        let (a, _) = generate_bouts(format!("c{c:02}a"), origin, &bouts, &mut rng).unwrap();
        let b: Vec<Sample> = a
            .samples()
            .iter()
            .map(|s| Sample { t: s.t, pos: s.pos + Point2::new(noise.range(-0.5, 0.5), noise.range(-0.5, 0.5)) })
            .collect();
        out.push(SampledTrajectory::new(format!("c{c:02}b"), b).unwrap());
        out.push(a);
    }
    out
}

/// 16 generated trajectories plus planted encounters: an exact meeting, a
/// near miss at twice the tolerance, a close pass, and a second companion.
pub fn planted_dataset(exact_tol: f64) -> Vec<SampledTrajectory> {
    let mut trajs = generate(&GenSpec::default().with_trajectories(16)).unwrap();
    let pick = |k: usize| trajs[k].clone();
    let window = |t: &SampledTrajectory| (t.len() / 3, t.len() / 2);
    let mut extra = Vec::new();
    for (k, id, offset) in [
        (0, "p-exact", Point2::new(0.0, 0.0)),
        (1, "p-nearmiss", Point2::new(2.0 * exact_tol, 0.0)),
        (2, "p-close", Point2::new(0.0, 0.5 * exact_tol)),
        (3, "p-second", Point2::new(-0.3 * exact_tol, 0.3 * exact_tol)),
    ] {
        let base = pick(k);
        let (from, to) = window(&base);
        extra.push(companion(&base, id, from, to, offset, 700.0).unwrap());
    }
    trajs.extend(extra);
    trajs
}

pub type Meeting = (String, String, f64, f64, f64);

pub fn sort_meetings(v: &mut [Meeting]) {
    v.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)).then(x.2.partial_cmp(&y.2).unwrap()));
}

/// Every meeting of `target` with any other trajectory, by interpolated
/// raw scan.
pub fn brute_force_pairs(trajs: &[SampledTrajectory], target: &TrajId, tol: f64) -> Vec<Meeting> {
    let tgt = trajs.iter().find(|t| t.id() == target).unwrap();
    let mut out = Vec::new();
    for o in trajs.iter().filter(|t| t.id() != target) {
        let (a, b) = if tgt.id() < o.id() { (tgt, o) } else { (o, tgt) };
        for (s, e, d) in crate::common::brute_meetings(a.samples(), b.samples(), tol) {
            out.push((a.id().to_string(), b.id().to_string(), s, e, d));
        }
    }
    sort_meetings(&mut out);
    out
}
