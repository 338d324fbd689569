mod common;

use proptest::prelude::*;
use trajseg_core::density::{
    bounding_rect_density, convex_hull, convex_hull_density, min_enclosing_circle,
    min_enclosing_circle_density, polygon_area, BoundingRectState,
};
use trajseg_core::query::{query_knn, traj_distance, Metric};
use trajseg_core::store::{RawStore, SegmentStore};
use trajseg_core::{
    segment_trajectory, validate_segmentation, Point2, Rect, Sample, SamplePoint,
    SampledTrajectory, SegmentKind, SegmentSummary, SegmenterParams, StreamEngine, TrajId,
};

fn point() -> impl Strategy<Value = Point2> {
    (-100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

fn points(min: usize, max: usize) -> impl Strategy<Value = Vec<Point2>> {
    prop::collection::vec(point(), min..=max)
}

/// A random walk with a few stays, as (dx, dy) steps.
fn walk(max_len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec(
        prop_oneof![
            3 => (-3.0..3.0f64, -3.0..3.0f64),
            1 => (-0.2..0.2f64, -0.2..0.2f64),
        ],
        1..=max_len,
    )
    .prop_map(|steps| {
        let mut p = (0.0, 0.0);
        steps
            .into_iter()
            .map(|(dx, dy)| {
                p = (p.0 + dx, p.1 + dy);
                p
            })
            .collect()
    })
}

fn traj(id: &str, xy: &[(f64, f64)]) -> SampledTrajectory {
    let rows: Vec<(f64, f64, f64)> = xy.iter().enumerate().map(|(i, &(x, y))| (i as f64, x, y)).collect();
    SampledTrajectory::from_triples(id, &rows).unwrap()
}

/// O(n^4) reference: smallest circle through every pair (as diameter) and
/// triple (circumcircle) that contains all points.
fn brute_mec(p: &[Point2]) -> f64 {
    if p.len() == 1 {
        return 0.0;
    }
    let contains = |c: Point2, r: f64| p.iter().all(|q| q.dist(c) <= r * (1.0 + 1e-12) + 1e-9);
    let mut best = f64::INFINITY;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let c = (p[i] + p[j]) / 2.0;
            let r = p[i].dist(p[j]) / 2.0;
            if r < best && contains(c, r) {
                best = r;
            }
            for k in j + 1..p.len() {
                let (a, b, cc) = (p[i], p[j], p[k]);
                let d = 2.0 * (a.x * (b.y - cc.y) + b.x * (cc.y - a.y) + cc.x * (a.y - b.y));
                if d.abs() < 1e-12 {
                    continue;
                }
                let a2 = a.x * a.x + a.y * a.y;
                let b2 = b.x * b.x + b.y * b.y;
                let c2 = cc.x * cc.x + cc.y * cc.y;
                let ux = (a2 * (b.y - cc.y) + b2 * (cc.y - a.y) + c2 * (a.y - b.y)) / d;
                let uy = (a2 * (cc.x - b.x) + b2 * (a.x - cc.x) + c2 * (b.x - a.x)) / d;
                let center = Point2::new(ux, uy);
                let r = center.dist(a);
                if r < best && contains(center, r) {
                    best = r;
                }
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mec_matches_brute_force(p in points(1, 25)) {
        let c = min_enclosing_circle(&p).unwrap();
        let r = brute_mec(&p);
        prop_assert!((c.radius - r).abs() <= 1e-9 * r.max(1.0), "{} vs {}", c.radius, r);
        for q in &p {
            prop_assert!(q.dist(c.center) <= c.radius * (1.0 + 1e-9) + 1e-9);
        }
    }

    #[test]
    fn rect_estimate_is_order_independent(p in points(1, 40), seed in any::<u64>()) {
        let mut shuffled = p.clone();
        // deterministic Fisher-Yates driven by the proptest seed
        let mut s = seed | 1;
        for i in (1..shuffled.len()).rev() {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            shuffled.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let fold = |pts: &[Point2]| pts.iter().fold(BoundingRectState::empty(), |st, q| st.update(*q).unwrap());
        let (a, b) = (fold(&p), fold(&shuffled));
        prop_assert_eq!(a, b);
        prop_assert_eq!(a.density(), bounding_rect_density(&p).unwrap());
    }

    #[test]
    fn hull_density_dominates_enclosing_shapes(p in points(3, 40)) {
        let hull = convex_hull(&p);
        prop_assume!(hull.len() >= 3 && polygon_area(&hull) > 1e-6);
        let h = convex_hull_density(&p).unwrap().density;
        let m = min_enclosing_circle_density(&p).unwrap().density;
        let r = bounding_rect_density(&p).unwrap().density;
        prop_assert!(h >= m * (1.0 - 1e-9), "hull {} < mec {}", h, m);
        prop_assert!(h >= r * (1.0 - 1e-9), "hull {} < rect {}", h, r);
    }

    #[test]
    fn segmentation_matches_trace_and_partitions(w in walk(300), r in 0.5..5.0f64, d in 0.01..3.0f64) {
        let t = traj("w", &w);
        let p = SegmenterParams::new(r, d).unwrap();
        let (seg, sums) = segment_trajectory(&t, &p).unwrap();
        let tr = common::trace(&w, r, d);
        prop_assert_eq!(&seg.cutoffs, &tr.cutoffs);
        prop_assert!(validate_segmentation(&t, &seg));
        prop_assert_eq!(sums.iter().map(|s| s.n_points).sum::<usize>(), w.len());
        for (s, range) in sums.iter().zip(seg.ranges()) {
            prop_assert_eq!(s.start_idx..s.end_idx, range.clone());
            // the containment bound holds even where the radius does not
            for q in &t.samples()[range] {
                prop_assert!(q.pos.dist(s.centroid) <= s.reach() * (1.0 + 1e-12) + 1e-9);
            }
            if s.kind == SegmentKind::Local {
                prop_assert!(s.n_points > 1);
            }
        }
    }

    #[test]
    fn stream_equals_batch_for_any_interleaving(
        walks in prop::collection::vec(walk(80), 1..5),
        order in prop::collection::vec(0usize..5, 0..400),
    ) {
        let p = SegmenterParams::new(1.5, 0.4).unwrap();
        let trajs: Vec<SampledTrajectory> = walks.iter().enumerate().map(|(i, w)| traj(&format!("w{i}"), w)).collect();
        let mut engine = StreamEngine::new(p).unwrap();
        // schedule: the random prefix, then whatever is left in id order
        let mut left: Vec<usize> = trajs.iter().map(|t| t.len()).collect();
        let mut schedule = Vec::new();
        for k in order {
            let k = k % trajs.len();
            if left[k] > 0 {
                left[k] -= 1;
                schedule.push(k);
            }
        }
        for (k, n) in left.iter().enumerate() {
            schedule.extend(std::iter::repeat(k).take(*n));
        }
        let mut cursor = vec![0usize; trajs.len()];
        let mut out: Vec<SegmentSummary> = Vec::new();
        for k in schedule {
            let s = trajs[k].samples()[cursor[k]];
            cursor[k] += 1;
            out.extend(engine.ingest(&SamplePoint::new(trajs[k].id().clone(), s.t, s.pos.x, s.pos.y)).unwrap());
        }
        out.extend(engine.flush_all());
        for t in &trajs {
            let mine: Vec<SegmentSummary> = out.iter().filter(|s| s.traj_id == *t.id()).cloned().collect();
            prop_assert_eq!(mine, segment_trajectory(t, &p).unwrap().1);
        }
    }

    #[test]
    fn raw_slice_equals_linear_scan(
        ts in prop::collection::vec(0u32..50, 1..300),
        block in 1usize..20,
        a in -5.0..300.0f64,
        len in 0.0..100.0f64,
    ) {
        let mut ts = ts;
        let mut acc = 0u32;
        for t in ts.iter_mut() { acc += *t % 4; *t = acc; }
        let id = TrajId::from("r");
        let mut store = RawStore::with_block_size(block);
        let samples: Vec<Sample> = ts.iter().enumerate().map(|(i, &t)| Sample::new(t as f64 * 0.5, i as f64, 0.0)).collect();
        for s in &samples { store.append(&id, *s).unwrap(); }
        let (t0, t1) = (a, a + len);
        let expected: Vec<Sample> = samples.iter().copied().filter(|s| s.t >= t0 && s.t <= t1).collect();
        prop_assert_eq!(store.slice(&id, t0, t1).unwrap(), expected);
    }

    #[test]
    fn rect_candidates_superset_of_linear_scan(
        sums in prop::collection::vec((point(), 0.0..10.0f64, 0.0..100.0f64, 0.0..20.0f64), 1..60),
        q in (point(), 0.0..40.0f64, 0.0..40.0f64),
        tw in (0.0..120.0f64, 0.0..50.0f64),
        cell in 0.5..20.0f64,
    ) {
        let mut store = SegmentStore::new(cell).unwrap();
        let mut all = Vec::new();
        for (i, (c, r, t, dt)) in sums.into_iter().enumerate() {
            let s = SegmentSummary {
                traj_id: format!("s{:02}", i % 7).into(),
                centroid: c,
                t_rep: t + dt / 2.0,
                radius: r,
                n_points: 2,
                start_idx: i * 2,
                end_idx: i * 2 + 2,
                t_start: t,
                t_end: t + dt,
                kind: SegmentKind::Locomotive,
                extent: r,
            };
            store.insert(s.clone()).unwrap();
            all.push(s);
        }
        let rect = Rect::new(q.0.x, q.0.y, q.0.x + q.1, q.0.y + q.2).unwrap();
        let (t0, t1) = (tw.0, tw.0 + tw.1);
        let got = store.rect_candidates(&rect, t0, t1);
        for s in &all {
            let exact = rect.distance_to(s.centroid) <= s.radius && s.t_end >= t0 && s.t_start <= t1;
            if exact {
                prop_assert!(got.iter().any(|g| *g == s), "missed {:?}", s);
            }
        }
        prop_assert_eq!(store.len(), all.len());
    }

    #[test]
    fn distance_metric_properties(a in points(1, 12), b in points(1, 12)) {
        let ax: Vec<(f64, f64)> = a.iter().map(|p| (p.x, p.y)).collect();
        let bx: Vec<(f64, f64)> = b.iter().map(|p| (p.x, p.y)).collect();
        for m in [Metric::Hausdorff, Metric::Dtw] {
            prop_assert_eq!(traj_distance(&a, &a, m).unwrap(), 0.0);
            prop_assert!(traj_distance(&a, &b, m).unwrap() >= 0.0);
        }
        let h = traj_distance(&a, &b, Metric::Hausdorff).unwrap();
        prop_assert_eq!(h, traj_distance(&b, &a, Metric::Hausdorff).unwrap());
        prop_assert_eq!(h, common::hausdorff_oracle(&ax, &bx));
        prop_assert_eq!(traj_distance(&a, &b, Metric::Dtw).unwrap(), common::dtw_oracle(&ax, &bx));
    }

    #[test]
    fn knn_distances_are_sorted(walks in prop::collection::vec(walk(60), 2..8), k in 1usize..10) {
        let p = SegmenterParams::new(1.0, 0.5).unwrap();
        let mut store = SegmentStore::new(2.0).unwrap();
        for (i, w) in walks.iter().enumerate() {
            for s in segment_trajectory(&traj(&format!("k{i}"), w), &p).unwrap().1 {
                store.insert(s).unwrap();
            }
        }
        let q: Vec<Point2> = store.trajectory(&"k0".into()).unwrap().iter().map(|s| s.centroid).collect();
        for m in [Metric::Hausdorff, Metric::Dtw] {
            let (nn, truncated) = query_knn(&store, &q, Some(&"k0".into()), k, m).unwrap();
            prop_assert_eq!(truncated, k > walks.len() - 1);
            prop_assert!(nn.windows(2).all(|w| (w[0].distance, &w[0].id) <= (w[1].distance, &w[1].id)));
        }
    }
}

#[test]
fn hull_of_square_corners() {
    let sq = [
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
        Point2::new(0.5, 0.5),
    ];
    assert_eq!(polygon_area(&convex_hull(&sq)), 1.0);
}
