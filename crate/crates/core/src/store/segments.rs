//! Segment summaries with a uniform-grid spatial index.
//!
//! Every summary is registered in each grid cell its containment disk
//! (centroid, [`SegmentSummary::reach`]) overlaps, so a rectangle lookup
//! only visits the cells under the rectangle and never misses a summary.
//!
//! Binary layout (`segments.bin`), little-endian:
//!
//! ```text
//! "TRJSEG01", cell: f64, n_tracks: u32
//! per track: id_len: u32, id: utf-8, count: u32,
//!   count x (cx, cy, t_rep, radius, t_start, t_end, extent: f64,
//!            start_idx: u64, n_points: u32, kind: u8)
//! ```

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::{Point2, Rect, SegmentKind, SegmentSummary, TrajId};
use crate::store::raw::Cursor;

const MAGIC: &[u8; 8] = b"TRJSEG01";
const RECORD_BYTES: usize = 7 * 8 + 8 + 4 + 1;
/// Summaries covering more cells than this live in an always-scanned list.
const MAX_CELLS_PER_SUMMARY: i64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct SegRef {
    track: u32,
    seg: u32,
}

#[derive(Debug, Clone)]
pub struct SegmentStore {
    cell: f64,
    ids: Vec<TrajId>,
    by_id: HashMap<TrajId, u32>,
    tracks: Vec<Vec<SegmentSummary>>,
    grid: HashMap<(i64, i64), Vec<SegRef>>,
    oversized: Vec<SegRef>,
    count: usize,
}

impl SegmentStore {
    /// `cell` is the grid cell edge, normally `2 * min_r`.
    pub fn new(cell: f64) -> Result<Self> {
        if !(cell.is_finite() && cell > 0.0) {
            return Err(Error::InvalidParam {
                name: "cell",
                reason: format!("must be positive, got {cell}"),
            });
        }
        Ok(Self {
            cell,
            ids: Vec::new(),
            by_id: HashMap::new(),
            tracks: Vec::new(),
            grid: HashMap::new(),
            oversized: Vec::new(),
            count: 0,
        })
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    fn cell_of(&self, x: f64, y: f64) -> (i64, i64) {
        ((x / self.cell).floor() as i64, (y / self.cell).floor() as i64)
    }

    fn cell_range(&self, r: &Rect) -> ((i64, i64), (i64, i64)) {
        (self.cell_of(r.min_x, r.min_y), self.cell_of(r.max_x, r.max_y))
    }

    /// Adds a summary. Summaries of one trajectory must arrive in index order.
    pub fn insert(&mut self, s: SegmentSummary) -> Result<()> {
        if !(s.centroid.is_finite() && s.reach().is_finite()) {
            return Err(Error::NonFinite {
                what: "summary geometry",
                value: s.reach(),
            });
        }
        let track = match self.by_id.get(&s.traj_id) {
            Some(&t) => t,
            None => {
                let t = self.ids.len() as u32;
                self.ids.push(s.traj_id.clone());
                self.by_id.insert(s.traj_id.clone(), t);
                self.tracks.push(Vec::new());
                t
            }
        };
        let list = &mut self.tracks[track as usize];
        if let Some(prev) = list.last() {
            if s.start_idx < prev.end_idx {
                return Err(Error::InvalidParam {
                    name: "summary",
                    reason: format!(
                        "{}: segment starting at {} overlaps previous ending at {}",
                        s.traj_id, s.start_idx, prev.end_idx
                    ),
                });
            }
        }
        let r = Rect {
            min_x: s.centroid.x,
            min_y: s.centroid.y,
            max_x: s.centroid.x,
            max_y: s.centroid.y,
        }
        .inflate(s.reach());
        let seg_ref = SegRef {
            track,
            seg: list.len() as u32,
        };
        list.push(s);
        self.count += 1;

        let ((x0, y0), (x1, y1)) = self.cell_range(&r);
        if (x1 - x0 + 1).saturating_mul(y1 - y0 + 1) > MAX_CELLS_PER_SUMMARY {
            self.oversized.push(seg_ref);
            return Ok(());
        }
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                self.grid.entry((cx, cy)).or_default().push(seg_ref);
            }
        }
        Ok(())
    }

    fn get(&self, r: SegRef) -> &SegmentSummary {
        &self.tracks[r.track as usize][r.seg as usize]
    }

    /// Summaries whose containment disk meets `rect` and whose time span
    /// meets `[t0, t1]`, ordered by trajectory id and index.
    pub fn rect_candidates(&self, rect: &Rect, t0: f64, t1: f64) -> Vec<&SegmentSummary> {
        let ((x0, y0), (x1, y1)) = self.cell_range(rect);
        let n_cells = (x1 - x0 + 1).saturating_mul(y1 - y0 + 1);
        let mut refs: Vec<SegRef> = if n_cells as usize > self.grid.len() {
            self.grid.values().flatten().copied().collect()
        } else {
            let mut v = Vec::new();
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    if let Some(bucket) = self.grid.get(&(cx, cy)) {
                        v.extend_from_slice(bucket);
                    }
                }
            }
            v
        };
        refs.extend_from_slice(&self.oversized);
        refs.sort_unstable_by(|a, b| {
            self.ids[a.track as usize]
                .cmp(&self.ids[b.track as usize])
                .then(a.seg.cmp(&b.seg))
        });
        refs.dedup();
        refs.into_iter()
            .map(|r| self.get(r))
            .filter(|s| s.t_end >= t0 && s.t_start <= t1)
            .filter(|s| rect.distance_to(s.centroid) <= s.reach() * (1.0 + 1e-12) + 1e-12)
            .collect()
    }

    pub fn trajectory(&self, id: &TrajId) -> Option<&[SegmentSummary]> {
        self.by_id.get(id).map(|&t| self.tracks[t as usize].as_slice())
    }

    /// Trajectory ids in lexicographic order.
    pub fn ids(&self) -> Vec<&TrajId> {
        let mut ids: Vec<&TrajId> = self.ids.iter().collect();
        ids.sort();
        ids
    }

    /// All trajectories with their summaries, ordered by id.
    pub fn iter(&self) -> impl Iterator<Item = (&TrajId, &[SegmentSummary])> {
        self.ids()
            .into_iter()
            .map(move |id| (id, self.trajectory(id).unwrap_or_default()))
    }

    /// Bounding rectangle of a trajectory's summary disks.
    pub fn bounds(&self, id: &TrajId) -> Option<Rect> {
        let segs = self.trajectory(id)?;
        segs.iter()
            .map(|s| {
                Rect::bounding([s.centroid])
                    .expect("one point")
                    .inflate(s.reach())
            })
            .reduce(|a, b| a.union(&b))
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn num_trajectories(&self) -> usize {
        self.ids.len()
    }

    pub fn count_kind(&self, kind: SegmentKind) -> usize {
        self.tracks.iter().flatten().filter(|s| s.kind == kind).count()
    }

    /// JSON lines, one summary per line, ordered by id then index.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (_, segs) in self.iter() {
            for s in segs {
                serde_json::to_writer(&mut w, s)?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, cell: f64) -> Result<Self> {
        let mut store = Self::new(cell)?;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let s: SegmentSummary = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            store.insert(s)?;
        }
        Ok(store)
    }

    pub fn serialized_size(&self) -> usize {
        8 + 8
            + 4
            + self
                .ids
                .iter()
                .map(|id| 4 + id.as_str().len() + 4)
                .sum::<usize>()
            + self.count * RECORD_BYTES
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_size());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.cell.to_le_bytes());
        out.extend_from_slice(&(self.ids.len() as u32).to_le_bytes());
        for (id, segs) in self.iter() {
            out.extend_from_slice(&(id.as_str().len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_str().as_bytes());
            out.extend_from_slice(&(segs.len() as u32).to_le_bytes());
            for s in segs {
                for v in [
                    s.centroid.x,
                    s.centroid.y,
                    s.t_rep,
                    s.radius,
                    s.t_start,
                    s.t_end,
                    s.extent,
                ] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&(s.start_idx as u64).to_le_bytes());
                out.extend_from_slice(&(s.n_points as u32).to_le_bytes());
                out.push(match s.kind {
                    SegmentKind::Local => 1,
                    SegmentKind::Locomotive => 0,
                });
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = || Error::Corrupt("segment store: truncated or malformed".into());
        if bytes.get(..8) != Some(MAGIC.as_slice()) {
            return Err(Error::Corrupt("segment store: bad magic".into()));
        }
        let mut cur = Cursor { bytes, pos: 8 };
        let cell = cur.f64().ok_or_else(corrupt)?;
        let mut store = Self::new(cell)?;
        let n_tracks = cur.u32().ok_or_else(corrupt)?;
        for _ in 0..n_tracks {
            let len = cur.u32().ok_or_else(corrupt)? as usize;
            let id = std::str::from_utf8(cur.take(len).ok_or_else(corrupt)?)
                .map_err(|_| corrupt())?;
            let id = TrajId::new(id);
            let count = cur.u32().ok_or_else(corrupt)?;
            for _ in 0..count {
                let mut f = [0.0; 7];
                for v in &mut f {
                    *v = cur.f64().ok_or_else(corrupt)?;
                }
                let start_idx = cur.u64().ok_or_else(corrupt)? as usize;
                let n_points = cur.u32().ok_or_else(corrupt)? as usize;
                let kind = match cur.u8().ok_or_else(corrupt)? {
                    0 => SegmentKind::Locomotive,
                    1 => SegmentKind::Local,
                    _ => return Err(corrupt()),
                };
                store.insert(SegmentSummary {
                    traj_id: id.clone(),
                    centroid: Point2::new(f[0], f[1]),
                    t_rep: f[2],
                    radius: f[3],
                    n_points,
                    start_idx,
                    end_idx: start_idx + n_points,
                    t_start: f[4],
                    t_end: f[5],
                    kind,
                    extent: f[6],
                })?;
            }
        }
        if cur.pos != bytes.len() {
            return Err(corrupt());
        }
        Ok(store)
    }
}
