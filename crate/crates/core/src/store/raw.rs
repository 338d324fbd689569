//! Append-only raw point store with a sparse per-trajectory time index.
//!
//! On disk (`raw.bin`), all integers and floats little-endian:
//!
//! ```text
//! "TRJRAW01"
//! per trajectory: count x (t: f64, x: f64, y: f64)       24-byte records
//! footer:
//!   n_tracks: u32
//!   per track: id_len: u32, id: utf-8, offset: u64, count: u64,
//!              n_blocks: u32, n_blocks x first_t: f64
//! footer_offset: u64
//! "TRJRAW01"
//! ```
//!
//! `first_t` is the timestamp of every `block_size`-th record, so a time
//! slice seeks by binary search over blocks and then within one block.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::model::{Point2, Sample, SampledTrajectory, TrajId};

pub const BLOCK_SIZE: usize = 1024;
const MAGIC: &[u8; 8] = b"TRJRAW01";
const RECORD_BYTES: usize = 24;

#[derive(Debug, Clone, Default)]
struct Track {
    samples: Vec<Sample>,
    block_first_t: Vec<f64>,
}

impl Track {
    fn push(&mut self, s: Sample, block: usize) {
        if self.samples.len() % block == 0 {
            self.block_first_t.push(s.t);
        }
        self.samples.push(s);
    }

    /// Index of the first sample with `t >= t0`.
    fn lower_bound(&self, t0: f64, block: usize) -> usize {
        let b = self
            .block_first_t
            .partition_point(|&ft| ft < t0)
            .saturating_sub(1);
        let start = b * block;
        let end = (start + block).min(self.samples.len());
        // every later block starts at or after t0
        start + self.samples[start..end].partition_point(|s| s.t < t0)
    }
}

/// Stand-in for the raw-data warehouse: every sample of every trajectory.
#[derive(Debug, Default)]
pub struct RawStore {
    tracks: BTreeMap<TrajId, Track>,
    block: usize,
    len: usize,
    touched: AtomicU64,
}

impl Clone for RawStore {
    fn clone(&self) -> Self {
        Self {
            tracks: self.tracks.clone(),
            block: self.block,
            len: self.len,
            touched: AtomicU64::new(self.touched()),
        }
    }
}

impl RawStore {
    pub fn new() -> Self {
        Self::with_block_size(BLOCK_SIZE)
    }

    pub fn with_block_size(block: usize) -> Self {
        Self {
            tracks: BTreeMap::new(),
            block: block.max(1),
            len: 0,
            touched: AtomicU64::new(0),
        }
    }

    /// Appends one sample; timestamps must not decrease within a trajectory.
    pub fn append(&mut self, id: &TrajId, s: Sample) -> Result<()> {
        let s = s.check()?;
        let block = self.block;
        let track = match self.tracks.get_mut(id) {
            Some(t) => t,
            None => self.tracks.entry(id.clone()).or_default(),
        };
        if let Some(last) = track.samples.last() {
            if s.t < last.t {
                return Err(Error::TimestampRegression {
                    traj_id: id.clone(),
                    last: last.t,
                    got: s.t,
                });
            }
        }
        track.push(s, block);
        self.len += 1;
        Ok(())
    }

    pub fn append_trajectory(&mut self, traj: &SampledTrajectory) -> Result<()> {
        for &s in traj.samples() {
            self.append(traj.id(), s)?;
        }
        Ok(())
    }

    /// Number of samples [`slice`](Self::slice) would return, answered
    /// from the time index without handing out (or counting) any sample.
    pub fn count(&self, id: &TrajId, t0: f64, t1: f64) -> Result<usize> {
        let track = self.track(id)?;
        check_window(t0, t1)?;
        let lo = track.lower_bound(t0, self.block);
        Ok(track.samples[lo..].partition_point(|s| s.t <= t1))
    }

    /// All samples of `id` with `t0 <= t <= t1`, in time order.
    pub fn slice(&self, id: &TrajId, t0: f64, t1: f64) -> Result<Vec<Sample>> {
        let track = self.track(id)?;
        check_window(t0, t1)?;
        let lo = track.lower_bound(t0, self.block);
        let hi = lo + track.samples[lo..].partition_point(|s| s.t <= t1);
        Ok(self.hand_out(&track.samples[lo..hi]))
    }

    /// Like [`slice`](Self::slice) plus the nearest sample on each side of
    /// the window, when they exist, so positions can be interpolated across
    /// the whole window.
    pub fn slice_bracketed(&self, id: &TrajId, t0: f64, t1: f64) -> Result<Vec<Sample>> {
        let track = self.track(id)?;
        check_window(t0, t1)?;
        let lo = track.lower_bound(t0, self.block);
        let hi = lo + track.samples[lo..].partition_point(|s| s.t <= t1);
        let lo = lo.saturating_sub(1);
        let hi = (hi + 1).min(track.samples.len());
        Ok(self.hand_out(&track.samples[lo..hi]))
    }

    /// Whole trajectory.
    pub fn trajectory(&self, id: &TrajId) -> Result<SampledTrajectory> {
        let track = self.track(id)?;
        SampledTrajectory::new(id.clone(), self.hand_out(&track.samples))
    }

    fn hand_out(&self, samples: &[Sample]) -> Vec<Sample> {
        self.touched
            .fetch_add(samples.len() as u64, Ordering::Relaxed);
        samples.to_vec()
    }

    fn track(&self, id: &TrajId) -> Result<&Track> {
        self.tracks
            .get(id)
            .ok_or_else(|| Error::UnknownTrajectory(id.clone()))
    }

    /// Number of samples handed out by reads since creation or the last reset.
    pub fn touched(&self) -> u64 {
        self.touched.load(Ordering::Relaxed)
    }

    pub fn reset_touched(&self) {
        self.touched.store(0, Ordering::Relaxed);
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, id: &TrajId) -> bool {
        self.tracks.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &TrajId> {
        self.tracks.keys()
    }

    pub fn track_len(&self, id: &TrajId) -> Option<usize> {
        self.tracks.get(id).map(|t| t.samples.len())
    }

    /// Last sample of `id` without counting it as a data access.
    pub fn last(&self, id: &TrajId) -> Option<Sample> {
        self.tracks.get(id).and_then(|t| t.samples.last().copied())
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn serialized_size(&self) -> usize {
        let footer: usize = self
            .tracks
            .iter()
            .map(|(id, t)| 4 + id.as_str().len() + 8 + 8 + 4 + 8 * t.block_first_t.len())
            .sum();
        MAGIC.len() * 2 + self.len * RECORD_BYTES + 4 + footer + 8
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        let mut offset = MAGIC.len() as u64;
        let mut footer = Vec::new();
        footer.extend_from_slice(&(self.tracks.len() as u32).to_le_bytes());
        for (id, track) in &self.tracks {
            let mut buf = Vec::with_capacity(track.samples.len() * RECORD_BYTES);
            for s in &track.samples {
                buf.extend_from_slice(&s.t.to_le_bytes());
                buf.extend_from_slice(&s.pos.x.to_le_bytes());
                buf.extend_from_slice(&s.pos.y.to_le_bytes());
            }
            w.write_all(&buf)?;
            footer.extend_from_slice(&(id.as_str().len() as u32).to_le_bytes());
            footer.extend_from_slice(id.as_str().as_bytes());
            footer.extend_from_slice(&offset.to_le_bytes());
            footer.extend_from_slice(&(track.samples.len() as u64).to_le_bytes());
            footer.extend_from_slice(&(track.block_first_t.len() as u32).to_le_bytes());
            for t in &track.block_first_t {
                footer.extend_from_slice(&t.to_le_bytes());
            }
            offset += buf.len() as u64;
        }
        w.write_all(&footer)?;
        w.write_all(&offset.to_le_bytes())?;
        w.write_all(MAGIC)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_size());
        self.write_to(&mut out).expect("writing to a Vec");
        out
    }

    pub fn read_from<R: Read>(mut r: R, block: usize) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes, block)
    }

    pub fn from_bytes(bytes: &[u8], block: usize) -> Result<Self> {
        let corrupt = |what: &str| Error::Corrupt(format!("raw store: {what}"));
        if bytes.len() < 24 || &bytes[..8] != MAGIC || &bytes[bytes.len() - 8..] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let footer_at = u64::from_le_bytes(bytes[bytes.len() - 16..bytes.len() - 8].try_into().unwrap())
            as usize;
        let mut cur = Cursor {
            bytes: &bytes[..bytes.len() - 16],
            pos: footer_at,
        };
        let n_tracks = cur.u32().ok_or_else(|| corrupt("footer"))?;
        let mut store = Self::with_block_size(block);
        for _ in 0..n_tracks {
            let id_len = cur.u32().ok_or_else(|| corrupt("footer"))? as usize;
            let id = cur.take(id_len).ok_or_else(|| corrupt("footer"))?;
            let id = TrajId::new(
                std::str::from_utf8(id).map_err(|_| corrupt("trajectory id is not utf-8"))?,
            );
            let offset = cur.u64().ok_or_else(|| corrupt("footer"))? as usize;
            let count = cur.u64().ok_or_else(|| corrupt("footer"))? as usize;
            let n_blocks = cur.u32().ok_or_else(|| corrupt("footer"))? as usize;
            cur.take(n_blocks * 8).ok_or_else(|| corrupt("footer"))?;
            let end = offset
                .checked_add(count * RECORD_BYTES)
                .filter(|&e| e <= footer_at)
                .ok_or_else(|| corrupt("record range"))?;
            for rec in bytes[offset..end].chunks_exact(RECORD_BYTES) {
                let f = |i: usize| f64::from_le_bytes(rec[i * 8..i * 8 + 8].try_into().unwrap());
                store.append(
                    &id,
                    Sample {
                        t: f(0),
                        pos: Point2::new(f(1), f(2)),
                    },
                )?;
            }
        }
        Ok(store)
    }
}

fn check_window(t0: f64, t1: f64) -> Result<()> {
    if t0.is_nan() || t1.is_nan() || t0 > t1 {
        return Err(Error::InvalidParam {
            name: "time window",
            reason: format!("need t0 <= t1, got [{t0}, {t1}]"),
        });
    }
    Ok(())
}

pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    pub fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    pub fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}
