//! Dual-path persistence: every ingested point goes to the [`RawStore`]
//! and through the [`StreamEngine`], whose closed segments land in the
//! much smaller [`SegmentStore`].
//!
//! Point CSV is `traj_id,t,x,y` (UTF-8, `.` decimal, LF), header optional.
//! With [`Projection::LocalEquirectangular`] the `x,y` columns are
//! longitude/latitude in degrees and are projected to meters:
//! `x = R (lon - lon0) cos(lat0)`, `y = R (lat - lat0)` with
//! `R = 6_371_008.8` m.

pub mod raw;
pub mod segments;

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Point2, Rect, SamplePoint, SampledTrajectory, SegmentSummary, SegmenterParams, TrajId};
use crate::segmenter::StreamEngine;

pub use raw::{RawStore, BLOCK_SIZE};
pub use segments::SegmentStore;

pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Projection {
    #[default]
    None,
    LocalEquirectangular { lon0: f64, lat0: f64 },
}

impl Projection {
    pub fn project(&self, x: f64, y: f64) -> Point2 {
        match *self {
            Projection::None => Point2::new(x, y),
            Projection::LocalEquirectangular { lon0, lat0 } => Point2::new(
                EARTH_RADIUS_M * (x - lon0).to_radians() * lat0.to_radians().cos(),
                EARTH_RADIUS_M * (y - lat0).to_radians(),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IngestOptions {
    pub projection: Projection,
    /// Abort on the first bad row instead of counting and skipping it.
    pub strict: bool,
    /// Close all open segments once the input is exhausted.
    pub flush_at_end: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub ingested: usize,
    pub rejects: usize,
    pub trajectories: usize,
    pub summaries: usize,
    /// First few rejection messages.
    pub errors: Vec<String>,
}

const MAX_REPORTED_ERRORS: usize = 20;

/// Parses one CSV record. Returns `Ok(None)` for a header row.
fn parse_record(rec: &csv::StringRecord, line: usize) -> Result<Option<(TrajId, f64, f64, f64)>> {
    if rec.len() != 4 {
        return Err(Error::Parse {
            line,
            reason: format!("expected 4 fields traj_id,t,x,y, got {}", rec.len()),
        });
    }
    let num = |i: usize, name: &str| -> Result<f64> {
        rec[i].trim().parse::<f64>().map_err(|_| Error::Parse {
            line,
            reason: format!("{name} is not a number: {:?}", &rec[i]),
        })
    };
    if line == 1 && rec[1].trim() == "t" {
        return Ok(None);
    }
    let id = rec[0].trim();
    if id.is_empty() {
        return Err(Error::Parse {
            line,
            reason: "empty traj_id".into(),
        });
    }
    Ok(Some((TrajId::new(id), num(1, "t")?, num(2, "x")?, num(3, "y")?)))
}

/// Reads a point CSV without storing anything.
pub fn read_points_csv<R: Read>(r: R, projection: Projection) -> Result<Vec<SamplePoint>> {
    points_csv(r, projection).collect()
}

/// Lazily parses a point CSV row by row (header skipped), so callers can
/// act on each point as soon as its line is complete.
pub fn points_csv<R: Read>(r: R, projection: Projection) -> impl Iterator<Item = Result<SamplePoint>> {
    let rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    rdr.into_records().enumerate().filter_map(move |(i, rec)| {
        let parsed = rec
            .map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })
            .and_then(|rec| parse_record(&rec, i + 1));
        match parsed {
            Ok(None) => None,
            Ok(Some((id, t, x, y))) => Some(Ok(SamplePoint {
                traj_id: id,
                t,
                pos: projection.project(x, y),
            })),
            Err(e) => Some(Err(e)),
        }
    })
}

/// Groups points by trajectory (first-appearance order).
pub fn group_points(points: &[SamplePoint]) -> Result<Vec<SampledTrajectory>> {
    let mut order: Vec<TrajId> = Vec::new();
    let mut groups: std::collections::HashMap<&TrajId, Vec<crate::model::Sample>> =
        std::collections::HashMap::new();
    for p in points {
        groups
            .entry(&p.traj_id)
            .or_insert_with(|| {
                order.push(p.traj_id.clone());
                Vec::new()
            })
            .push(p.sample());
    }
    order
        .iter()
        .map(|id| SampledTrajectory::new(id.clone(), groups.remove(id).unwrap_or_default()))
        .collect()
}

/// Writes trajectories as point CSV with a header row.
pub fn write_points_csv<W: Write>(w: W, trajs: &[SampledTrajectory]) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "traj_id,t,x,y")?;
    for t in trajs {
        for s in t.samples() {
            writeln!(w, "{},{},{},{}", t.id(), s.t, s.pos.x, s.pos.y)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    params: SegmenterParams,
    projection: Projection,
    block_size: usize,
}

/// Raw store, segment index and the live segmenter behind them.
#[derive(Debug, Clone)]
pub struct Database {
    params: SegmenterParams,
    projection: Projection,
    engine: StreamEngine,
    raw: RawStore,
    segments: SegmentStore,
}

impl Database {
    pub fn new(params: SegmenterParams) -> Result<Self> {
        Ok(Self {
            params,
            projection: Projection::None,
            engine: StreamEngine::new(params)?,
            raw: RawStore::new(),
            segments: SegmentStore::new(2.0 * params.min_r)?,
        })
    }

    pub fn with_projection(mut self, projection: Projection) -> Self {
        self.projection = projection;
        self
    }

    /// Builds a database from whole trajectories and flushes it.
    pub fn from_trajectories(params: SegmenterParams, trajs: &[SampledTrajectory]) -> Result<Self> {
        let mut db = Self::new(params)?;
        for t in trajs {
            for s in t.samples() {
                db.ingest_point(&SamplePoint {
                    traj_id: t.id().clone(),
                    t: s.t,
                    pos: s.pos,
                })?;
            }
        }
        db.flush_all();
        Ok(db)
    }

    pub fn params(&self) -> &SegmenterParams {
        &self.params
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    pub fn raw(&self) -> &RawStore {
        &self.raw
    }

    pub fn segments(&self) -> &SegmentStore {
        &self.segments
    }

    pub fn engine(&self) -> &StreamEngine {
        &self.engine
    }

    /// Stores one (already projected) point and feeds the segmenter.
    /// Returns the number of summaries it closed.
    pub fn ingest_point(&mut self, p: &SamplePoint) -> Result<usize> {
        let closed = self.engine.ingest(p)?;
        self.raw.append(&p.traj_id, p.sample())?;
        match closed {
            Some(s) => {
                self.segments.insert(s)?;
                Ok(1)
            }
            None => Ok(0),
        }
    }

    pub fn flush_all(&mut self) -> Vec<SegmentSummary> {
        let closed = self.engine.flush_all();
        for s in &closed {
            self.segments
                .insert(s.clone())
                .expect("flushed summaries follow the closed ones");
        }
        closed
    }

    pub fn ingest_csv<R: Read>(&mut self, r: R, opts: IngestOptions) -> Result<IngestReport> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(r);
        let mut report = IngestReport::default();
        let mut seen = std::collections::HashSet::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 1;
            let parsed = rec
                .map_err(|e| Error::Parse {
                    line,
                    reason: e.to_string(),
                })
                .and_then(|rec| parse_record(&rec, line));
            let outcome = match parsed {
                Ok(None) => continue,
                Ok(Some((id, t, x, y))) => {
                    report.rows += 1;
                    let p = SamplePoint {
                        traj_id: id,
                        t,
                        pos: opts.projection.project(x, y),
                    };
                    self.ingest_point(&p).map(|n| (p.traj_id, n))
                }
                Err(e) => {
                    report.rows += 1;
                    Err(e)
                }
            };
            match outcome {
                Ok((id, n)) => {
                    report.ingested += 1;
                    report.summaries += n;
                    seen.insert(id);
                }
                Err(e) if opts.strict => return Err(e),
                Err(e) => {
                    report.rejects += 1;
                    if report.errors.len() < MAX_REPORTED_ERRORS {
                        report.errors.push(format!("line {line}: {e}"));
                    }
                }
            }
        }
        if opts.flush_at_end {
            report.summaries += self.flush_all().len();
        }
        report.trajectories = seen.len();
        Ok(report)
    }

    /// Bounding rectangle of a trajectory's raw samples, from the index
    /// (no raw access).
    pub fn bounds(&self, id: &TrajId) -> Option<Rect> {
        self.segments.bounds(id)
    }

    /// Writes `raw.bin`, `segments.bin` and `meta.json` into `dir`.
    /// Open segments are flushed first.
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        self.flush_all();
        fs::create_dir_all(dir)?;
        let meta = Meta {
            params: self.params,
            projection: self.projection,
            block_size: self.raw.block_size(),
        };
        fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta)?)?;
        self.raw
            .write_to(BufWriter::new(fs::File::create(dir.join("raw.bin"))?))?;
        fs::write(dir.join("segments.bin"), self.segments.to_bytes())?;
        Ok(())
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let meta: Meta = serde_json::from_slice(&fs::read(dir.join("meta.json"))?)?;
        let raw = RawStore::read_from(
            BufReader::new(fs::File::open(dir.join("raw.bin"))?),
            meta.block_size,
        )?;
        let segments = SegmentStore::from_bytes(&fs::read(dir.join("segments.bin"))?)?;
        let mut engine = StreamEngine::new(meta.params)?;
        for id in raw.ids() {
            let last = raw.last(id).expect("stored tracks are non-empty");
            engine.resume(id.clone(), raw.track_len(id).unwrap_or(0), last.t);
        }
        Ok(Self {
            params: meta.params,
            projection: meta.projection,
            engine,
            raw,
            segments,
        })
    }

    pub fn exists(dir: &Path) -> bool {
        dir.join("meta.json").is_file()
    }
}
