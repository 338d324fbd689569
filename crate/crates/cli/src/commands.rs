use std::collections::HashMap;
use std::error::Error as StdError;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::json;
use trajseg_core::query::QuerySpec;
use trajseg_core::render::{count_vertices, render_heatmap, render_raw, render_segmented};
use trajseg_core::store::{
    group_points, points_csv, read_points_csv, Database, IngestOptions, Projection,
};
use trajseg_core::synth::{dataset_bounds, generate, heatmap_grid, GenSpec};
use trajseg_core::{
    segment_trajectory, Rect, SampledTrajectory, SegmentKind, SegmentSummary, SegmenterParams,
    StreamEngine, TrajId,
};

use crate::PlotMode;

pub type CmdResult = Result<(), Box<dyn StdError>>;

fn fail(msg: impl Into<String>) -> Box<dyn StdError> {
    msg.into().into()
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>, Box<dyn StdError>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(BufReader::new(io::stdin().lock())));
    }
    let f = File::open(path).map_err(|e| fail(format!("--in {}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(f)))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Box<dyn StdError>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => {
            let f = File::create(p).map_err(|e| fail(format!("--out {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

/// Writes one line to stdout. A reader that went away early (`| head`)
/// ends the output quietly instead of failing the command.
fn print_line(text: &str) -> CmdResult {
    let mut out = io::stdout().lock();
    match writeln!(out, "{text}").and_then(|()| out.flush()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn write_summary(w: &mut dyn Write, s: &SegmentSummary) -> io::Result<()> {
    serde_json::to_writer(&mut *w, s)?;
    w.write_all(b"\n")
}

pub fn gen(spec: Option<&Path>, out: &Path, n: Option<usize>, seed: Option<u64>, show: bool) -> CmdResult {
    let mut spec: GenSpec = match spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| fail(format!("--spec {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| fail(format!("--spec {}: {e}", p.display())))?
        }
        None => GenSpec::default(),
    };
    if let Some(n) = n {
        spec.n_trajectories = n;
    }
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if show {
        eprintln!("{}", serde_json::to_string(&spec)?);
    }
    let trajs = generate(&spec)?;
    let w = open_output(Some(out))?;
    trajseg_core::store::write_points_csv(w, &trajs)?;
    Ok(())
}

/// Batch segmentation with the same output order as [`stream`]: a summary
/// is written at the input row that closed it (the first point of the next
/// segment); segments still open at end of input follow, ordered by id.
pub fn segment(input: &Path, min_r: f64, min_density: f64, out: Option<&Path>) -> CmdResult {
    let params = SegmenterParams::new(min_r, min_density)?;
    let points = read_points_csv(open_input(input)?, Projection::None)?;
    let mut rows: HashMap<&TrajId, Vec<usize>> = HashMap::new();
    for (row, p) in points.iter().enumerate() {
        rows.entry(&p.traj_id).or_default().push(row);
    }
    let mut closed: Vec<(usize, SegmentSummary)> = Vec::new();
    let mut tails: Vec<SegmentSummary> = Vec::new();
    for t in group_points(&points)? {
        let (_, mut segs) = segment_trajectory(&t, &params)?;
        let rows = &rows[t.id()];
        if let Some(tail) = segs.pop() {
            tails.push(tail);
        }
        closed.extend(segs.into_iter().map(|s| (rows[s.end_idx], s)));
    }
    closed.sort_by_key(|(row, _)| *row);
    tails.sort_by(|a, b| a.traj_id.cmp(&b.traj_id));
    let mut w = open_output(out)?;
    for s in closed.iter().map(|(_, s)| s).chain(&tails) {
        write_summary(&mut w, s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn stream(input: &Path, min_r: f64, min_density: f64, out: Option<&Path>) -> CmdResult {
    let params = SegmenterParams::new(min_r, min_density)?;
    let mut engine = StreamEngine::new(params)?;
    let mut w = open_output(out)?;
    for p in points_csv(open_input(input)?, Projection::None) {
        if let Some(s) = engine.ingest(&p?)? {
            write_summary(&mut w, &s)?;
            // emitted as soon as closed
            w.flush()?;
        }
    }
    for s in engine.flush_all() {
        write_summary(&mut w, &s)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_origin(s: &str) -> Result<Projection, Box<dyn StdError>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| fail(format!("--project-origin: expected lon0,lat0, got {s:?}")))?;
    match v[..] {
        [lon0, lat0] if lon0.is_finite() && (-90.0..=90.0).contains(&lat0) => {
            Ok(Projection::LocalEquirectangular { lon0, lat0 })
        }
        _ => Err(fail(format!("--project-origin: expected lon0,lat0, got {s:?}"))),
    }
}

pub fn ingest(
    input: &Path,
    store: &Path,
    min_r: f64,
    min_density: f64,
    project_origin: Option<&str>,
    strict: bool,
) -> CmdResult {
    let projection = project_origin.map(parse_origin).transpose()?;
    let mut db = if Database::exists(store) {
        let db = Database::open(store)?;
        if let Some(p) = projection {
            if p != db.projection() {
                return Err(fail(format!(
                    "--project-origin: store {} already uses {:?}",
                    store.display(),
                    db.projection()
                )));
            }
        }
        db
    } else {
        Database::new(SegmenterParams::new(min_r, min_density)?)?.with_projection(projection.unwrap_or_default())
    };
    let opts = IngestOptions {
        projection: db.projection(),
        strict,
        flush_at_end: true,
    };
    let report = db.ingest_csv(open_input(input)?, opts)?;
    db.save(store)?;
    print_line(&serde_json::to_string(&report)?)
}

fn open_store(store: &Path) -> Result<Database, Box<dyn StdError>> {
    if !Database::exists(store) {
        return Err(fail(format!("--store {}: no store here", store.display())));
    }
    Ok(Database::open(store)?)
}

pub fn query(store: &Path, spec: &Path) -> CmdResult {
    let db = open_store(store)?;
    let mut text = String::new();
    open_input(spec)
        .map_err(|e| fail(e.to_string().replace("--in", "--spec")))?
        .read_to_string(&mut text)?;
    let spec: QuerySpec = serde_json::from_str(&text).map_err(|e| fail(format!("--spec: {e}")))?;
    let result = db.query(&spec)?;
    print_line(&serde_json::to_string_pretty(&result)?)
}

pub struct PlotArgs<'a> {
    pub mode: PlotMode,
    pub input: Option<&'a Path>,
    pub store: Option<&'a Path>,
    pub out: &'a Path,
    pub min_r: f64,
    pub min_density: f64,
    pub cell: f64,
    pub grid_csv: Option<&'a Path>,
    pub width: u32,
}

enum Source {
    Points(Vec<SampledTrajectory>),
    Store(Database),
}

impl Source {
    fn raw(&self) -> Result<Vec<SampledTrajectory>, Box<dyn StdError>> {
        match self {
            Source::Points(t) => Ok(t.clone()),
            Source::Store(db) => {
                let mut ids: Vec<&TrajId> = db.raw().ids().collect();
                ids.sort();
                Ok(ids.into_iter().map(|id| db.raw().trajectory(id)).collect::<Result<_, _>>()?)
            }
        }
    }
}

fn union(rects: impl IntoIterator<Item = Rect>) -> Option<Rect> {
    rects.into_iter().reduce(|a, b| a.union(&b))
}

pub fn plot(a: PlotArgs<'_>) -> CmdResult {
    let source = match (a.input, a.store) {
        (Some(p), None) => Source::Points(group_points(&read_points_csv(open_input(p)?, Projection::None)?)?),
        (None, Some(s)) => Source::Store(open_store(s)?),
        _ => return Err(fail("plot: give exactly one of --in or --store")),
    };
    let svg = match a.mode {
        PlotMode::Raw => {
            let trajs = source.raw()?;
            let bounds = dataset_bounds(&trajs).ok_or_else(|| fail("--in: no points"))?;
            render_raw(&trajs, bounds, a.width)?
        }
        PlotMode::Segmented => match &source {
            Source::Points(trajs) => {
                let params = SegmenterParams::new(a.min_r, a.min_density)?;
                let segs = trajs
                    .iter()
                    .map(|t| segment_trajectory(t, &params).map(|(_, s)| s))
                    .collect::<Result<Vec<_>, _>>()?;
                let tracks: Vec<(&TrajId, &[SegmentSummary])> =
                    trajs.iter().zip(&segs).map(|(t, s)| (t.id(), s.as_slice())).collect();
                let bounds = dataset_bounds(trajs).ok_or_else(|| fail("--in: no points"))?;
                render_segmented(&tracks, bounds, a.width)?
            }
            Source::Store(db) => {
                let tracks: Vec<(&TrajId, &[SegmentSummary])> = db.segments().iter().collect();
                let bounds = union(tracks.iter().filter_map(|(id, _)| db.segments().bounds(id)))
                    .ok_or_else(|| fail("--store: store is empty"))?;
                render_segmented(&tracks, bounds, a.width)?
            }
        },
        PlotMode::Heatmap => {
            let trajs = source.raw()?;
            let bounds = dataset_bounds(&trajs).ok_or_else(|| fail("--in: no points"))?;
            let grid = heatmap_grid(&trajs, a.cell, bounds)?;
            if let Some(p) = a.grid_csv {
                fs::write(p, grid.to_csv()).map_err(|e| fail(format!("--grid-csv {}: {e}", p.display())))?;
            }
            render_heatmap(&grid, a.width)?
        }
    };
    fs::write(a.out, &svg).map_err(|e| fail(format!("--out {}: {e}", a.out.display())))?;
    eprintln!("wrote {} ({} vertices)", a.out.display(), count_vertices(&svg));
    Ok(())
}

/// Counts, per-kind segment numbers, and summary-to-raw size ratios.
/// Reads only index metadata and store sizes, never raw samples.
pub fn stats(store: &Path) -> CmdResult {
    let db = open_store(store)?;
    let raw_points = db.raw().len();
    let summaries = db.segments().len();
    let raw_bytes = db.raw().serialized_size();
    let index_bytes = db.segments().serialized_size();
    let out = json!({
        "trajectories": db.segments().num_trajectories(),
        "raw_points": raw_points,
        "summaries": summaries,
        "local_segments": db.segments().count_kind(SegmentKind::Local),
        "locomotive_segments": db.segments().count_kind(SegmentKind::Locomotive),
        "compression_ratio": summaries as f64 / raw_points.max(1) as f64,
        "raw_bytes": raw_bytes,
        "index_bytes": index_bytes,
        "index_over_raw_bytes": index_bytes as f64 / raw_bytes.max(1) as f64,
        "params": db.params(),
    });
    print_line(&serde_json::to_string_pretty(&out)?)
}
