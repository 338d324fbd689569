//! `trajseg`: generate, segment, stream, store, query and plot trajectories.
//!
//! Every subcommand exits 0 on success and 1 with a one-line `error: ...`
//! diagnostic otherwise.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "trajseg", version, about = "Online density-based trajectory segmentation")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotMode {
    Raw,
    Segmented,
    Heatmap,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset as point CSV (traj_id,t,x,y).
    Gen {
        /// Generator spec as JSON; defaults to the built-in 20-trajectory spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the number of trajectories.
        #[arg(long)]
        n: Option<usize>,
        /// Override the seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the effective spec as JSON to stderr.
        #[arg(long)]
        show_spec: bool,
    },
    /// Segment a point CSV in one batch and write summaries as JSON lines.
    #[command(allow_negative_numbers = true)]
    Segment {
        /// Point CSV, or `-` for stdin.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        min_r: f64,
        #[arg(long)]
        min_density: f64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read points in arrival order and emit each summary as soon as it
    /// closes; open segments are flushed at end of input.
    #[command(allow_negative_numbers = true)]
    Stream {
        /// Point CSV, or `-` for stdin.
        #[arg(long = "in", default_value = "-")]
        input: PathBuf,
        #[arg(long)]
        min_r: f64,
        #[arg(long)]
        min_density: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Append a point CSV to a store directory (created if missing).
    #[command(allow_negative_numbers = true)]
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// Only used when the store is created.
        #[arg(long, default_value_t = 15.0)]
        min_r: f64,
        /// Only used when the store is created.
        #[arg(long, default_value_t = 0.1)]
        min_density: f64,
        /// Treat x,y as lon,lat and project around this origin: `lon0,lat0`.
        #[arg(long)]
        project_origin: Option<String>,
        /// Abort on the first malformed row.
        #[arg(long)]
        strict: bool,
    },
    /// Run a JSON query spec against a store; prints the JSON result.
    Query {
        #[arg(long)]
        store: PathBuf,
        /// Query spec file, or `-` for stdin.
        #[arg(long)]
        spec: PathBuf,
    },
    /// Render an SVG figure of raw tracks, summary tracks or a heatmap.
    #[command(allow_negative_numbers = true)]
    Plot {
        #[arg(long, value_enum)]
        mode: PlotMode,
        /// Point CSV input (alternative to --store).
        #[arg(long = "in", conflicts_with = "store")]
        input: Option<PathBuf>,
        /// Store directory input (alternative to --in).
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Segmenter parameters for --in with --mode segmented.
        #[arg(long, default_value_t = 15.0)]
        min_r: f64,
        #[arg(long, default_value_t = 0.1)]
        min_density: f64,
        /// Heatmap cell side in data units.
        #[arg(long, default_value_t = 5.0)]
        cell: f64,
        /// Also write the heatmap grid as a CSV matrix.
        #[arg(long)]
        grid_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        width: u32,
    },
    /// Size and compression figures of a store, as JSON.
    Stats {
        #[arg(long)]
        store: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            // clap spreads one diagnostic over several lines; fold it up to
            // the usage hint
            let msg = e.to_string();
            let line: Vec<&str> = msg
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{}", line.join(" "));
            return ExitCode::FAILURE;
        }
    };
    let result = match cli.cmd {
        Command::Gen {
            spec,
            out,
            n,
            seed,
            show_spec,
        } => commands::gen(spec.as_deref(), &out, n, seed, show_spec),
        Command::Segment {
            input,
            min_r,
            min_density,
            out,
        } => commands::segment(&input, min_r, min_density, out.as_deref()),
        Command::Stream {
            input,
            min_r,
            min_density,
            out,
        } => commands::stream(&input, min_r, min_density, out.as_deref()),
        Command::Ingest {
            input,
            store,
            min_r,
            min_density,
            project_origin,
            strict,
        } => commands::ingest(&input, &store, min_r, min_density, project_origin.as_deref(), strict),
        Command::Query { store, spec } => commands::query(&store, &spec),
        Command::Plot {
            mode,
            input,
            store,
            out,
            min_r,
            min_density,
            cell,
            grid_csv,
            width,
        } => commands::plot(commands::PlotArgs {
            mode,
            input: input.as_deref(),
            store: store.as_deref(),
            out: &out,
            min_r,
            min_density,
            cell,
            grid_csv: grid_csv.as_deref(),
            width,
        }),
        Command::Stats { store } => commands::stats(&store),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(e.as_ref()) => ExitCode::SUCCESS,
        Err(e) => {
            // keep the diagnostic on one line
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

/// Output cut short by the reader (`trajseg stream ... | head`) is not an
/// error of ours.
fn is_broken_pipe(e: &(dyn std::error::Error + 'static)) -> bool {
    let kind = e
        .downcast_ref::<std::io::Error>()
        .map(std::io::Error::kind)
        .or_else(|| e.downcast_ref::<serde_json::Error>().and_then(serde_json::Error::io_error_kind));
    kind == Some(std::io::ErrorKind::BrokenPipe)
}
