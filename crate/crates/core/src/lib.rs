//! Online density-based trajectory segmentation and the segment-summary
//! index built on top of it.
//!
//! Raw position streams are cut into segments by [`segmenter`]; each segment
//! collapses to a [`model::SegmentSummary`]. The summaries form a compact
//! trajectory of their own and serve as a spatial-temporal index
//! ([`store`]) for range, nearest-neighbour, pairwise and hybrid queries
//! ([`query`]).

pub mod density;
pub mod error;
pub mod model;
pub mod query;
pub mod render;
pub mod segmenter;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    summaries_as_trajectory, validate_segmentation, EstimatorKind, Point2, Rect, Sample,
    SamplePoint, SampledTrajectory, SegmentKind, SegmentSummary, Segmentation, SegmenterParams,
    TRepMode, TrajId,
};
pub use segmenter::{
    estimate_compression, segment_hierarchy, segment_trajectory, SegmenterState, StreamEngine,
};
