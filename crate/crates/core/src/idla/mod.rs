//! Internal diffusion limited aggregation and shape measurements.
//!
//! Particles start at the origin one at a time and perform blind walks; each
//! settles at the first vertex it reaches outside the current aggregate.

mod io;
mod process;
mod shape;

pub use io::{
    read_aggregate, read_aggregate_points, write_aggregate, AggregatePoints,
    AGGREGATE_FORMAT_VERSION,
};
pub use process::{run_idla, run_idla_with_shadow, Aggregate, Shadow, ShadowCounts};
pub use shape::{
    annulus_vertices, coverage, coverage_of, inner_radius, inner_radius_prefix, ml_statistics,
    sealed_ball_experiment, shape_experiment, shape_half_width, GraphParams, MlSample,
    SealedReport, SealedRow, ShapeReport, ShapeRow, ShapeSummary,
};
