//! Graphs the experiments run on, and Euclidean and chemical geometry on them.

mod boxgeom;
mod counterexample;
mod geometry;
mod graph;
mod io;
mod percolation;

pub use boxgeom::{for_each_point, BoxGeometry};
pub use counterexample::{
    build_counterexample, Counterexample, SealedBall, BOX_MARGIN, SEAL_EXPONENT,
};
pub use geometry::{
    ball_mask, ball_vertices, bfs_distances, box_vertices, chemical_ratio_scan, density_profile,
    graph_distance, unit_ball_volume, ChemicalScan, DensityProfile,
};
pub use graph::{ClusterGraph, GraphSource, NONE};
pub use io::{read_graph, write_graph, GRAPH_FORMAT_VERSION};
pub use percolation::{
    extract_cluster, percolation_cluster, sample_percolation, ClusterPolicy, PercolationConfig,
    DEFAULT_MAX_RETRIES,
};

/// Smallest box half-width that keeps `B_{R_max}` strictly interior with the
/// standard 25% margin.
pub fn safe_half_width(r_max: f64) -> i32 {
    (1.25 * r_max).ceil() as i32
}
