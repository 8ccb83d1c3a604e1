//! Internal diffusion limited aggregation on bond-percolation clusters.
//!
//! The crate is split along the lines of the experiment pipeline:
//!
//! * [`lattice`] samples percolation configurations and builds the graphs
//!   everything else runs on (percolation clusters, the full box, and the
//!   sealed-ball counterexample), together with Euclidean geometry queries.
//! * [`walk`] runs blind and simple random walks with stopping rules and
//!   produces Monte Carlo estimates.
//! * [`exact`] solves the corresponding linear systems: killed Green
//!   functions, exit times, hitting probabilities, Dirichlet problems and
//!   heat-kernel powers.
//! * [`idla`] runs the aggregation process and measures its shape.
//! * [`lemmas`] turns the regularity estimates behind the inner bound into
//!   runnable checks with measured constants.

pub mod error;
pub mod exact;
pub mod idla;
pub mod lattice;
pub mod lemmas;
pub mod seeds;
pub mod walk;

pub use error::{Error, Result};
pub use lattice::{ClusterGraph, GraphSource, PercolationConfig};
pub use seeds::{seed_ledger, StreamFamily};
