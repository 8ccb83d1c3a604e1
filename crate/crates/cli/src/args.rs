use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, SourceKind};

#[derive(Debug, Parser)]
#[command(
    name = "idla-lab",
    version,
    about = "IDLA on percolation clusters: experiments, checks and renders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment a config file names.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sample clusters and write them with their summaries.
    Percolate(ExperimentArgs),
    /// Grow one aggregate and render it.
    Idla(ExperimentArgs),
    /// Coverage of B_(1-eps)R by |B_R| particles over a radius ladder.
    Shape(ExperimentArgs),
    /// The lemma check suite.
    Lemmas(ExperimentArgs),
    /// Exact identities and Monte Carlo agreement.
    Oracle(ExperimentArgs),
    /// Box and ball densities and chemical-distance ratios.
    Density(ExperimentArgs),
    /// Render an aggregate file as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Config file; without one the graph defaults to a d = 2, p = 0.7 cluster.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Flags that override config keys.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    #[arg(long, value_enum)]
    pub source: Option<SourceKind>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub half_width: Option<i32>,
    #[arg(long)]
    pub graph_seed: Option<u64>,
    #[arg(long)]
    pub clusters: Option<u64>,
    #[arg(long)]
    pub r0: Option<u32>,
    #[arg(long)]
    pub scale_count: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long)]
    pub n_walks: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub t_list: Option<Vec<f64>>,
    #[arg(short = 'n', long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub t_max: Option<u64>,
    #[arg(long)]
    pub coverage_threshold: Option<f64>,
    #[arg(long)]
    pub replica_fraction: Option<f64>,
    #[arg(long)]
    pub pairs: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        fn set<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
        set(&mut cfg.output, &self.out);
        set(&mut cfg.master_seed, &self.master_seed);
        let g = &mut cfg.graph;
        set(&mut g.source, &self.source);
        set(&mut g.d, &self.d);
        set(&mut g.p, &self.p);
        set(&mut g.half_width, &self.half_width);
        set(&mut g.seed, &self.graph_seed);
        set(&mut g.clusters, &self.clusters);
        set(&mut g.r0, &self.r0);
        set(&mut g.scale_count, &self.scale_count);
        let p = &mut cfg.parameters;
        set(&mut p.radii, &self.radii);
        set(&mut p.epsilon, &self.epsilon);
        set(&mut p.delta, &self.delta);
        set(&mut p.replicas, &self.replicas);
        set(&mut p.n_walks, &self.n_walks);
        set(&mut p.t_list, &self.t_list);
        set(&mut p.particles, &self.particles);
        set(&mut p.t_max, &self.t_max);
        set(&mut p.coverage_threshold, &self.coverage_threshold);
        set(&mut p.replica_fraction, &self.replica_fraction);
        set(&mut p.pairs, &self.pairs);
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Aggregate file written by `idla`.
    pub aggregate: PathBuf,
    /// Output SVG; defaults to the aggregate path with an `.svg` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pixels per lattice unit.
    #[arg(long, default_value_t = 6.0)]
    pub cell: f64,
    /// Shade squares by settlement index.
    #[arg(long)]
    pub color_by_order: bool,
    /// Draw circles at eps R, (1 - eps) R and R about the origin.
    #[arg(long)]
    pub overlay_radius: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
}
