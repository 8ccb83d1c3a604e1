//! Experiment configuration.
//!
//! A config is a TOML document:
//!
//! ```toml
//! master_seed = 1
//! output = "runs/shape"        # optional
//!
//! [graph]
//! source = "percolation"       # percolation | full | counterexample
//! d = 2
//! p = 0.8
//!
//! [experiment]
//! kind = "shape"               # percolate | idla | shape | lemmas | oracle | density
//!
//! [parameters]
//! radii = [16.0, 32.0, 48.0]
//! epsilon = 0.25
//! replicas = 20
//! ```
//!
//! Unknown keys are rejected. [`ExperimentConfig::resolve`] fills every
//! default and validates the result; the resolved document is what a run
//! records and hashes.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use idla_core::lattice::{safe_half_width, unit_ball_volume};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Percolate,
    Idla,
    Shape,
    Lemmas,
    Oracle,
    Density,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Percolate => "percolate",
            ExperimentKind::Idla => "idla",
            ExperimentKind::Shape => "shape",
            ExperimentKind::Lemmas => "lemmas",
            ExperimentKind::Oracle => "oracle",
            ExperimentKind::Density => "density",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Percolation,
    Full,
    Counterexample,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Box half-width `M`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<i32>,
    /// Seed of the first cluster; cluster `k` uses `seed + k`. Without it
    /// cluster `k` uses `seed_ledger(master_seed, "cluster", k, 0)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of clusters sampled by lemmas, oracle and density runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_count: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_walks: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    /// Last time evaluated by the heat-kernel checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replica_fraction: Option<f64>,
    /// Vertex pairs sampled by the chemical-distance scan.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub parameters: ParameterSection,
}

/// Graph every run of the experiment draws from.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Percolation {
        d: usize,
        p: f64,
        half_width: Option<i32>,
        seed: Option<u64>,
        clusters: u64,
    },
    Full {
        d: usize,
        half_width: Option<i32>,
    },
    Counterexample {
        r0: u32,
        scale_count: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub radii: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub replicas: u64,
    pub n_walks: u64,
    pub t_list: Vec<f64>,
    pub particles: usize,
    pub t_max: u64,
    pub coverage_threshold: f64,
    pub replica_fraction: f64,
    pub pairs: usize,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub graph: GraphSpec,
    pub params: Params,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| bad(e.message().to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Starting point for subcommands run without a config file; call
    /// [`ExperimentConfig::fill_demo_graph`] once flags are applied.
    pub fn demo(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            experiment: ExperimentSection { kind: Some(kind) },
            ..Default::default()
        };
        cfg.fill_demo_graph();
        cfg
    }

    /// Unless another source is chosen, a `p = 0.7` cluster in two
    /// dimensions.
    pub fn fill_demo_graph(&mut self) {
        let g = &mut self.graph;
        if matches!(g.source, None | Some(SourceKind::Percolation)) {
            g.source = Some(SourceKind::Percolation);
            g.d.get_or_insert(2);
            g.p.get_or_insert(0.7);
        }
    }

    pub fn resolve(&self) -> CliResult<Resolved> {
        let kind = self
            .experiment
            .kind
            .ok_or_else(|| bad("experiment.kind is required"))?;
        let g = &self.graph;
        let source = g.source.unwrap_or(SourceKind::Percolation);
        let d = g.d.unwrap_or(2);
        if !(1..=8).contains(&d) {
            return Err(bad(format!("graph.d must lie in 1..=8, got {d}")));
        }
        if let Some(m) = g.half_width {
            if m < 1 {
                return Err(bad("graph.half_width must be positive"));
            }
            if kind == ExperimentKind::Shape {
                return Err(bad(
                    "graph.half_width is derived from each radius in shape runs",
                ));
            }
        }
        if kind == ExperimentKind::Shape && (g.seed.is_some() || g.clusters.is_some()) {
            return Err(bad(
                "shape runs draw one cluster per radius and replica from master_seed",
            ));
        }
        let stray = |key: &str, set: bool| {
            if set {
                Err(bad(format!(
                    "graph.{key} does not apply to {source:?} graphs"
                )))
            } else {
                Ok(())
            }
        };
        let graph = match source {
            SourceKind::Percolation => {
                let p =
                    g.p.ok_or_else(|| bad("graph.p is required for percolation graphs"))?;
                if !(p > 0.0 && p <= 1.0) {
                    return Err(bad(format!("graph.p must lie in (0, 1], got {p}")));
                }
                stray("r0", g.r0.is_some())?;
                stray("scale_count", g.scale_count.is_some())?;
                let clusters = g.clusters.unwrap_or(1);
                if clusters == 0 {
                    return Err(bad("graph.clusters must be at least 1"));
                }
                GraphSpec::Percolation {
                    d,
                    p,
                    half_width: g.half_width,
                    seed: g.seed,
                    clusters,
                }
            }
            SourceKind::Full => {
                stray("p", g.p.is_some())?;
                stray("seed", g.seed.is_some())?;
                stray("clusters", g.clusters.is_some())?;
                stray("r0", g.r0.is_some())?;
                stray("scale_count", g.scale_count.is_some())?;
                GraphSpec::Full {
                    d,
                    half_width: g.half_width,
                }
            }
            SourceKind::Counterexample => {
                stray("p", g.p.is_some())?;
                stray("seed", g.seed.is_some())?;
                stray("clusters", g.clusters.is_some())?;
                stray("half_width", g.half_width.is_some())?;
                if g.d.is_some_and(|d| d != 3) {
                    return Err(bad("the counterexample lattice is three dimensional"));
                }
                GraphSpec::Counterexample {
                    r0: g.r0.unwrap_or(16),
                    scale_count: g.scale_count.unwrap_or(1),
                }
            }
        };
        let params = resolve_params(kind, &self.parameters)?;
        Ok(Resolved {
            kind,
            master_seed: self.master_seed.unwrap_or(0),
            output: self.output.clone(),
            graph,
            params,
        })
    }
}

fn resolve_params(kind: ExperimentKind, p: &ParameterSection) -> CliResult<Params> {
    let default_radii: &[f64] = match kind {
        ExperimentKind::Percolate | ExperimentKind::Idla => &[],
        ExperimentKind::Shape => &[16.0, 32.0, 48.0],
        ExperimentKind::Lemmas => &[16.0],
        ExperimentKind::Oracle => &[8.0],
        ExperimentKind::Density => &[10.0, 20.0, 40.0],
    };
    let radii = p.radii.clone().unwrap_or_else(|| default_radii.to_vec());
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(bad("parameters.radii must be positive"));
    }
    if radii.is_empty() && !matches!(kind, ExperimentKind::Percolate | ExperimentKind::Idla) {
        return Err(bad("parameters.radii must not be empty"));
    }
    let epsilon = p.epsilon.unwrap_or(0.25);
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(bad(format!(
            "parameters.epsilon must lie in (0, 1/2), got {epsilon}"
        )));
    }
    let delta = p.delta.unwrap_or(0.1);
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(bad("parameters.delta must be positive"));
    }
    let replicas = p.replicas.unwrap_or(20);
    if replicas == 0 {
        return Err(bad("parameters.replicas must be at least 1"));
    }
    let t_list = p
        .t_list
        .clone()
        .unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0]);
    if t_list.is_empty() || t_list.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(bad("parameters.t_list must hold positive values"));
    }
    let particles = p.particles.unwrap_or(1000);
    if particles == 0 {
        return Err(bad("parameters.particles must be at least 1"));
    }
    let t_max = p.t_max.unwrap_or(400);
    if t_max < 20 {
        return Err(bad("parameters.t_max must be at least 20"));
    }
    let coverage_threshold = p.coverage_threshold.unwrap_or(0.99);
    let replica_fraction = p.replica_fraction.unwrap_or(0.9);
    for (key, v) in [
        ("coverage_threshold", coverage_threshold),
        ("replica_fraction", replica_fraction),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(bad(format!("parameters.{key} must lie in [0, 1], got {v}")));
        }
    }
    let pairs = p.pairs.unwrap_or(200);
    if pairs == 0 {
        return Err(bad("parameters.pairs must be at least 1"));
    }
    let default_walks = match kind {
        ExperimentKind::Oracle => 100_000,
        _ => 10_000,
    };
    Ok(Params {
        radii,
        epsilon,
        delta,
        replicas,
        n_walks: p.n_walks.unwrap_or(default_walks),
        t_list,
        particles,
        t_max,
        coverage_threshold,
        replica_fraction,
        pairs,
    })
}

impl Resolved {
    pub fn max_radius(&self) -> f64 {
        self.params.radii.iter().copied().fold(0.0, f64::max)
    }

    /// Box half-width for single-graph experiments: the configured value, or
    /// one that keeps every radius (or the expected aggregate) well inside.
    pub fn half_width(&self) -> i32 {
        let (configured, d) = match self.graph {
            GraphSpec::Percolation { half_width, d, .. } | GraphSpec::Full { half_width, d } => {
                (half_width, d)
            }
            GraphSpec::Counterexample { .. } => (None, 3),
        };
        configured.unwrap_or_else(|| match self.kind {
            ExperimentKind::Percolate if self.params.radii.is_empty() => 64,
            ExperimentKind::Idla => {
                let r = (self.params.particles as f64 / unit_ball_volume(d)).powf(1.0 / d as f64);
                safe_half_width(2.0 * r.max(2.0))
            }
            _ => safe_half_width(self.max_radius()),
        })
    }

    /// The resolved document, re-readable as a config.
    pub fn to_config(&self) -> ExperimentConfig {
        let graph = match self.graph {
            GraphSpec::Percolation {
                d,
                p,
                half_width,
                seed,
                clusters,
            } => GraphSection {
                source: Some(SourceKind::Percolation),
                d: Some(d),
                p: Some(p),
                half_width: (self.kind != ExperimentKind::Shape)
                    .then(|| half_width.unwrap_or(self.half_width())),
                seed,
                clusters: (self.kind != ExperimentKind::Shape).then_some(clusters),
                ..Default::default()
            },
            GraphSpec::Full { d, half_width } => GraphSection {
                source: Some(SourceKind::Full),
                d: Some(d),
                half_width: (self.kind != ExperimentKind::Shape)
                    .then(|| half_width.unwrap_or(self.half_width())),
                ..Default::default()
            },
            GraphSpec::Counterexample { r0, scale_count } => GraphSection {
                source: Some(SourceKind::Counterexample),
                d: Some(3),
                r0: Some(r0),
                scale_count: Some(scale_count),
                ..Default::default()
            },
        };
        let p = &self.params;
        ExperimentConfig {
            master_seed: Some(self.master_seed),
            output: self.output.clone(),
            graph,
            experiment: ExperimentSection {
                kind: Some(self.kind),
            },
            parameters: ParameterSection {
                radii: Some(p.radii.clone()),
                epsilon: Some(p.epsilon),
                delta: Some(p.delta),
                replicas: Some(p.replicas),
                n_walks: Some(p.n_walks),
                t_list: Some(p.t_list.clone()),
                particles: Some(p.particles),
                t_max: Some(p.t_max),
                coverage_threshold: Some(p.coverage_threshold),
                replica_fraction: Some(p.replica_fraction),
                pairs: Some(p.pairs),
            },
        }
    }

    /// Resolved config as TOML, without the output path so that the same
    /// experiment hashes the same wherever it is written.
    pub fn canonical_toml(&self) -> String {
        let mut cfg = self.to_config();
        cfg.output = None;
        toml::to_string(&cfg).expect("config serialises")
    }

    pub fn config_hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical_toml().as_bytes()))
    }
}
