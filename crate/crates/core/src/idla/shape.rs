use rayon::prelude::*;
use serde::Serialize;

use super::process::{run_idla, run_idla_with_shadow, Aggregate, Shadow, ShadowCounts};
use crate::lattice::{
    ball_mask, ball_vertices, build_counterexample, percolation_cluster, ClusterGraph,
    ClusterPolicy,
};
use crate::seeds::{seed_ledger, StreamFamily};
use crate::walk::default_step_cap;
use crate::{Error, Result};

/// Largest `r` such that every graph vertex of `B_r` lies in `I(n)`.
///
/// This is the smallest norm of a vertex outside `I(n)`, since balls are
/// open. When every vertex of the graph is settled the answer is infinite.
pub fn inner_radius_prefix(aggregate: &Aggregate, graph: &ClusterGraph, n: usize) -> f64 {
    let origin = vec![0; graph.dim()];
    (0..graph.num_vertices() as u32)
        .filter(|&v| !aggregate.in_prefix(v, n))
        .map(|v| graph.dist2_to(v, &origin))
        .min()
        .map_or(f64::INFINITY, |d2| (d2 as f64).sqrt())
}

pub fn inner_radius(aggregate: &Aggregate, graph: &ClusterGraph) -> f64 {
    inner_radius_prefix(aggregate, graph, aggregate.len())
}

/// Fraction of the given vertices settled within the first `n` particles;
/// one for an empty set.
pub fn coverage_of(aggregate: &Aggregate, vertices: &[u32], n: usize) -> f64 {
    if vertices.is_empty() {
        return 1.0;
    }
    let hit = vertices
        .iter()
        .filter(|&&v| aggregate.in_prefix(v, n))
        .count();
    hit as f64 / vertices.len() as f64
}

/// Fraction of graph vertices of `B_r` (about the origin) that are settled.
pub fn coverage(aggregate: &Aggregate, graph: &ClusterGraph, r: f64) -> f64 {
    let ball = ball_vertices(graph, &vec![0; graph.dim()], r);
    coverage_of(aggregate, &ball, aggregate.len())
}

/// Graph vertices `v` with `inner <= |v - center| < outer`.
pub fn annulus_vertices(graph: &ClusterGraph, center: &[i32], inner: f64, outer: f64) -> Vec<u32> {
    let inner2 = inner * inner;
    ball_vertices(graph, center, outer)
        .into_iter()
        .filter(|&v| graph.dist2_to(v, center) as f64 >= inner2)
        .collect()
}

/// Which graphs the shape experiment draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GraphParams {
    /// A fresh percolation cluster per `(R, replica)`.
    Percolation { d: usize, p: f64 },
    /// The full box of `Z^d`.
    FullLattice { d: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeRow {
    pub radius: f64,
    pub replica: u64,
    pub cluster_seed: u64,
    pub graph_hash: String,
    pub half_width: i32,
    /// `|B_R|` counted on the graph.
    pub particles: usize,
    pub coverage_inner: f64,
    pub coverage_annulus: f64,
    pub inner_radius: f64,
    pub max_settled_distance: f64,
    /// Unsettled vertices of `B_{(1-eps)R}`.
    pub uncovered: Vec<Vec<i32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeSummary {
    pub radius: f64,
    pub replicas: usize,
    /// Replicas with an unsettled vertex in `B_{(1-eps)R}`.
    pub inner_failures: usize,
    /// Replicas with an unsettled vertex in the annulus.
    pub annulus_failures: usize,
    pub mean_uncovered: f64,
    pub mean_inner_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub graph: GraphParams,
    pub epsilon: f64,
    pub master_seed: u64,
    pub rows: Vec<ShapeRow>,
    pub summaries: Vec<ShapeSummary>,
}

/// Run IDLA with `|B_R|` particles for every `R` and replica and record how
/// much of `B_{(1-eps)R}` is filled.
///
/// Cluster seeds come from `seed_ledger(master, "cluster", replica, i)` and
/// particle streams from the family `(master, "idla/R<i>", replica)`, where
/// `i` is the position of `R` in the list.
pub fn shape_experiment(
    params: GraphParams,
    epsilon: f64,
    radii: &[f64],
    replicas: u64,
    master_seed: u64,
) -> Result<ShapeReport> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::input(format!(
            "epsilon must lie in (0, 1/2), got {epsilon}"
        )));
    }
    if radii.is_empty() || radii.iter().any(|&r| !(r >= 2.0)) {
        return Err(Error::input("radii must be at least 2"));
    }
    if replicas == 0 {
        return Err(Error::input("at least one replica is required"));
    }
    let jobs: Vec<(usize, u64)> = (0..radii.len())
        .flat_map(|i| (0..replicas).map(move |k| (i, k)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, replica)| shape_row(params, epsilon, radii[i], i, replica, master_seed))
        .collect::<Result<Vec<_>>>()?;
    let summaries = radii
        .iter()
        .map(|&radius| summarize(radius, rows.iter().filter(|r| r.radius == radius)))
        .collect();
    Ok(ShapeReport {
        graph: params,
        epsilon,
        master_seed,
        rows,
        summaries,
    })
}

fn summarize<'a>(radius: f64, rows: impl Iterator<Item = &'a ShapeRow>) -> ShapeSummary {
    let rows: Vec<&ShapeRow> = rows.collect();
    let n = rows.len().max(1) as f64;
    ShapeSummary {
        radius,
        replicas: rows.len(),
        inner_failures: rows.iter().filter(|r| r.coverage_inner < 1.0).count(),
        annulus_failures: rows.iter().filter(|r| r.coverage_annulus < 1.0).count(),
        mean_uncovered: rows.iter().map(|r| r.uncovered.len() as f64).sum::<f64>() / n,
        mean_inner_ratio: rows
            .iter()
            .map(|r| r.inner_radius.min(2.0 * radius) / radius)
            .sum::<f64>()
            / n,
    }
}

/// Box half-width for a shape run at radius `R`: `ceil(1.5 R) + 4`, room
/// for the outer fluctuations of `|B_R|` particles at small radii.
pub fn shape_half_width(radius: f64) -> i32 {
    (1.5 * radius).ceil() as i32 + 4
}

fn shape_row(
    params: GraphParams,
    epsilon: f64,
    radius: f64,
    index: usize,
    replica: u64,
    master_seed: u64,
) -> Result<ShapeRow> {
    let half_width = shape_half_width(radius);
    let cluster_seed = seed_ledger(master_seed, "cluster", replica, index as u64);
    let graph = match params {
        GraphParams::Percolation { d, p } => {
            percolation_cluster(d, p, half_width, cluster_seed, ClusterPolicy::default())?
        }
        GraphParams::FullLattice { d } => ClusterGraph::full_lattice(d, half_width)?,
    };
    let origin = vec![0; graph.dim()];
    let particles = ball_vertices(&graph, &origin, radius).len();
    let streams = StreamFamily::new(master_seed, &format!("idla/R{index}"), replica);
    let aggregate = run_idla(&graph, particles, &streams, default_step_cap(&graph))?;
    let inner_ball = ball_vertices(&graph, &origin, (1.0 - epsilon) * radius);
    let annulus = annulus_vertices(&graph, &origin, epsilon * radius, (1.0 - epsilon) * radius);
    let n = aggregate.len();
    Ok(ShapeRow {
        radius,
        replica,
        cluster_seed: graph.seed(),
        graph_hash: aggregate.graph_hash().to_string(),
        half_width,
        particles,
        coverage_inner: coverage_of(&aggregate, &inner_ball, n),
        coverage_annulus: coverage_of(&aggregate, &annulus, n),
        inner_radius: inner_radius(&aggregate, &graph),
        max_settled_distance: aggregate.max_settled_distance(&graph),
        uncovered: inner_ball
            .iter()
            .filter(|&&v| !aggregate.contains(v))
            .map(|&v| graph.coord(v).to_vec())
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SealedRow {
    pub replica: u64,
    pub particles: usize,
    /// Fraction of the first sealed ball that is settled.
    pub sealed_coverage: f64,
    /// Coverage of `B_{r_0}` about the origin, for contrast.
    pub origin_ball_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SealedReport {
    pub r0: u32,
    pub scale_count: u32,
    pub graph_hash: String,
    pub half_width: i32,
    pub sealed_radius: f64,
    pub sealed_vertices: usize,
    pub rows: Vec<SealedRow>,
    /// Replicas with sealed-ball coverage below one half.
    pub below_half: usize,
}

/// IDLA with `|B_{2 R_0}|` particles on the sealed-ball graph, measuring how
/// much of the nearest sealed ball `B_{r_0}(v_0)` fills.
pub fn sealed_ball_experiment(
    r0: u32,
    scale_count: u32,
    replicas: u64,
    master_seed: u64,
) -> Result<SealedReport> {
    if replicas == 0 {
        return Err(Error::input("at least one replica is required"));
    }
    let ce = build_counterexample(r0, scale_count)?;
    let graph = &ce.graph;
    let ball = &ce.balls[0];
    let sealed = ball_vertices(graph, &ball.center, ball.radius);
    let origin = vec![0; graph.dim()];
    let particles = ball_vertices(graph, &origin, 2.0 * r0 as f64).len();
    let near = ball_vertices(graph, &origin, ball.radius);
    let cap = default_step_cap(graph);
    let rows = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let streams = StreamFamily::new(master_seed, "idla/sealed", replica);
            let agg = run_idla(graph, particles, &streams, cap)?;
            Ok(SealedRow {
                replica,
                particles,
                sealed_coverage: coverage_of(&agg, &sealed, particles),
                origin_ball_coverage: coverage_of(&agg, &near, particles),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SealedReport {
        r0,
        scale_count,
        graph_hash: graph.content_hash(),
        half_width: graph.half_width(),
        sealed_radius: ball.radius,
        sealed_vertices: sealed.len(),
        below_half: rows.iter().filter(|r| r.sealed_coverage < 0.5).count(),
        rows,
    })
}

/// `M`, `L` from one IDLA run and an independent `L-hat` sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MlSample {
    pub m: u64,
    pub l: u64,
    pub l_hat: u64,
}

/// One draw of `(M, L, L-hat)` for target `z` and `B_R` about the origin.
///
/// The IDLA run uses `idla_streams`; `L-hat` starts one walk from every
/// vertex of `B_R`, the `i`-th vertex in vertex order drawing from
/// `lhat_streams.stream(i)`.
pub fn ml_statistics(
    graph: &ClusterGraph,
    z: u32,
    radius: f64,
    idla_streams: &StreamFamily,
    lhat_streams: &StreamFamily,
) -> Result<MlSample> {
    let origin = vec![0; graph.dim()];
    let ball_list = ball_vertices(graph, &origin, radius);
    let ball = ball_mask(graph, &origin, radius);
    if (z as usize) >= graph.num_vertices() || !ball[z as usize] {
        return Err(Error::input("z must be a vertex of B_R"));
    }
    let cap = default_step_cap(graph);
    let shadow = Shadow {
        target: z,
        ball: &ball,
        particles: ball_list.len(),
    };
    let (_, ShadowCounts { m, l }) =
        run_idla_with_shadow(graph, ball_list.len(), idla_streams, cap, &shadow)?;
    let l_hat = l_hat_sample(graph, z, &ball_list, &ball, lhat_streams, cap);
    Ok(MlSample { m, l, l_hat })
}

fn l_hat_sample(
    graph: &ClusterGraph,
    z: u32,
    starts: &[u32],
    ball: &[bool],
    streams: &StreamFamily,
    cap: u64,
) -> u64 {
    use rand::Rng;
    let two_d = 2 * graph.dim();
    let dirs = graph.direction_table();
    starts
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut rng = streams.stream(i as u64);
            let mut v = x;
            let mut t = 0u64;
            while ball[v as usize] && v != z && t < cap {
                let u = dirs[v as usize * two_d + rng.random_range(0..two_d)];
                if u != crate::lattice::NONE {
                    v = u;
                }
                t += 1;
            }
            (v == z) as u64
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_particle_inner_radius_is_one() {
        let g = ClusterGraph::full_lattice(2, 5).unwrap();
        let a = run_idla(&g, 1, &StreamFamily::new(0, "idla", 0), 10).unwrap();
        assert_eq!(inner_radius(&a, &g), 1.0);
        assert_eq!(coverage(&a, &g, 1.0), 1.0);
        assert_eq!(coverage(&a, &g, 0.5), 1.0);
        assert_eq!(coverage(&a, &g, 1.5), 1.0 / 9.0);
    }

    #[test]
    fn inner_radius_bounds_coverage() {
        let g = ClusterGraph::full_lattice(2, 20).unwrap();
        let a = run_idla(&g, 400, &StreamFamily::new(4, "idla", 0), 1 << 24).unwrap();
        let r = inner_radius(&a, &g);
        assert!(r >= 1.0);
        assert_eq!(coverage(&a, &g, r), 1.0);
        assert!(coverage(&a, &g, r + 1e-9) < 1.0);
        let mut last = 0.0;
        for n in [1, 10, 50, 100, 200, 400] {
            let rn = inner_radius_prefix(&a, &g, n);
            assert!(rn >= last);
            last = rn;
        }
    }

    #[test]
    fn all_settled_is_infinite() {
        let g = ClusterGraph::full_lattice(2, 1).unwrap();
        let a = Aggregate::from_order(&g, (0..9).collect(), vec![0; 9], String::new());
        assert_eq!(inner_radius(&a, &g), f64::INFINITY);
    }

    #[test]
    fn annulus_excludes_inner_ball() {
        let g = ClusterGraph::full_lattice(2, 10).unwrap();
        let ring = annulus_vertices(&g, &[0, 0], 2.0, 3.0);
        for v in ring {
            let r = g.norm(v);
            assert!((2.0..3.0).contains(&r));
        }
    }

    #[test]
    fn small_shape_experiment_is_reproducible() {
        let params = GraphParams::Percolation { d: 2, p: 0.8 };
        let a = shape_experiment(params, 0.25, &[6.0], 2, 3).unwrap();
        let b = shape_experiment(params, 0.25, &[6.0], 2, 3).unwrap();
        assert_eq!(a, b);
        for row in &a.rows {
            assert!((0.0..=1.0).contains(&row.coverage_inner));
        }
    }

    #[test]
    fn l_never_exceeds_m() {
        let g = percolation_cluster(2, 0.8, 20, 2, ClusterPolicy::default()).unwrap();
        let z = ball_vertices(&g, &[0, 0], 8.0)
            .into_iter()
            .find(|&v| g.norm(v) > 4.0)
            .unwrap();
        for rep in 0..5 {
            let s = ml_statistics(
                &g,
                z,
                8.0,
                &StreamFamily::new(1, "idla", rep),
                &StreamFamily::new(1, "lhat", rep),
            )
            .unwrap();
            assert!(s.l <= s.m);
        }
    }
}
