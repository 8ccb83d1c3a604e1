use std::collections::VecDeque;

use rand::Rng;
use serde::Serialize;

use super::boxgeom::for_each_point;
use super::graph::{ClusterGraph, NONE};
use crate::{Error, Result};

/// Volume of the unit Euclidean ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2 pi / d * V_{d-2}
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Vertices `v` of the graph with `|v - center| < r`, in vertex order.
///
/// The centre is any lattice point; it need not be a vertex.
pub fn ball_vertices(graph: &ClusterGraph, center: &[i32], r: f64) -> Vec<u32> {
    let mut out = Vec::new();
    if !(r > 0.0) {
        return out;
    }
    let reach = r.ceil() as i32;
    let hw = graph.half_width();
    let lo: Vec<i32> = center.iter().map(|&c| (c - reach).max(-hw)).collect();
    let hi: Vec<i32> = center.iter().map(|&c| (c + reach).min(hw)).collect();
    let r2 = r * r;
    for_each_point(&lo, &hi, |pt| {
        let d2: i64 = pt
            .iter()
            .zip(center)
            .map(|(&a, &b)| ((a - b) as i64).pow(2))
            .sum();
        if (d2 as f64) < r2 {
            if let Some(v) = graph.vertex_at(pt) {
                out.push(v);
            }
        }
    });
    out
}

/// Vertices strictly inside the open box of side `side` centred at `center`.
pub fn box_vertices(graph: &ClusterGraph, center: &[i32], side: f64) -> Vec<u32> {
    let mut out = Vec::new();
    if !(side > 0.0) {
        return out;
    }
    let half = side / 2.0;
    let reach = half.ceil() as i32;
    let hw = graph.half_width();
    let lo: Vec<i32> = center.iter().map(|&c| (c - reach).max(-hw)).collect();
    let hi: Vec<i32> = center.iter().map(|&c| (c + reach).min(hw)).collect();
    for_each_point(&lo, &hi, |pt| {
        let inside = pt
            .iter()
            .zip(center)
            .all(|(&a, &b)| (((a - b) as f64).abs()) < half);
        if inside {
            if let Some(v) = graph.vertex_at(pt) {
                out.push(v);
            }
        }
    });
    out
}

/// Membership mask of `B_r(center)` over all graph vertices.
pub fn ball_mask(graph: &ClusterGraph, center: &[i32], r: f64) -> Vec<bool> {
    let mut mask = vec![false; graph.num_vertices()];
    for v in ball_vertices(graph, center, r) {
        mask[v as usize] = true;
    }
    mask
}

/// Breadth-first distances from `source`; unreachable vertices get `u32::MAX`.
pub fn bfs_distances(graph: &ClusterGraph, source: u32) -> Vec<u32> {
    let mut dist = vec![NONE; graph.num_vertices()];
    dist[source as usize] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let next = dist[v as usize] + 1;
        for u in graph.neighbors(v) {
            if dist[u as usize] == NONE {
                dist[u as usize] = next;
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Chemical (graph) distance between two lattice points; `None` means
/// infinity (a point is not a vertex, or the two are disconnected).
pub fn graph_distance(graph: &ClusterGraph, x: &[i32], y: &[i32]) -> Option<u32> {
    let a = graph.vertex_at(x)?;
    let b = graph.vertex_at(y)?;
    if a == b {
        return Some(0);
    }
    let mut dist = vec![NONE; graph.num_vertices()];
    dist[a as usize] = 0;
    let mut queue = VecDeque::from([a]);
    while let Some(v) = queue.pop_front() {
        let next = dist[v as usize] + 1;
        for u in graph.neighbors(v) {
            if dist[u as usize] == NONE {
                if u == b {
                    return Some(next);
                }
                dist[u as usize] = next;
                queue.push_back(u);
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub center: Vec<i32>,
    pub radii: Vec<f64>,
    /// `|D_r(x)| / r^d`
    pub box_densities: Vec<f64>,
    /// `|B_r(x)| / (|b_1| r^d)`
    pub ball_densities: Vec<f64>,
}

/// Vertex densities of boxes of side `r` and balls of radius `r` about `center`.
///
/// Every radius must keep the ball inside the box: `|center_i| + r <= M`.
pub fn density_profile(
    graph: &ClusterGraph,
    center: &[i32],
    radii: &[f64],
) -> Result<DensityProfile> {
    let d = graph.dim();
    if center.len() != d {
        return Err(Error::input("centre dimension does not match the graph"));
    }
    let hw = graph.half_width() as f64;
    let vol = unit_ball_volume(d);
    let mut box_densities = Vec::with_capacity(radii.len());
    let mut ball_densities = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(r > 0.0) {
            return Err(Error::input(format!("radius must be positive, got {r}")));
        }
        if center.iter().any(|&c| (c as f64).abs() + r > hw) {
            return Err(Error::Range(format!(
                "radius {r} about {center:?} leaves the box of half-width {hw}"
            )));
        }
        let rd = r.powi(d as i32);
        box_densities.push(box_vertices(graph, center, r).len() as f64 / rd);
        ball_densities.push(ball_vertices(graph, center, r).len() as f64 / (vol * rd));
    }
    Ok(DensityProfile {
        center: center.to_vec(),
        radii: radii.to_vec(),
        box_densities,
        ball_densities,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChemicalScan {
    pub max_ratio: f64,
    pub pair: (Vec<i32>, Vec<i32>),
    pub pairs_used: usize,
}

/// Largest `d_graph(x, y) / |x - y|` over `n_pairs` random vertex pairs of
/// `B_R` with Euclidean separation at least `min_separation`.
pub fn chemical_ratio_scan<R: Rng>(
    graph: &ClusterGraph,
    radius: f64,
    min_separation: f64,
    n_pairs: usize,
    rng: &mut R,
) -> Result<ChemicalScan> {
    let ball = ball_vertices(graph, &vec![0; graph.dim()], radius);
    if ball.len() < 2 || n_pairs == 0 {
        return Err(Error::input("ball too small to sample pairs"));
    }
    let min2 = min_separation * min_separation;
    let mut best: Option<(f64, u32, u32)> = None;
    let mut used = 0usize;
    let mut attempts = 0usize;
    while used < n_pairs && attempts < 100 * n_pairs {
        attempts += 1;
        let a = ball[rng.random_range(0..ball.len())];
        let b = ball[rng.random_range(0..ball.len())];
        let e2 = graph.dist2_to(a, graph.coord(b)) as f64;
        if a == b || e2 < min2 {
            continue;
        }
        used += 1;
        let Some(dg) = graph_distance(graph, graph.coord(a), graph.coord(b)) else {
            continue;
        };
        let ratio = dg as f64 / e2.sqrt();
        if best.is_none_or(|(m, _, _)| ratio > m) {
            best = Some((ratio, a, b));
        }
    }
    let (max_ratio, a, b) =
        best.ok_or_else(|| Error::input("no vertex pair satisfies the separation constraint"))?;
    Ok(ChemicalScan {
        max_ratio,
        pair: (graph.coord(a).to_vec(), graph.coord(b).to_vec()),
        pairs_used: used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{percolation_cluster, ClusterPolicy};
    use rand::SeedableRng;

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn plus_shape_and_square() {
        let g = ClusterGraph::full_lattice(2, 4).unwrap();
        assert_eq!(ball_vertices(&g, &[0, 0], 1.2).len(), 5);
        assert_eq!(ball_vertices(&g, &[0, 0], 1.5).len(), 9);
        assert_eq!(ball_vertices(&g, &[0, 0], 1.0).len(), 1);
    }

    #[test]
    fn percolation_ball_is_subset_of_full() {
        let full = ClusterGraph::full_lattice(2, 20).unwrap();
        let perc = percolation_cluster(2, 0.7, 20, 4, ClusterPolicy::default()).unwrap();
        let a: Vec<Vec<i32>> = ball_vertices(&full, &[2, -1], 7.5)
            .into_iter()
            .map(|v| full.coord(v).to_vec())
            .collect();
        for v in ball_vertices(&perc, &[2, -1], 7.5) {
            assert!(a.contains(&perc.coord(v).to_vec()));
        }
    }

    #[test]
    fn distances_on_full_lattice() {
        let g = ClusterGraph::full_lattice(2, 8).unwrap();
        assert_eq!(graph_distance(&g, &[0, 0], &[3, 4]), Some(7));
        assert_eq!(graph_distance(&g, &[1, 1], &[1, 1]), Some(0));
        assert_eq!(graph_distance(&g, &[0, 0], &[30, 0]), None);
    }

    #[test]
    fn full_box_density_close_to_one() {
        let g = ClusterGraph::full_lattice(2, 20).unwrap();
        let prof = density_profile(&g, &[0, 0], &[10.0]).unwrap();
        assert!((prof.box_densities[0] - 1.0).abs() <= 4.0 / 10.0);
        let far = density_profile(&g, &[0, 0], &[19.0]).unwrap();
        assert!((far.ball_densities[0] - 1.0).abs() < 0.05);
        assert!(matches!(
            density_profile(&g, &[5, 0], &[16.0]),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn full_lattice_chemical_ratio_at_most_sqrt2() {
        let g = ClusterGraph::full_lattice(2, 30).unwrap();
        let mut rng = rand_pcg::Pcg64Mcg::seed_from_u64(1);
        let scan = chemical_ratio_scan(&g, 24.0, 4.0, 300, &mut rng).unwrap();
        assert!(scan.max_ratio <= 2f64.sqrt() + 1e-12);
        assert!(scan.max_ratio >= 1.0);
    }

    #[test]
    fn chemical_scan_needs_pairs() {
        let g = ClusterGraph::full_lattice(2, 5).unwrap();
        let mut rng = rand_pcg::Pcg64Mcg::seed_from_u64(1);
        assert!(chemical_ratio_scan(&g, 2.0, 50.0, 10, &mut rng).is_err());
    }
}
