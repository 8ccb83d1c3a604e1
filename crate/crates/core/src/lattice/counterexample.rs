//! `Z^3` with a sequence of balls sealed off behind a single edge.
//!
//! Ball `n` has centre `v_n = -R_n e_{n mod 3}` with `R_n = 2^n R_0` and
//! radius `r_n = R_n^0.9`. Every edge crossing its boundary is deleted except
//! the lexicographically smallest one, ordered by (inside endpoint, outside
//! endpoint). Centres sit on negative half-axes, so the surviving gate lies
//! on the far side of the ball, not facing the origin.

use std::collections::HashSet;

use serde::Serialize;

use super::boxgeom::BoxGeometry;
use super::geometry::ball_vertices;
use super::graph::{ClusterGraph, GraphSource};
use crate::{Error, Result};

/// Exponent of the sealed-ball radius.
pub const SEAL_EXPONENT: f64 = 0.9;
/// Box half-width as a multiple of the outermost `2 R_n`.
pub const BOX_MARGIN: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SealedBall {
    pub scale: u32,
    /// `R_n`, distance of the centre from the origin.
    pub distance: u32,
    pub center: Vec<i32>,
    pub radius: f64,
    pub vertex_count: usize,
    /// Inside endpoint of the surviving edge (`v'`).
    pub gate_inside: Vec<i32>,
    pub gate_outside: Vec<i32>,
    pub removed_edges: usize,
}

#[derive(Debug, Clone)]
pub struct Counterexample {
    pub graph: ClusterGraph,
    pub balls: Vec<SealedBall>,
    removed: HashSet<usize>,
    gate_edges: Vec<usize>,
}

fn edge_between(geometry: &BoxGeometry, a: &[i32], b: &[i32]) -> usize {
    let axis = (0..a.len()).find(|&i| a[i] != b[i]).unwrap();
    let lo = if a[axis] < b[axis] { a } else { b };
    geometry.edge_id(lo, axis).unwrap()
}

pub fn build_counterexample(r0: u32, scale_count: u32) -> Result<Counterexample> {
    const D: usize = 3;
    if r0 < 8 {
        return Err(Error::Construction(format!(
            "R0 must be at least 8, got {r0}"
        )));
    }
    if scale_count < 1 {
        return Err(Error::Construction("scale_count must be at least 1".into()));
    }
    if scale_count > 12 {
        return Err(Error::Construction(format!(
            "scale_count {scale_count} would need an enormous box"
        )));
    }
    let distances: Vec<u32> = (0..scale_count).map(|n| r0 << n).collect();
    let r_max = *distances.last().unwrap() as f64;
    let half_width = (BOX_MARGIN * 2.0 * r_max).ceil() as i32;
    let geometry = BoxGeometry::new(D, half_width);

    let centers: Vec<Vec<i32>> = distances
        .iter()
        .enumerate()
        .map(|(n, &rn)| {
            let mut c = vec![0i32; D];
            c[n % D] = -(rn as i32);
            c
        })
        .collect();
    let radii: Vec<f64> = distances
        .iter()
        .map(|&rn| (rn as f64).powf(SEAL_EXPONENT))
        .collect();

    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let sep: f64 = centers[i]
                .iter()
                .zip(&centers[j])
                .map(|(&a, &b)| ((a - b) as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            if sep < radii[i] + radii[j] {
                return Err(Error::Construction(format!(
                    "sealed balls {i} and {j} overlap (separation {sep:.2}, radii {:.2} + {:.2})",
                    radii[i], radii[j]
                )));
            }
        }
    }

    let full = ClusterGraph::full_lattice(D, half_width)?;
    let mut removed = HashSet::new();
    let mut gate_edges = Vec::new();
    let mut balls = Vec::new();
    for (n, (center, &radius)) in centers.iter().zip(&radii).enumerate() {
        let inside = ball_vertices(&full, center, radius);
        let mut member = vec![false; full.num_vertices()];
        for &v in &inside {
            member[v as usize] = true;
        }
        let mut crossing: Vec<(Vec<i32>, Vec<i32>)> = Vec::new();
        for &v in &inside {
            for u in full.neighbors(v) {
                if !member[u as usize] {
                    crossing.push((full.coord(v).to_vec(), full.coord(u).to_vec()));
                }
            }
        }
        crossing.sort();
        let (gate_in, gate_out) = crossing
            .first()
            .cloned()
            .ok_or_else(|| Error::Construction(format!("ball {n} has no boundary edges")))?;
        for (a, b) in &crossing[1..] {
            if !removed.insert(edge_between(&geometry, a, b)) {
                return Err(Error::Construction(format!(
                    "ball {n} touches another sealed ball"
                )));
            }
        }
        gate_edges.push(edge_between(&geometry, &gate_in, &gate_out));
        balls.push(SealedBall {
            scale: n as u32,
            distance: distances[n],
            center: center.clone(),
            radius,
            vertex_count: inside.len(),
            gate_inside: gate_in,
            gate_outside: gate_out,
            removed_edges: crossing.len() - 1,
        });
    }
    if gate_edges.iter().any(|e| removed.contains(e)) {
        return Err(Error::Construction(
            "a gate edge was removed by another ball".into(),
        ));
    }

    let graph =
        ClusterGraph::origin_component(geometry, GraphSource::Counterexample, 1.0, 0, |e| {
            !removed.contains(&e)
        })?;
    if graph.num_vertices() != geometry.vertex_count() {
        return Err(Error::Construction(
            "sealing disconnected the lattice".into(),
        ));
    }
    Ok(Counterexample {
        graph,
        balls,
        removed,
        gate_edges,
    })
}

impl Counterexample {
    /// The same lattice with the gate of ball `n` removed as well, restricted
    /// to the component of the origin.
    pub fn without_gate(&self, n: usize) -> Result<ClusterGraph> {
        let gate = *self
            .gate_edges
            .get(n)
            .ok_or_else(|| Error::input(format!("no sealed ball {n}")))?;
        ClusterGraph::origin_component(
            *self.graph.geometry(),
            GraphSource::Counterexample,
            1.0,
            0,
            |e| e != gate && !self.removed.contains(&e),
        )
    }

    /// Number of graph edges with exactly one end in sealed ball `n`.
    pub fn crossing_edges(&self, n: usize) -> usize {
        let ball = &self.balls[n];
        let inside = ball_vertices(&self.graph, &ball.center, ball.radius);
        let mut member = vec![false; self.graph.num_vertices()];
        for &v in &inside {
            member[v as usize] = true;
        }
        inside
            .iter()
            .map(|&v| {
                self.graph
                    .neighbors(v)
                    .filter(|&u| !member[u as usize])
                    .count()
            })
            .sum()
    }
}
