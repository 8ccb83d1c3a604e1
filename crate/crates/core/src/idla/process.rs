use rand::Rng;
use serde::Serialize;

use crate::lattice::{ClusterGraph, NONE};
use crate::seeds::StreamFamily;
use crate::{Error, Result};

/// Settled vertices of one IDLA run in settlement order.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    order: Vec<u32>,
    steps: Vec<u64>,
    rank: Vec<u32>,
    graph_hash: String,
}

impl Aggregate {
    pub(crate) fn from_order(
        graph: &ClusterGraph,
        order: Vec<u32>,
        steps: Vec<u64>,
        graph_hash: String,
    ) -> Self {
        let mut rank = vec![NONE; graph.num_vertices()];
        for (k, &v) in order.iter().enumerate() {
            rank[v as usize] = k as u32;
        }
        Self {
            order,
            steps,
            rank,
            graph_hash,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Vertex settled by particle `k + 1`.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Walk length of each particle up to settlement.
    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub fn graph_hash(&self) -> &str {
        &self.graph_hash
    }

    /// Zero-based particle index that settled `v`, if any.
    pub fn rank(&self, v: u32) -> Option<usize> {
        let r = self.rank[v as usize];
        (r != NONE).then_some(r as usize)
    }

    /// Whether `v` belongs to `I(n)`.
    #[inline]
    pub fn in_prefix(&self, v: u32, n: usize) -> bool {
        (self.rank[v as usize] as usize) < n
    }

    #[inline]
    pub fn contains(&self, v: u32) -> bool {
        self.rank[v as usize] != NONE
    }

    /// The first `n` particles as an aggregate in their own right.
    pub fn prefix(&self, n: usize) -> Aggregate {
        let n = n.min(self.len());
        let mut rank = self.rank.clone();
        for &v in &self.order[n..] {
            rank[v as usize] = NONE;
        }
        Aggregate {
            order: self.order[..n].to_vec(),
            steps: self.steps[..n].to_vec(),
            rank,
            graph_hash: self.graph_hash.clone(),
        }
    }

    /// Largest Euclidean norm among settled vertices.
    pub fn max_settled_distance(&self, graph: &ClusterGraph) -> f64 {
        self.order
            .iter()
            .map(|&v| graph.norm(v))
            .fold(0.0, f64::max)
    }
}

/// Follow-up of the IDLA walks past settlement, used for the hit counts
/// `M` and `L` of a fixed vertex `z` and ball `B_R` about the origin.
#[derive(Debug, Clone)]
pub struct Shadow<'a> {
    pub target: u32,
    /// Membership of `B_R`, indexed by vertex.
    pub ball: &'a [bool],
    /// Only the first `particles` walks are counted.
    pub particles: usize,
}

/// Hit counts from the shadow continuation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ShadowCounts {
    /// Walks that visit `z` before leaving `B_R`.
    pub m: u64,
    /// Walks that visit `z` before leaving `B_R` at or after settling.
    pub l: u64,
}

/// Run IDLA with `n` particles released at the origin.
///
/// Particle `k` (zero based) walks with `streams.stream(k)`. Particle 1
/// settles at the origin without moving.
pub fn run_idla(
    graph: &ClusterGraph,
    n: usize,
    streams: &StreamFamily,
    step_cap: u64,
) -> Result<Aggregate> {
    run(graph, n, streams, step_cap, None).map(|(a, _)| a)
}

/// [`run_idla`] with the walks continued after settlement until they leave
/// `B_R`. The aggregate is identical to the one `run_idla` produces.
pub fn run_idla_with_shadow(
    graph: &ClusterGraph,
    n: usize,
    streams: &StreamFamily,
    step_cap: u64,
    shadow: &Shadow<'_>,
) -> Result<(Aggregate, ShadowCounts)> {
    if shadow.ball.len() != graph.num_vertices() {
        return Err(Error::input("ball mask does not match the graph"));
    }
    if !shadow.ball[shadow.target as usize] {
        return Err(Error::input("target lies outside B_R"));
    }
    run(graph, n, streams, step_cap, Some(shadow)).map(|(a, c)| (a, c.unwrap_or_default()))
}

fn run(
    graph: &ClusterGraph,
    n: usize,
    streams: &StreamFamily,
    step_cap: u64,
    shadow: Option<&Shadow<'_>>,
) -> Result<(Aggregate, Option<ShadowCounts>)> {
    if n == 0 {
        return Err(Error::input("at least one particle is required"));
    }
    if n > graph.num_vertices() {
        return Err(Error::input(format!(
            "{n} particles exceed the {} vertices of the graph",
            graph.num_vertices()
        )));
    }
    let two_d = 2 * graph.dim();
    let dirs = graph.direction_table();
    let origin = graph.origin();
    let mut occupied = vec![false; graph.num_vertices()];
    let mut order = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n);
    let mut counts = shadow.map(|_| ShadowCounts::default());

    for k in 0..n {
        let mut rng = streams.stream(k as u64);
        let mut v = origin;
        let mut t = 0u64;
        // hit bookkeeping for the shadow: earliest visit to z and exit of B_R
        let mut first_hit: Option<u64> = None;
        let mut exit: Option<u64> = None;
        let observe = |v: u32, t: u64, first_hit: &mut Option<u64>, exit: &mut Option<u64>| {
            if let Some(s) = shadow {
                if exit.is_none() {
                    if !s.ball[v as usize] {
                        *exit = Some(t);
                    } else if v == s.target && first_hit.is_none() {
                        *first_hit = Some(t);
                    }
                }
            }
        };
        observe(v, t, &mut first_hit, &mut exit);
        while occupied[v as usize] {
            if t >= step_cap {
                return Err(Error::AggregationStalled {
                    particle: k + 1,
                    steps: t,
                });
            }
            let u = dirs[v as usize * two_d + rng.random_range(0..two_d)];
            if u != NONE {
                v = u;
            }
            t += 1;
            observe(v, t, &mut first_hit, &mut exit);
        }
        if graph.on_box_face(v) {
            return Err(Error::Range(format!(
                "particle {} settled on the box face at {:?}; enlarge the box",
                k + 1,
                graph.coord(v)
            )));
        }
        occupied[v as usize] = true;
        order.push(v);
        steps.push(t);

        if let (Some(s), Some(c)) = (shadow, counts.as_mut()) {
            if k >= s.particles {
                continue;
            }
            let settled_at = t;
            // visits to z at or after settlement, before exiting B_R
            let mut late_hit = v == s.target && exit.is_none();
            let mut w = v;
            let mut tw = t;
            while exit.is_none() {
                if tw - settled_at >= step_cap {
                    return Err(Error::AggregationStalled {
                        particle: k + 1,
                        steps: tw,
                    });
                }
                let u = dirs[w as usize * two_d + rng.random_range(0..two_d)];
                if u != NONE {
                    w = u;
                }
                tw += 1;
                observe(w, tw, &mut first_hit, &mut exit);
                if exit.is_none() && w == s.target {
                    late_hit = true;
                }
            }
            if first_hit.is_some() {
                c.m += 1;
            }
            if late_hit {
                c.l += 1;
            }
        }
    }
    let hash = graph.content_hash();
    Ok((Aggregate::from_order(graph, order, steps, hash), counts))
}
