use super::table::Domain;
use crate::lattice::{ClusterGraph, NONE};
use crate::walk::WalkKind;
use crate::{Error, Result};

/// Default cap on the memory of a stored heat-kernel table.
pub const DEFAULT_MEMORY_BUDGET: usize = 512 << 20;

#[derive(Debug, Clone, Copy)]
pub enum Restriction<'a> {
    /// Evolve on the whole finite graph; mass is conserved.
    Unkilled,
    /// Kill the walk on leaving the domain.
    Killed(&'a Domain),
}

/// Distributions `P_x(X_t = .)` advanced one step at a time.
#[derive(Debug, Clone)]
pub struct HeatKernelIter<'g> {
    graph: &'g ClusterGraph,
    kind: WalkKind,
    alive: Option<Vec<bool>>,
    current: Vec<f64>,
    next: Vec<f64>,
    t: u64,
}

impl<'g> HeatKernelIter<'g> {
    pub fn new(
        graph: &'g ClusterGraph,
        x: u32,
        restriction: Restriction<'_>,
        kind: WalkKind,
    ) -> Result<Self> {
        if x as usize >= graph.num_vertices() {
            return Err(Error::input(format!("vertex {x} is not in the graph")));
        }
        let alive = match restriction {
            Restriction::Unkilled => None,
            Restriction::Killed(domain) => {
                if !domain.contains(x) {
                    return Err(Error::input("start lies outside the killing domain"));
                }
                Some(domain.mask())
            }
        };
        let mut current = vec![0.0; graph.num_vertices()];
        current[x as usize] = 1.0;
        Ok(Self {
            graph,
            kind,
            alive,
            next: vec![0.0; current.len()],
            current,
            t: 0,
        })
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    /// `P_x(X_t = y)` indexed by vertex `y`; zero off the domain when killed.
    pub fn distribution(&self) -> &[f64] {
        &self.current
    }

    pub fn advance(&mut self) {
        let g = self.graph;
        let two_d = 2 * g.dim();
        let inv = 1.0 / two_d as f64;
        self.next.iter_mut().for_each(|v| *v = 0.0);
        for (v, &mass) in self.current.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let dirs = &g.direction_table()[v * two_d..(v + 1) * two_d];
            match self.kind {
                WalkKind::Blind => {
                    for &u in dirs {
                        let target = if u == NONE { v } else { u as usize };
                        self.next[target] += mass * inv;
                    }
                }
                WalkKind::Simple => {
                    let deg = dirs.iter().filter(|&&u| u != NONE).count();
                    if deg == 0 {
                        self.next[v] += mass;
                        continue;
                    }
                    let share = mass / deg as f64;
                    for &u in dirs.iter().filter(|&&u| u != NONE) {
                        self.next[u as usize] += share;
                    }
                }
            }
        }
        if let Some(alive) = &self.alive {
            for (p, &a) in self.next.iter_mut().zip(alive) {
                if !a {
                    *p = 0.0;
                }
            }
        }
        std::mem::swap(&mut self.current, &mut self.next);
        self.t += 1;
    }
}

/// Stored rows `P_x(X_t = .)` for `t = 0..=t_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatKernelTable {
    pub start: u32,
    pub kind: WalkKind,
    pub killed: bool,
    pub rows: Vec<Vec<f64>>,
}

impl HeatKernelTable {
    pub fn at(&self, t: usize, y: u32) -> f64 {
        self.rows[t][y as usize]
    }

    pub fn mass(&self, t: usize) -> f64 {
        self.rows[t].iter().sum()
    }

    pub fn sup(&self, t: usize) -> f64 {
        self.rows[t].iter().copied().fold(0.0, f64::max)
    }
}

pub fn heat_kernel_powers(
    graph: &ClusterGraph,
    x: u32,
    t_max: u64,
    restriction: Restriction<'_>,
    kind: WalkKind,
) -> Result<HeatKernelTable> {
    heat_kernel_powers_with_budget(graph, x, t_max, restriction, kind, DEFAULT_MEMORY_BUDGET)
}

pub fn heat_kernel_powers_with_budget(
    graph: &ClusterGraph,
    x: u32,
    t_max: u64,
    restriction: Restriction<'_>,
    kind: WalkKind,
    budget_bytes: usize,
) -> Result<HeatKernelTable> {
    let need = (t_max as u128 + 1) * graph.num_vertices() as u128 * 8;
    if need > budget_bytes as u128 {
        return Err(Error::Resource(format!(
            "{} rows of {} vertices need {need} bytes, budget is {budget_bytes}",
            t_max + 1,
            graph.num_vertices()
        )));
    }
    let mut it = HeatKernelIter::new(graph, x, restriction, kind)?;
    let mut rows = Vec::with_capacity(t_max as usize + 1);
    rows.push(it.distribution().to_vec());
    for _ in 0..t_max {
        it.advance();
        rows.push(it.distribution().to_vec());
    }
    Ok(HeatKernelTable {
        start: x,
        kind,
        killed: matches!(restriction, Restriction::Killed(_)),
        rows,
    })
}
