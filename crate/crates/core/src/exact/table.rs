use std::io::Write;

use serde::Serialize;

use crate::lattice::{ball_vertices, ClusterGraph, NONE};
use crate::{Error, Result};

/// An ordered finite vertex set with O(1) membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    vertices: Vec<u32>,
    position: Vec<u32>,
}

impl Domain {
    pub fn new(graph: &ClusterGraph, vertices: Vec<u32>) -> Result<Self> {
        let mut position = vec![NONE; graph.num_vertices()];
        for (i, &v) in vertices.iter().enumerate() {
            let slot = position
                .get_mut(v as usize)
                .ok_or_else(|| Error::input(format!("vertex {v} is not in the graph")))?;
            if *slot != NONE {
                return Err(Error::input(format!("vertex {v} listed twice in domain")));
            }
            *slot = i as u32;
        }
        Ok(Self { vertices, position })
    }

    /// `B_r(center)` in vertex order.
    pub fn ball(graph: &ClusterGraph, center: &[i32], r: f64) -> Self {
        Self::new(graph, ball_vertices(graph, center, r)).expect("ball vertices are distinct")
    }

    /// All vertices not flagged in `mask`.
    pub fn complement_of(graph: &ClusterGraph, mask: &[bool]) -> Self {
        let vs = (0..graph.num_vertices() as u32)
            .filter(|&v| !mask[v as usize])
            .collect();
        Self::new(graph, vs).expect("distinct")
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[u32] {
        &self.vertices
    }

    #[inline]
    pub fn contains(&self, v: u32) -> bool {
        self.position[v as usize] != NONE
    }

    #[inline]
    pub fn position(&self, v: u32) -> Option<usize> {
        let p = self.position[v as usize];
        (p != NONE).then_some(p as usize)
    }

    pub fn mask(&self) -> Vec<bool> {
        self.position.iter().map(|&p| p != NONE).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Killed Green function from `source`.
    Green,
    /// Expected exit time from each vertex.
    ExitTime,
    /// Probability of hitting `source` before leaving the domain.
    HitProbability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TableKind {
    Exact,
    MonteCarlo { n_walks: usize },
}

/// Per-vertex values of a killed-walk quantity on a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenTable {
    pub quantity: Quantity,
    pub kind: TableKind,
    pub source: Option<u32>,
    pub domain: Domain,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl GreenTable {
    pub fn value_at(&self, v: u32) -> Option<f64> {
        self.domain.position(v).map(|i| self.values[i])
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with a commented header block and fixed columns
    /// `x0,..,x{d-1},value,stderr`.
    pub fn write_csv<W: Write>(
        &self,
        graph: &ClusterGraph,
        domain_spec: &str,
        mut w: W,
    ) -> std::io::Result<()> {
        writeln!(w, "# graph_hash={}", graph.content_hash())?;
        writeln!(w, "# domain={domain_spec}")?;
        match self.source {
            Some(s) => writeln!(w, "# source={}", join(graph.coord(s), " "))?,
            None => writeln!(w, "# source=none")?,
        }
        let kind = match self.kind {
            TableKind::Exact => "exact".to_string(),
            TableKind::MonteCarlo { n_walks } => format!("monte_carlo n_walks={n_walks}"),
        };
        writeln!(
            w,
            "# quantity={}",
            serde_json::to_value(self.quantity)
                .unwrap()
                .as_str()
                .unwrap()
        )?;
        writeln!(w, "# kind={kind}")?;
        let axes: Vec<String> = (0..graph.dim()).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},value,stderr", axes.join(","))?;
        for (i, &v) in self.domain.vertices().iter().enumerate() {
            let se = self
                .stderr
                .as_ref()
                .map(|s| s[i].to_string())
                .unwrap_or_default();
            writeln!(w, "{},{},{}", join(graph.coord(v), ","), self.values[i], se)?;
        }
        Ok(())
    }
}

fn join(c: &[i32], sep: &str) -> String {
    c.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}
