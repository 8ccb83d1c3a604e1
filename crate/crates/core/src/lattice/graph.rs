use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::boxgeom::BoxGeometry;
use crate::{Error, Result};

/// Sentinel for "no vertex" in direction tables and lookups.
pub const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    Percolation,
    FullLattice,
    Counterexample,
}

impl GraphSource {
    pub fn tag(&self) -> &'static str {
        match self {
            GraphSource::Percolation => "percolation",
            GraphSource::FullLattice => "full_lattice",
            GraphSource::Counterexample => "counterexample",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "percolation" => Some(GraphSource::Percolation),
            "full_lattice" => Some(GraphSource::FullLattice),
            "counterexample" => Some(GraphSource::Counterexample),
            _ => None,
        }
    }
}

impl fmt::Display for GraphSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One connected open cluster embedded in a box of `Z^d`.
///
/// Vertices are numbered in lexicographic order of their coordinates. The
/// adjacency is stored as a direction table: slot `v * 2d + k` holds the
/// neighbour of `v` in direction `k` (axis `k / 2`, positive when `k` is
/// even) or [`NONE`] when that edge is closed. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGraph {
    geometry: BoxGeometry,
    source: GraphSource,
    p: f64,
    seed: u64,
    coords: Vec<i32>,
    dirs: Vec<u32>,
    lookup: Vec<u32>,
    origin: u32,
}

impl ClusterGraph {
    /// Connected component of the origin under the given open-edge predicate.
    pub(crate) fn origin_component(
        geometry: BoxGeometry,
        source: GraphSource,
        p: f64,
        seed: u64,
        open: impl Fn(usize) -> bool,
    ) -> Result<Self> {
        let d = geometry.dim();
        let origin_coord = vec![0i32; d];
        let origin_box = geometry.index(&origin_coord).expect("origin is in the box");

        let mut in_cluster = vec![false; geometry.vertex_count()];
        in_cluster[origin_box] = true;
        let mut queue = VecDeque::from([origin_box]);
        let mut c = vec![0i32; d];
        while let Some(b) = queue.pop_front() {
            geometry.coord_into(b, &mut c);
            for_each_open_neighbour(&geometry, &mut c, &open, |nb| {
                if !in_cluster[nb] {
                    in_cluster[nb] = true;
                    queue.push_back(nb);
                }
            });
        }
        Ok(Self::from_members(
            geometry,
            source,
            p,
            seed,
            &in_cluster,
            &open,
        ))
    }

    /// Build the graph on the box vertices flagged in `members`, keeping the
    /// open edges between them.
    pub(crate) fn from_members(
        geometry: BoxGeometry,
        source: GraphSource,
        p: f64,
        seed: u64,
        members: &[bool],
        open: impl Fn(usize) -> bool,
    ) -> Self {
        let d = geometry.dim();
        let mut lookup = vec![NONE; geometry.vertex_count()];
        let mut coords = Vec::new();
        let mut c = vec![0i32; d];
        let mut n = 0u32;
        for (b, _) in members.iter().enumerate().filter(|(_, &m)| m) {
            lookup[b] = n;
            geometry.coord_into(b, &mut c);
            coords.extend_from_slice(&c);
            n += 1;
        }
        let mut dirs = vec![NONE; n as usize * 2 * d];
        for v in 0..n as usize {
            c.copy_from_slice(&coords[v * d..(v + 1) * d]);
            for axis in 0..d {
                // positive direction
                if let Some(e) = geometry.edge_id(&c, axis) {
                    if open(e) {
                        c[axis] += 1;
                        let nb = lookup[geometry.index(&c).unwrap()];
                        c[axis] -= 1;
                        if nb != NONE {
                            dirs[v * 2 * d + 2 * axis] = nb;
                            dirs[nb as usize * 2 * d + 2 * axis + 1] = v as u32;
                        }
                    }
                }
            }
        }
        let origin_coord = vec![0i32; d];
        let origin = lookup[geometry.index(&origin_coord).unwrap()];
        Self {
            geometry,
            source,
            p,
            seed,
            coords,
            dirs,
            lookup,
            origin,
        }
    }

    /// Every vertex and edge of the box `[-M, M]^d`.
    pub fn full_lattice(d: usize, half_width: i32) -> Result<Self> {
        if d < 1 || half_width < 1 {
            return Err(Error::input(
                "full lattice needs d >= 1 and half_width >= 1",
            ));
        }
        let geometry = BoxGeometry::new(d, half_width);
        let members = vec![true; geometry.vertex_count()];
        Ok(Self::from_members(
            geometry,
            GraphSource::FullLattice,
            1.0,
            0,
            &members,
            |_| true,
        ))
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn geometry(&self) -> &BoxGeometry {
        &self.geometry
    }

    pub fn half_width(&self) -> i32 {
        self.geometry.half_width()
    }

    pub fn source(&self) -> GraphSource {
        self.source
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn origin(&self) -> u32 {
        self.origin
    }

    #[inline]
    pub fn coord(&self, v: u32) -> &[i32] {
        let d = self.dim();
        &self.coords[v as usize * d..(v as usize + 1) * d]
    }

    /// Vertex at a lattice point, if that point belongs to the graph.
    pub fn vertex_at(&self, c: &[i32]) -> Option<u32> {
        self.geometry
            .index(c)
            .map(|b| self.lookup[b])
            .filter(|&v| v != NONE)
    }

    /// Direction table row of `v`, length `2d`.
    #[inline]
    pub fn directions(&self, v: u32) -> &[u32] {
        let k = 2 * self.dim();
        &self.dirs[v as usize * k..(v as usize + 1) * k]
    }

    /// The whole direction table, `2d` slots per vertex.
    #[inline]
    pub fn direction_table(&self) -> &[u32] {
        &self.dirs
    }

    pub fn neighbors(&self, v: u32) -> impl Iterator<Item = u32> + '_ {
        self.directions(v).iter().copied().filter(|&u| u != NONE)
    }

    pub fn degree(&self, v: u32) -> usize {
        self.neighbors(v).count()
    }

    pub fn num_edges(&self) -> usize {
        self.dirs.iter().filter(|&&u| u != NONE).count() / 2
    }

    /// Edges as `(lower, upper)` vertex pairs in canonical order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let d = self.dim();
        let mut out = Vec::with_capacity(self.num_edges());
        for v in 0..self.num_vertices() as u32 {
            for axis in 0..d {
                let u = self.directions(v)[2 * axis];
                if u != NONE {
                    out.push((v, u));
                }
            }
        }
        out
    }

    /// Squared Euclidean distance from a vertex to a lattice point.
    #[inline]
    pub fn dist2_to(&self, v: u32, center: &[i32]) -> i64 {
        self.coord(v)
            .iter()
            .zip(center)
            .map(|(&a, &b)| {
                let t = (a - b) as i64;
                t * t
            })
            .sum()
    }

    pub fn norm(&self, v: u32) -> f64 {
        (self.dist2_to(v, &vec![0; self.dim()]) as f64).sqrt()
    }

    /// True when the vertex sits on the outer face of the box.
    pub fn on_box_face(&self, v: u32) -> bool {
        self.geometry.on_face(self.coord(v))
    }

    pub(crate) fn from_parts(
        geometry: BoxGeometry,
        source: GraphSource,
        p: f64,
        seed: u64,
        coords: Vec<i32>,
        edges: &[(u32, u32)],
    ) -> Result<Self> {
        let d = geometry.dim();
        let n = coords.len() / d;
        let mut lookup = vec![NONE; geometry.vertex_count()];
        let mut prev: Option<usize> = None;
        for v in 0..n {
            let c = &coords[v * d..(v + 1) * d];
            let b = geometry
                .index(c)
                .ok_or_else(|| Error::input(format!("vertex {v} lies outside the box")))?;
            if prev.is_some_and(|p| p >= b) {
                return Err(Error::input(
                    "vertices must be distinct and in lexicographic order",
                ));
            }
            prev = Some(b);
            lookup[b] = v as u32;
        }
        let mut dirs = vec![NONE; n * 2 * d];
        for &(a, b) in edges {
            if a as usize >= n || b as usize >= n {
                return Err(Error::input(format!(
                    "edge ({a}, {b}) references a missing vertex"
                )));
            }
            let ca = &coords[a as usize * d..(a as usize + 1) * d];
            let cb = &coords[b as usize * d..(b as usize + 1) * d];
            let diff: Vec<i32> = cb.iter().zip(ca).map(|(x, y)| x - y).collect();
            let axis = diff.iter().position(|&x| x != 0);
            let unit = diff.iter().map(|x| x.abs()).sum::<i32>() == 1;
            let (Some(axis), true) = (axis, unit) else {
                return Err(Error::input(format!(
                    "edge ({a}, {b}) does not join lattice neighbours"
                )));
            };
            let (lo, hi) = if diff[axis] > 0 { (a, b) } else { (b, a) };
            dirs[lo as usize * 2 * d + 2 * axis] = hi;
            dirs[hi as usize * 2 * d + 2 * axis + 1] = lo;
        }
        let origin = geometry
            .index(&vec![0; d])
            .map(|b| lookup[b])
            .filter(|&v| v != NONE)
            .ok_or_else(|| Error::input("graph does not contain the origin"))?;
        Ok(Self {
            geometry,
            source,
            p,
            seed,
            coords,
            dirs,
            lookup,
            origin,
        })
    }

    /// SHA-256 of the canonical text serialization, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        super::io::write_graph(self, &mut HashWriter(&mut hasher)).expect("hashing cannot fail");
        hex_digest(hasher)
    }
}

fn for_each_open_neighbour(
    geometry: &BoxGeometry,
    c: &mut [i32],
    open: &impl Fn(usize) -> bool,
    mut f: impl FnMut(usize),
) {
    for axis in 0..geometry.dim() {
        if let Some(e) = geometry.edge_id(c, axis) {
            if open(e) {
                c[axis] += 1;
                f(geometry.index(c).unwrap());
                c[axis] -= 1;
            }
        }
        if c[axis] > -geometry.half_width() {
            c[axis] -= 1;
            let e = geometry.edge_id(c, axis).unwrap();
            if open(e) {
                f(geometry.index(c).unwrap());
            }
            c[axis] += 1;
        }
    }
}

pub(crate) fn neighbours_in_box(
    geometry: &BoxGeometry,
    c: &mut [i32],
    open: &impl Fn(usize) -> bool,
    f: impl FnMut(usize),
) {
    for_each_open_neighbour(geometry, c, open, f)
}

pub(crate) struct HashWriter<'a>(pub &'a mut Sha256);

impl std::io::Write for HashWriter<'_> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

pub(crate) fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_lattice_counts() {
        let g = ClusterGraph::full_lattice(2, 5).unwrap();
        assert_eq!(g.num_vertices(), 121);
        assert_eq!(g.num_edges(), 2 * 10 * 11);
        assert_eq!(g.coord(g.origin()), &[0, 0]);
        assert_eq!(g.degree(g.origin()), 4);
        let corner = g.vertex_at(&[5, 5]).unwrap();
        assert_eq!(g.degree(corner), 2);
    }

    #[test]
    fn directions_are_consistent() {
        let g = ClusterGraph::full_lattice(3, 2).unwrap();
        for v in 0..g.num_vertices() as u32 {
            for (k, &u) in g.directions(v).iter().enumerate() {
                if u == NONE {
                    continue;
                }
                let back = g.directions(u)[k ^ 1];
                assert_eq!(back, v);
                let axis = k / 2;
                let sign = if k % 2 == 0 { 1 } else { -1 };
                assert_eq!(g.coord(u)[axis] - g.coord(v)[axis], sign);
            }
        }
    }
}
