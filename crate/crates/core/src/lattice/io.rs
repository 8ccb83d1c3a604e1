//! Versioned text format for graphs.
//!
//! ```text
//! idla-graph 1
//! d <d>
//! p <p>
//! half_width <M>
//! seed <seed>
//! source <percolation|full_lattice|counterexample>
//! vertices <N>
//! <x_1> ... <x_d>          (N lines, lexicographic order)
//! edges <E>
//! <a> <b>                  (E lines, vertex indices, canonical order)
//! ```
//!
//! Floats are written in shortest round-trip form, so export followed by
//! import reproduces the graph exactly.

use std::io::{BufRead, Write};

use super::boxgeom::BoxGeometry;
use super::graph::{ClusterGraph, GraphSource};
use crate::{Error, Result};

pub const GRAPH_FORMAT_VERSION: u32 = 1;

pub fn write_graph<W: Write>(graph: &ClusterGraph, mut w: W) -> std::io::Result<()> {
    writeln!(w, "idla-graph {GRAPH_FORMAT_VERSION}")?;
    writeln!(w, "d {}", graph.dim())?;
    writeln!(w, "p {}", graph.p())?;
    writeln!(w, "half_width {}", graph.half_width())?;
    writeln!(w, "seed {}", graph.seed())?;
    writeln!(w, "source {}", graph.source())?;
    writeln!(w, "vertices {}", graph.num_vertices())?;
    let mut line = String::new();
    for v in 0..graph.num_vertices() as u32 {
        line.clear();
        for (i, x) in graph.coord(v).iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&x.to_string());
        }
        writeln!(w, "{line}")?;
    }
    let edges = graph.edges();
    writeln!(w, "edges {}", edges.len())?;
    for (a, b) in edges {
        writeln!(w, "{a} {b}")?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let l = self.next_line()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        let value = parts
            .next()
            .ok_or_else(|| self.err(format!("missing value for `{key}`")))?;
        value
            .parse()
            .map_err(|_| self.err(format!("bad value for `{key}`")))
    }

    fn numbers<T: std::str::FromStr>(&mut self, count: usize) -> Result<Vec<T>> {
        let l = self.next_line()?;
        let out: Vec<T> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| self.err("bad number")))
            .collect::<Result<_>>()?;
        if out.len() != count {
            return Err(self.err(format!("expected {count} fields, found {}", out.len())));
        }
        Ok(out)
    }
}

pub fn read_graph<R: BufRead>(r: R) -> Result<ClusterGraph> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };
    let version: u32 = lines.keyed("idla-graph")?;
    if version != GRAPH_FORMAT_VERSION {
        return Err(lines.err(format!("unsupported format version {version}")));
    }
    let d: usize = lines.keyed("d")?;
    let p: f64 = lines.keyed("p")?;
    let half_width: i32 = lines.keyed("half_width")?;
    let seed: u64 = lines.keyed("seed")?;
    let source_tag: String = lines.keyed("source")?;
    let source = GraphSource::from_tag(&source_tag)
        .ok_or_else(|| lines.err(format!("unknown source `{source_tag}`")))?;
    if d < 1 || d > 8 || half_width < 1 {
        return Err(lines.err("invalid dimension or half-width"));
    }
    let n: usize = lines.keyed("vertices")?;
    let mut coords = Vec::with_capacity(n * d);
    for _ in 0..n {
        coords.extend(lines.numbers::<i32>(d)?);
    }
    let m: usize = lines.keyed("edges")?;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let e = lines.numbers::<u32>(2)?;
        edges.push((e[0], e[1]));
    }
    ClusterGraph::from_parts(
        BoxGeometry::new(d, half_width),
        source,
        p,
        seed,
        coords,
        &edges,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{percolation_cluster, ClusterPolicy};

    #[test]
    fn roundtrip_is_bit_exact() {
        let g = percolation_cluster(2, 0.63, 12, 99, ClusterPolicy::default()).unwrap();
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        let back = read_graph(&buf[..]).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.p().to_bits(), g.p().to_bits());
        let mut again = Vec::new();
        write_graph(&back, &mut again).unwrap();
        assert_eq!(buf, again);
        assert_eq!(back.content_hash(), g.content_hash());
    }

    #[test]
    fn rejects_bad_header() {
        let err = read_graph(&b"idla-graph 7\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn rejects_non_neighbour_edge() {
        let text = "idla-graph 1\nd 2\np 1\nhalf_width 1\nseed 0\nsource full_lattice\nvertices 2\n0 0\n1 1\nedges 1\n0 1\n";
        assert!(read_graph(text.as_bytes()).is_err());
    }
}
