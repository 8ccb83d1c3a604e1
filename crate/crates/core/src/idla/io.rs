//! Aggregate export.
//!
//! ```text
//! # idla-aggregate 1
//! # graph_hash <hex>
//! # d <d>
//! # particles <n>
//! <k> <x_1> ... <x_d> <steps>     (n lines, k = 1..n)
//! ```

use std::io::{BufRead, Write};

use super::process::Aggregate;
use crate::lattice::ClusterGraph;
use crate::{Error, Result};

pub const AGGREGATE_FORMAT_VERSION: u32 = 1;

pub fn write_aggregate<W: Write>(
    aggregate: &Aggregate,
    graph: &ClusterGraph,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "# idla-aggregate {AGGREGATE_FORMAT_VERSION}")?;
    writeln!(w, "# graph_hash {}", aggregate.graph_hash())?;
    writeln!(w, "# d {}", graph.dim())?;
    writeln!(w, "# particles {}", aggregate.len())?;
    for (k, (&v, &s)) in aggregate.order().iter().zip(aggregate.steps()).enumerate() {
        write!(w, "{}", k + 1)?;
        for x in graph.coord(v) {
            write!(w, " {x}")?;
        }
        writeln!(w, " {s}")?;
    }
    Ok(())
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

/// Settlement record of an aggregate file, independent of any graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatePoints {
    pub d: usize,
    pub graph_hash: String,
    /// Coordinates in settlement order.
    pub points: Vec<Vec<i32>>,
    pub steps: Vec<u64>,
}

/// Parse an aggregate file without a graph.
pub fn read_aggregate_points<R: BufRead>(r: R) -> Result<AggregatePoints> {
    let mut hash = None;
    let mut dim = None;
    let mut expected = None;
    let mut points = Vec::new();
    let mut steps = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let no = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("idla-aggregate"), Some(v)) if v == AGGREGATE_FORMAT_VERSION.to_string() => {}
                (Some("idla-aggregate"), v) => {
                    return Err(parse_err(
                        no,
                        format!("unsupported aggregate version {v:?}"),
                    ))
                }
                (Some("graph_hash"), Some(h)) => hash = Some(h.to_string()),
                (Some("d"), Some(x)) => {
                    dim = Some(
                        x.parse::<usize>()
                            .map_err(|e| parse_err(no, e.to_string()))?,
                    )
                }
                (Some("particles"), Some(n)) => {
                    expected = Some(
                        n.parse::<usize>()
                            .map_err(|e| parse_err(no, e.to_string()))?,
                    )
                }
                _ => {}
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let d = dim.ok_or_else(|| parse_err(no, "record before the d header"))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != d + 2 {
            return Err(parse_err(no, format!("expected {} fields", d + 2)));
        }
        let k: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(no, "bad particle index"))?;
        if k != points.len() + 1 {
            return Err(parse_err(no, format!("particle {k} out of order")));
        }
        let c = fields[1..=d]
            .iter()
            .map(|f| f.parse::<i32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| parse_err(no, "bad coordinate"))?;
        let s: u64 = fields[d + 1]
            .parse()
            .map_err(|_| parse_err(no, "bad step count"))?;
        points.push(c);
        steps.push(s);
    }
    let graph_hash = hash.ok_or_else(|| parse_err(0, "missing graph_hash header"))?;
    let d = dim.ok_or_else(|| parse_err(0, "missing d header"))?;
    if expected.is_some_and(|n| n != points.len()) {
        return Err(parse_err(0, "particle count does not match header"));
    }
    Ok(AggregatePoints {
        d,
        graph_hash,
        points,
        steps,
    })
}

/// Read an aggregate back onto `graph`. The recorded graph hash must match.
pub fn read_aggregate<R: BufRead>(graph: &ClusterGraph, r: R) -> Result<Aggregate> {
    let rec = read_aggregate_points(r)?;
    if rec.d != graph.dim() {
        return Err(Error::input("dimension does not match the graph"));
    }
    if rec.graph_hash != graph.content_hash() {
        return Err(Error::input("aggregate was recorded on a different graph"));
    }
    let mut seen = vec![false; graph.num_vertices()];
    let mut order = Vec::with_capacity(rec.points.len());
    for c in &rec.points {
        let v = graph
            .vertex_at(c)
            .ok_or_else(|| Error::input(format!("{c:?} is not a vertex of the graph")))?;
        if std::mem::replace(&mut seen[v as usize], true) {
            return Err(Error::input(format!("vertex {c:?} settled twice")));
        }
        order.push(v);
    }
    Ok(Aggregate::from_order(
        graph,
        order,
        rec.steps,
        rec.graph_hash,
    ))
}
