use super::linalg::{Laplacian, SolverChoice, SpdSolver, RESIDUAL_TOL};
use super::table::{Domain, GreenTable, Quantity, TableKind};
use crate::lattice::{ClusterGraph, NONE};
use crate::{Error, Result};

/// Dirichlet Laplacian `deg(x) f(x) - sum_{y ~ x, y in D} f(y)` on `domain`,
/// with rows sorted by vertex index for a narrow envelope. Returns the matrix
/// and, for each solver row, the corresponding domain position.
fn dirichlet_laplacian(graph: &ClusterGraph, domain: &Domain) -> (Laplacian, Vec<usize>) {
    let mut order: Vec<usize> = (0..domain.len()).collect();
    order.sort_by_key(|&i| domain.vertices()[i]);
    let mut row_of = vec![0u32; domain.len()];
    for (k, &i) in order.iter().enumerate() {
        row_of[i] = k as u32;
    }
    let mut diag = Vec::with_capacity(order.len());
    let mut offsets = Vec::with_capacity(order.len() + 1);
    let mut cols = Vec::new();
    offsets.push(0);
    for &i in &order {
        let v = domain.vertices()[i];
        diag.push(graph.degree(v) as f64);
        for u in graph.neighbors(v) {
            if let Some(p) = domain.position(u) {
                cols.push(row_of[p]);
            }
        }
        offsets.push(cols.len());
    }
    (
        Laplacian {
            diag,
            offsets,
            cols,
        },
        order,
    )
}

/// Substochastic blind-walk kernel killed on leaving `domain`.
///
/// `Q[u][v] = 1/2d` for neighbours inside the domain and `Q[u][u]` is the
/// stay probability `1 - deg(u)/2d`, so `Q` is symmetric and
/// `I - Q = L_D / 2d` with `L_D` the Dirichlet graph Laplacian.
#[derive(Debug, Clone)]
pub struct KilledKernel<'g> {
    graph: &'g ClusterGraph,
    domain: Domain,
}

impl<'g> KilledKernel<'g> {
    pub fn new(graph: &'g ClusterGraph, domain: Domain) -> Self {
        Self { graph, domain }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// `Q[u][v]` for domain vertices `u`, `v`.
    pub fn entry(&self, u: u32, v: u32) -> f64 {
        let two_d = 2.0 * self.graph.dim() as f64;
        if !(self.domain.contains(u) && self.domain.contains(v)) {
            return 0.0;
        }
        if u == v {
            1.0 - self.graph.degree(u) as f64 / two_d
        } else if self.graph.neighbors(u).any(|w| w == v) {
            1.0 / two_d
        } else {
            0.0
        }
    }

    /// `sum_v Q[u][v]`; below one exactly when `u` has a neighbour outside.
    pub fn row_sum(&self, u: u32) -> f64 {
        let two_d = 2.0 * self.graph.dim() as f64;
        let inside = self
            .graph
            .neighbors(u)
            .filter(|&w| self.domain.contains(w))
            .count();
        1.0 - self.graph.degree(u) as f64 / two_d + inside as f64 / two_d
    }

    /// `(Q f)(u)` for `f` indexed by domain position.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let two_d = 2.0 * self.graph.dim() as f64;
        self.domain
            .vertices()
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let stay = 1.0 - self.graph.degree(u) as f64 / two_d;
                let moved: f64 = self
                    .graph
                    .neighbors(u)
                    .filter_map(|w| self.domain.position(w))
                    .map(|p| f[p])
                    .sum();
                stay * f[i] + moved / two_d
            })
            .collect()
    }
}

/// The degree-normalised averaging operator `h -> |N(x)|^{-1} sum_{y ~ x} h(y)`
/// that defines harmonic functions on the graph.
///
/// For the blind walk, `Q h (x) = h(x)` rearranges to
/// `(deg(x)/2d) h(x) = (1/2d) sum h(y)`: the stay term cancels and the two
/// notions of harmonicity agree at every vertex, whatever its degree. The
/// one-step kernels themselves differ wherever `deg(x) < 2d`.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicOperator<'g> {
    graph: &'g ClusterGraph,
}

impl<'g> HarmonicOperator<'g> {
    pub fn new(graph: &'g ClusterGraph) -> Self {
        Self { graph }
    }

    /// Neighbour average of `h` (indexed by vertex) at `x`.
    pub fn average(&self, h: &[f64], x: u32) -> f64 {
        let deg = self.graph.degree(x);
        self.graph.neighbors(x).map(|y| h[y as usize]).sum::<f64>() / deg as f64
    }

    /// `max_x |h(x) - average(h, x)|` over the given vertices.
    pub fn defect(&self, h: &[f64], vertices: &[u32]) -> f64 {
        vertices
            .iter()
            .map(|&x| (h[x as usize] - self.average(h, x)).abs())
            .fold(0.0, f64::max)
    }
}

/// A factored killed-walk system on one domain, reusable across sources.
#[derive(Debug, Clone)]
pub struct GreenSolver<'g> {
    kernel: KilledKernel<'g>,
    solver: SpdSolver,
    order: Vec<usize>,
}

impl<'g> GreenSolver<'g> {
    pub fn new(graph: &'g ClusterGraph, domain: Domain, choice: SolverChoice) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::input("domain is empty"));
        }
        let (lap, order) = dirichlet_laplacian(graph, &domain);
        let solver = SpdSolver::new(lap, choice)?;
        Ok(Self {
            kernel: KilledKernel::new(graph, domain),
            solver,
            order,
        })
    }

    pub fn domain(&self) -> &Domain {
        self.kernel.domain()
    }

    pub fn kernel(&self) -> &KilledKernel<'g> {
        &self.kernel
    }

    pub fn is_direct(&self) -> bool {
        self.solver.is_direct()
    }

    /// Solve `(I - Q) x = b` with `b` in domain order.
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let two_d = 2.0 * self.kernel.graph.dim() as f64;
        let rhs: Vec<f64> = self.order.iter().map(|&i| two_d * b[i]).collect();
        let y = self.solver.solve(&rhs)?;
        let mut x = vec![0.0; y.len()];
        for (k, &i) in self.order.iter().enumerate() {
            x[i] = y[k];
        }
        Ok(x)
    }

    fn check(&self, x: &[f64], b: &[f64]) -> Result<()> {
        let qx = self.kernel.apply(x);
        let res = x
            .iter()
            .zip(&qx)
            .zip(b)
            .map(|((x, q), b)| (x - q - b).abs())
            .fold(0.0, f64::max);
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if res <= RESIDUAL_TOL * scale {
            Ok(())
        } else {
            Err(Error::Numerical {
                reason: "killed-kernel residual too large".into(),
                residual: res / scale,
            })
        }
    }

    /// `G_D(source, .)`: expected number of time indices spent at each vertex
    /// before leaving the domain, counting `t = 0`.
    pub fn green(&self, source: u32) -> Result<GreenTable> {
        let s = self
            .domain()
            .position(source)
            .ok_or_else(|| Error::input("source lies outside the domain"))?;
        let mut b = vec![0.0; self.domain().len()];
        b[s] = 1.0;
        let g = self.solve(&b)?;
        self.check(&g, &b)?;
        Ok(self.table(Quantity::Green, Some(source), g))
    }

    /// Expected number of steps to leave the domain from each vertex.
    pub fn exit_time(&self) -> Result<GreenTable> {
        let b = vec![1.0; self.domain().len()];
        let u = self.solve(&b)?;
        self.check(&u, &b)?;
        Ok(self.table(Quantity::ExitTime, None, u))
    }

    fn table(&self, quantity: Quantity, source: Option<u32>, values: Vec<f64>) -> GreenTable {
        GreenTable {
            quantity,
            kind: TableKind::Exact,
            source,
            domain: self.domain().clone(),
            values,
            stderr: None,
        }
    }
}

/// Killed Green function `G_D(source, .)` of the blind walk.
pub fn exact_green(graph: &ClusterGraph, domain: &Domain, source: u32) -> Result<GreenTable> {
    GreenSolver::new(graph, domain.clone(), SolverChoice::Auto)?.green(source)
}

/// `u(x) = E_x[tau_D]`, solving `(I - Q) u = 1`.
pub fn exact_exit_time(graph: &ClusterGraph, domain: &Domain) -> Result<GreenTable> {
    GreenSolver::new(graph, domain.clone(), SolverChoice::Auto)?.exit_time()
}

/// Harmonic extension of boundary data into an interior vertex set.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub interior: Domain,
    /// Values on the interior, in interior order.
    pub values: Vec<f64>,
    pub boundary: Vec<(u32, f64)>,
}

impl Harmonic {
    pub fn value_at(&self, v: u32) -> Option<f64> {
        self.interior
            .position(v)
            .map(|i| self.values[i])
            .or_else(|| self.boundary.iter().find(|(u, _)| *u == v).map(|&(_, f)| f))
    }

    /// Interior and boundary values as a vertex-indexed vector; other
    /// vertices get NaN.
    pub fn to_vertex_vec(&self, n_vertices: usize) -> Vec<f64> {
        let mut h = vec![f64::NAN; n_vertices];
        for (&v, &x) in self.interior.vertices().iter().zip(&self.values) {
            h[v as usize] = x;
        }
        for &(v, f) in &self.boundary {
            h[v as usize] = f;
        }
        h
    }
}

/// Solve `h(x) = |N(x)|^{-1} sum_{y ~ x} h(y)` on `interior` with `h = f`
/// on the boundary vertices.
pub fn solve_dirichlet(
    graph: &ClusterGraph,
    interior: &[u32],
    boundary: &[(u32, f64)],
) -> Result<Harmonic> {
    solve_dirichlet_with(graph, interior, boundary, SolverChoice::Auto)
}

pub fn solve_dirichlet_with(
    graph: &ClusterGraph,
    interior: &[u32],
    boundary: &[(u32, f64)],
    choice: SolverChoice,
) -> Result<Harmonic> {
    let interior = Domain::new(graph, interior.to_vec())?;
    let mut data = vec![f64::NAN; graph.num_vertices()];
    for &(v, f) in boundary {
        let slot = data
            .get_mut(v as usize)
            .ok_or_else(|| Error::input(format!("boundary vertex {v} is not in the graph")))?;
        if interior.contains(v) {
            return Err(Error::input(format!(
                "vertex {v} is both interior and boundary"
            )));
        }
        if !slot.is_nan() {
            return Err(Error::input(format!("boundary vertex {v} listed twice")));
        }
        if !f.is_finite() {
            return Err(Error::input(format!("boundary value at {v} is not finite")));
        }
        *slot = f;
    }
    for &x in interior.vertices() {
        if let Some(y) = graph
            .neighbors(x)
            .find(|&y| !interior.contains(y) && data[y as usize].is_nan())
        {
            return Err(Error::input(format!(
                "neighbour {:?} of interior vertex {:?} has no boundary value",
                graph.coord(y),
                graph.coord(x)
            )));
        }
    }
    let values = if interior.is_empty() {
        Vec::new()
    } else {
        DirichletSolver::new(graph, interior.clone(), choice)?.solve(&data)?
    };
    Ok(Harmonic {
        interior,
        values,
        boundary: boundary.to_vec(),
    })
}

/// A factored Dirichlet problem on a fixed interior, reusable across
/// boundary data.
#[derive(Debug, Clone)]
pub struct DirichletSolver<'g> {
    graph: &'g ClusterGraph,
    interior: Domain,
    solver: SpdSolver,
    order: Vec<usize>,
}

impl<'g> DirichletSolver<'g> {
    pub fn new(graph: &'g ClusterGraph, interior: Domain, choice: SolverChoice) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::input("interior is empty"));
        }
        let (lap, order) = dirichlet_laplacian(graph, &interior);
        Ok(Self {
            graph,
            interior,
            solver: SpdSolver::new(lap, choice)?,
            order,
        })
    }

    pub fn interior(&self) -> &Domain {
        &self.interior
    }

    /// Vertices outside the interior adjacent to it.
    pub fn boundary(&self) -> Vec<u32> {
        outer_boundary(self.graph, &self.interior)
    }

    /// Harmonic extension of `data` (indexed by vertex, read only on the
    /// outer boundary), in interior order.
    pub fn solve(&self, data: &[f64]) -> Result<Vec<f64>> {
        let verts = self.interior.vertices();
        let rhs: Vec<f64> = self
            .order
            .iter()
            .map(|&i| {
                self.graph
                    .neighbors(verts[i])
                    .filter(|&y| !self.interior.contains(y))
                    .map(|y| data[y as usize])
                    .sum()
            })
            .collect();
        let y = self.solver.solve(&rhs)?;
        let mut h = vec![0.0; y.len()];
        for (k, &i) in self.order.iter().enumerate() {
            h[i] = y[k];
        }
        Ok(h)
    }
}

/// `P_x(tau_z < tau_D)` for every `x` in the domain, from the Dirichlet
/// problem on `D \ {z}` with value one at `z` and zero outside `D`.
pub fn exact_hit_prob(graph: &ClusterGraph, domain: &Domain, z: u32) -> Result<GreenTable> {
    if !domain.contains(z) {
        return Err(Error::input("target lies outside the domain"));
    }
    let interior: Vec<u32> = domain
        .vertices()
        .iter()
        .copied()
        .filter(|&v| v != z)
        .collect();
    let mut boundary = vec![(z, 1.0)];
    let mut seen = vec![false; graph.num_vertices()];
    for &x in &interior {
        for y in graph.neighbors(x) {
            if !domain.contains(y) && !seen[y as usize] {
                seen[y as usize] = true;
                boundary.push((y, 0.0));
            }
        }
    }
    let h = solve_dirichlet(graph, &interior, &boundary)?;
    let values = domain
        .vertices()
        .iter()
        .map(|&v| {
            if v == z {
                1.0
            } else {
                h.values[h.interior.position(v).unwrap()]
            }
        })
        .collect();
    Ok(GreenTable {
        quantity: Quantity::HitProbability,
        kind: TableKind::Exact,
        source: Some(z),
        domain: domain.clone(),
        values,
        stderr: None,
    })
}

/// Vertices adjacent to the domain but outside it, in vertex order.
pub fn outer_boundary(graph: &ClusterGraph, domain: &Domain) -> Vec<u32> {
    let mut seen = vec![NONE; graph.num_vertices()];
    let mut out = Vec::new();
    for &x in domain.vertices() {
        for y in graph.neighbors(x) {
            if !domain.contains(y) && seen[y as usize] == NONE {
                seen[y as usize] = 0;
                out.push(y);
            }
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{percolation_cluster, ClusterPolicy};

    fn plus() -> (ClusterGraph, Domain) {
        let g = ClusterGraph::full_lattice(2, 4).unwrap();
        let d = Domain::ball(&g, &[0, 0], 1.2);
        (g, d)
    }

    #[test]
    fn plus_shape_values() {
        let (g, d) = plus();
        let green = exact_green(&g, &d, g.origin()).unwrap();
        let exit = exact_exit_time(&g, &d).unwrap();
        let hit = exact_hit_prob(&g, &d, g.origin()).unwrap();
        let arm = g.vertex_at(&[0, -1]).unwrap();
        assert!((green.value_at(g.origin()).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!((green.value_at(arm).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((exit.value_at(g.origin()).unwrap() - 8.0 / 3.0).abs() < 1e-12);
        assert!((exit.value_at(arm).unwrap() - 5.0 / 3.0).abs() < 1e-12);
        assert!((hit.value_at(arm).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(hit.value_at(g.origin()), Some(1.0));
    }

    #[test]
    fn kernel_is_symmetric_substochastic() {
        let g = percolation_cluster(2, 0.7, 10, 4, ClusterPolicy::default()).unwrap();
        let k = KilledKernel::new(&g, Domain::ball(&g, &[0, 0], 6.0));
        for &u in k.domain().vertices() {
            assert!(k.row_sum(u) <= 1.0 + 1e-15);
            for &v in k.domain().vertices() {
                assert_eq!(k.entry(u, v), k.entry(v, u));
            }
        }
    }

    #[test]
    fn stays_cancel_in_the_harmonic_equation() {
        let g = percolation_cluster(2, 0.65, 12, 9, ClusterPolicy::default()).unwrap();
        let domain = Domain::ball(&g, &[0, 0], 8.0);
        let hit = exact_hit_prob(&g, &domain, g.origin()).unwrap();
        let mut h = vec![0.0; g.num_vertices()];
        for (&v, &x) in domain.vertices().iter().zip(&hit.values) {
            h[v as usize] = x;
        }
        let off: Vec<u32> = domain
            .vertices()
            .iter()
            .copied()
            .filter(|&v| v != g.origin())
            .collect();
        // degree-normalised harmonic off the target
        assert!(HarmonicOperator::new(&g).defect(&h, &off) < 1e-10);
        // and invariant under the blind kernel there
        let k = KilledKernel::new(&g, domain.clone());
        let qh = k.apply(&hit.values);
        for (i, &v) in domain.vertices().iter().enumerate() {
            if v != g.origin() {
                assert!((qh[i] - hit.values[i]).abs() < 1e-10);
            }
        }
        // while the one-step kernels differ at low-degree vertices
        let low = off.iter().copied().find(|&v| g.degree(v) < 4).unwrap();
        assert!(k.entry(low, low) > 0.0);
    }

    #[test]
    fn dirichlet_rejects_uncovered_neighbour() {
        let (g, _) = plus();
        let err = solve_dirichlet(&g, &[g.origin()], &[(g.vertex_at(&[1, 0]).unwrap(), 1.0)])
            .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn closed_component_is_singular() {
        let g = ClusterGraph::full_lattice(2, 2).unwrap();
        let all = Domain::new(&g, (0..g.num_vertices() as u32).collect()).unwrap();
        assert!(matches!(
            exact_exit_time(&g, &all),
            Err(Error::Numerical { .. })
        ));
    }

    #[test]
    fn outer_boundary_of_plus() {
        let (g, d) = plus();
        assert_eq!(outer_boundary(&g, &d).len(), 8);
    }
}
