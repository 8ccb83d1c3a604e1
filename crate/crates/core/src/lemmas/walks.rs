//! Checks on walk transition probabilities: escape, Carne-Varopoulos and
//! on-diagonal heat-kernel decay.

use rayon::prelude::*;

use super::report::{CheckReport, THEOREM_TOL};
use crate::exact::{solve_dirichlet, HeatKernelIter, Restriction};
use crate::lattice::{bfs_distances, ClusterGraph, NONE};
use crate::seeds::StreamFamily;
use crate::walk::{default_step_cap, step_simple, Estimate, Tally, WalkKind};
use crate::{Error, Result};

/// Probability that the simple walk from `x` reaches graph distance `r`
/// before returning to `x`, against the lower bound `1/(2dr)`.
///
/// The probability is solved exactly; with `n_walks > 0` it is also
/// estimated by simulation and must clear the bound within 3 sigma.
pub fn check_escape_conductance(
    graph: &ClusterGraph,
    x: u32,
    r: u32,
    n_walks: u64,
    streams: &StreamFamily,
) -> Result<CheckReport> {
    if r == 0 {
        return Err(Error::input("r must be at least 1"));
    }
    let dist = bfs_distances(graph, x);
    let sphere: Vec<u32> = (0..graph.num_vertices() as u32)
        .filter(|&v| dist[v as usize] == r)
        .collect();
    if sphere.is_empty() {
        return Err(Error::input(format!("no vertex at graph distance {r}")));
    }
    if (0..graph.num_vertices() as u32).any(|v| dist[v as usize] <= r && graph.on_box_face(v)) {
        return Err(Error::Range(format!(
            "graph ball of radius {r} reaches the box face; enlarge the box"
        )));
    }
    let interior: Vec<u32> = (0..graph.num_vertices() as u32)
        .filter(|&v| dist[v as usize] > 0 && dist[v as usize] < r)
        .collect();
    let mut boundary: Vec<(u32, f64)> = sphere.iter().map(|&v| (v, 1.0)).collect();
    boundary.push((x, 0.0));
    let h = solve_dirichlet(graph, &interior, &boundary)?;
    let exact = graph
        .neighbors(x)
        .map(|y| h.value_at(y).unwrap())
        .sum::<f64>()
        / graph.degree(x) as f64;
    let bound = 1.0 / (2.0 * graph.dim() as f64 * r as f64);

    let mut rep = CheckReport::new("escape_conductance")
        .param("graph_hash", graph.content_hash())
        .param("x", graph.coord(x))
        .param("r", r)
        .param("degree", graph.degree(x));
    rep.measure(
        "escape_exact",
        exact,
        "P_x(hit graph sphere of radius r before returning to x)",
    );
    rep.measure("bound", bound, "1 / (2 d r)");
    let mut pass = exact >= bound - THEOREM_TOL;
    let mut margin = exact - bound;
    if n_walks > 0 {
        let cap = default_step_cap(graph);
        let tally = (0..n_walks)
            .into_par_iter()
            .fold(Tally::default, |mut t, i| {
                let mut rng = streams.stream(i);
                let mut v = step_simple(graph, x, &mut rng);
                let mut steps = 1u64;
                while v != x && dist[v as usize] < r && steps < cap {
                    v = step_simple(graph, v, &mut rng);
                    steps += 1;
                }
                t.push((dist[v as usize] == r) as u64);
                t
            })
            .reduce(Tally::default, Tally::merge);
        let est: Estimate = tally.estimate();
        rep.samples = n_walks;
        rep.measure(
            "escape_hat",
            est.mean,
            "fraction of simulated walks escaping",
        );
        rep.measure(
            "escape_hat_stderr",
            est.stderr,
            "standard error of escape_hat",
        );
        pass &= est.mean >= bound - 3.0 * est.stderr;
        margin = margin.min(est.mean + 3.0 * est.stderr - bound);
    }
    Ok(rep.verdict(pass, margin))
}

/// `P[Y_t = x | Y_0 = y] <= 4 sqrt(d) exp(-r^2 / 2t)` with `r = d_graph(x, y)`
/// for every `t` in `t_lo..=t_hi`, evaluated exactly.
pub fn check_carne_varopoulos(
    graph: &ClusterGraph,
    x: u32,
    y: u32,
    t_lo: u64,
    t_hi: u64,
) -> Result<CheckReport> {
    if t_lo == 0 || t_hi < t_lo {
        return Err(Error::input("need 1 <= t_lo <= t_hi"));
    }
    let r = bfs_distances(graph, y)[x as usize];
    if r == NONE {
        return Err(Error::input("x and y are not connected"));
    }
    let mut it = HeatKernelIter::new(graph, y, Restriction::Unkilled, WalkKind::Simple)?;
    let pref = 4.0 * (graph.dim() as f64).sqrt();
    let r2 = (r as f64) * (r as f64);
    let mut worst_ratio = 0.0f64;
    let mut margin = f64::INFINITY;
    let mut violations = 0u64;
    while it.time() < t_hi {
        it.advance();
        let t = it.time();
        if t < t_lo {
            continue;
        }
        let p = it.distribution()[x as usize];
        let bound = pref * (-r2 / (2.0 * t as f64)).exp();
        worst_ratio = worst_ratio.max(p / bound);
        margin = margin.min(bound - p);
        if p > bound {
            violations += 1;
        }
    }
    let mut rep = CheckReport::new("carne_varopoulos")
        .param("graph_hash", graph.content_hash())
        .param("x", graph.coord(x))
        .param("y", graph.coord(y))
        .param("t_range", [t_lo, t_hi]);
    rep.samples = t_hi - t_lo + 1;
    rep.measure("graph_distance", r as f64, "d_graph(x, y)");
    rep.measure(
        "max_ratio",
        worst_ratio,
        "max_t P_y(Y_t = x) / (4 sqrt(d) exp(-r^2/2t))",
    );
    rep.measure(
        "violations",
        violations as f64,
        "count of t with P_y(Y_t = x) above the bound",
    );
    Ok(rep.verdict(violations == 0, margin))
}

/// Allowed rise of the last subrange maximum over all earlier ones.
pub const ENDPOINT_GROWTH_TOL: f64 = 0.2;

/// Fitted `c_2 = max_t t^{d/2} sup_y P_x(X_t = y)` for the blind walk over
/// `t_lo..=t_hi`, optionally restricted to one parity of `t`.
///
/// The range is cut into `subranges` geometric pieces. The check passes when
/// `c_2` is finite and the last piece's maximum exceeds the maximum of the
/// earlier pieces by at most [`ENDPOINT_GROWTH_TOL`], i.e. the fit is not
/// driven by growth at the end of the range. The relative spread of the
/// piece maxima around `c_2` is reported.
pub fn check_heat_kernel_decay(
    graph: &ClusterGraph,
    x: u32,
    t_lo: u64,
    t_hi: u64,
    parity: Option<u64>,
    subranges: usize,
) -> Result<CheckReport> {
    if t_lo == 0 || t_hi <= t_lo || subranges == 0 {
        return Err(Error::input(
            "need 1 <= t_lo < t_hi and at least one subrange",
        ));
    }
    let half_d = graph.dim() as f64 / 2.0;
    let mut it = HeatKernelIter::new(graph, x, Restriction::Unkilled, WalkKind::Blind)?;
    let mut values: Vec<(u64, f64)> = Vec::new();
    let mut rises = 0u64;
    let mut prev_sup = f64::INFINITY;
    while it.time() < t_hi {
        it.advance();
        let t = it.time();
        if t < t_lo || parity.is_some_and(|p| t % 2 != p % 2) {
            continue;
        }
        let sup = it.distribution().iter().copied().fold(0.0, f64::max);
        if sup > prev_sup {
            rises += 1;
        }
        prev_sup = sup;
        values.push((t, (t as f64).powf(half_d) * sup));
    }
    if values.is_empty() {
        return Err(Error::input("no time in range has the requested parity"));
    }
    let c2 = values.iter().map(|&(_, v)| v).fold(0.0, f64::max);
    let ratio = (t_hi as f64 / t_lo as f64).powf(1.0 / subranges as f64);
    let mut subs = Vec::with_capacity(subranges);
    for k in 0..subranges {
        let lo = t_lo as f64 * ratio.powi(k as i32);
        let hi = t_lo as f64 * ratio.powi(k as i32 + 1);
        let last = k + 1 == subranges;
        let m = values
            .iter()
            .filter(|&&(t, _)| (t as f64) >= lo && ((t as f64) < hi || last))
            .map(|&(_, v)| v)
            .fold(f64::NAN, f64::max);
        subs.push(m);
    }
    let mut rep = CheckReport::new("heat_kernel_decay")
        .param("graph_hash", graph.content_hash())
        .param("x", graph.coord(x))
        .param("t_range", [t_lo, t_hi])
        .param("parity", parity)
        .param("subranges", subranges);
    rep.samples = values.len() as u64;
    rep.measure("c2", c2, "max_t t^(d/2) sup_y P_x(X_t = y)");
    for (k, &m) in subs.iter().enumerate() {
        rep.measure(
            &format!("c2_sub{k}"),
            m,
            "same maximum over geometric subrange k",
        );
    }
    rep.measure(
        "sup_rises",
        rises as f64,
        "count of t where sup_y P_x(X_t = y) increased",
    );
    let finite: Vec<f64> = subs.iter().copied().filter(|m| !m.is_nan()).collect();
    let spread = finite
        .iter()
        .map(|&m| (m - c2).abs() / c2)
        .fold(0.0, f64::max);
    rep.measure("spread", spread, "max_k |c2_subk - c2| / c2");
    let growth = match finite.split_last() {
        Some((&last, earlier)) if !earlier.is_empty() => {
            last / earlier.iter().copied().fold(0.0, f64::max) - 1.0
        }
        _ => 0.0,
    };
    rep.measure(
        "endpoint_growth",
        growth,
        "c2 of the last subrange / max over earlier subranges - 1",
    );
    let pass = c2.is_finite() && growth <= ENDPOINT_GROWTH_TOL;
    Ok(rep.verdict(pass, ENDPOINT_GROWTH_TOL - growth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{percolation_cluster, ClusterPolicy};

    #[test]
    fn escape_at_radius_one_is_certain() {
        let g = percolation_cluster(2, 0.8, 12, 1, ClusterPolicy::default()).unwrap();
        let rep =
            check_escape_conductance(&g, g.origin(), 1, 100, &StreamFamily::new(0, "escape", 0))
                .unwrap();
        assert!((rep.get("escape_exact").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rep.get("escape_hat"), Some(1.0));
    }

    #[test]
    fn cv_zero_before_distance() {
        let g = ClusterGraph::full_lattice(2, 12).unwrap();
        let y = g.vertex_at(&[3, 3]).unwrap();
        let rep = check_carne_varopoulos(&g, g.origin(), y, 1, 5).unwrap();
        assert_eq!(rep.get("max_ratio"), Some(0.0));
        assert!(rep.pass);
    }

    #[test]
    fn heat_decay_on_full_lattice() {
        let g = ClusterGraph::full_lattice(2, 31).unwrap();
        let rep = check_heat_kernel_decay(&g, g.origin(), 10, 400, Some(0), 4).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.get("spread").unwrap() <= 0.2);
        // return probability of the simple walk is about 2/(pi t) at even t
        assert!((rep.get("c2").unwrap() - 2.0 / std::f64::consts::PI).abs() < 0.05);
    }
}
