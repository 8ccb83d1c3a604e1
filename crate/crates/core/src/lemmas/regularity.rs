//! Checks built on exact Green functions and exit times of `B_R`.

use serde::Serialize;

use super::report::{CheckReport, THEOREM_TOL};
use crate::exact::{Domain, GreenSolver, SolverChoice};
use crate::idla::annulus_vertices;
use crate::lattice::{ball_vertices, for_each_point, ClusterGraph};
use crate::seeds::StreamFamily;
use crate::walk::{check_ball_interior, estimate_exit_tail};
use crate::{Error, Result};

/// Largest `|f(x) - f(y)|` over pairs of `verts` with `|x - y| < dist`.
/// `f` is indexed by vertex.
pub fn max_pair_difference(graph: &ClusterGraph, verts: &[u32], f: &[f64], dist: f64) -> f64 {
    let d = graph.dim();
    let reach = dist.ceil() as i32;
    let mut member = vec![false; graph.num_vertices()];
    for &v in verts {
        member[v as usize] = true;
    }
    let lo = vec![-reach; d];
    let hi = vec![reach; d];
    let mut offsets = Vec::new();
    let d2max = dist * dist;
    for_each_point(&lo, &hi, |o| {
        let n2: i64 = o.iter().map(|&c| (c as i64) * (c as i64)).sum();
        if n2 > 0 && (n2 as f64) < d2max {
            offsets.push(o.to_vec());
        }
    });
    let mut best = 0.0f64;
    let mut y = vec![0i32; d];
    for &v in verts {
        let c = graph.coord(v);
        for o in &offsets {
            for i in 0..d {
                y[i] = c[i] + o[i];
            }
            if let Some(u) = graph.vertex_at(&y) {
                if member[u as usize] {
                    best = best.max((f[v as usize] - f[u as usize]).abs());
                }
            }
        }
    }
    best
}

fn vertex_vec(graph: &ClusterGraph, domain: &Domain, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; graph.num_vertices()];
    for (&v, &x) in domain.vertices().iter().zip(values) {
        out[v as usize] = x;
    }
    out
}

fn check_radii(epsilon: f64, delta: Option<f64>) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::input(format!(
            "epsilon must lie in (0, 1/2), got {epsilon}"
        )));
    }
    if let Some(delta) = delta {
        if !(delta >= 0.0) {
            return Err(Error::input(format!(
                "delta must be non-negative, got {delta}"
            )));
        }
    }
    Ok(())
}

fn ball_solver(graph: &ClusterGraph, radius: f64) -> Result<GreenSolver<'_>> {
    let origin = vec![0; graph.dim()];
    check_ball_interior(graph, &origin, radius)?;
    GreenSolver::new(
        graph,
        Domain::ball(graph, &origin, radius),
        SolverChoice::Auto,
    )
}

/// Green upper bound and local Lipschitz modulus of `G_{tau_R}(0, .)` on the
/// annulus `B_{(1-eps)R} \ B_{eps R}`.
pub fn check_green_regularity(
    graph: &ClusterGraph,
    radius: f64,
    epsilon: f64,
    delta: f64,
) -> Result<CheckReport> {
    check_radii(epsilon, Some(delta))?;
    let solver = ball_solver(graph, radius)?;
    let green = solver.green(graph.origin())?;
    let g = vertex_vec(graph, solver.domain(), &green.values);
    let annulus = annulus_vertices(
        graph,
        &vec![0; graph.dim()],
        epsilon * radius,
        (1.0 - epsilon) * radius,
    );
    if annulus.is_empty() {
        return Err(Error::input("the annulus contains no vertices"));
    }
    let scale = radius.powi(graph.dim() as i32 - 2);
    let c_g = scale * annulus.iter().map(|&v| g[v as usize]).fold(0.0, f64::max);
    let modulus = scale * max_pair_difference(graph, &annulus, &g, delta * radius);
    let mut rep = CheckReport::new("green_regularity")
        .param("graph_hash", graph.content_hash())
        .param("R", radius)
        .param("epsilon", epsilon)
        .param("delta", delta);
    rep.samples = annulus.len() as u64;
    rep.measure("c_G", c_g, "R^(d-2) max_{annulus} G_{tau_R}(0,x)");
    rep.measure(
        "modulus",
        modulus,
        "R^(d-2) max_{x,y in annulus, |x-y|<delta R} |G(0,x) - G(0,y)|",
    );
    let pass = c_g.is_finite() && modulus.is_finite();
    Ok(rep.verdict(pass, if pass { 1.0 } else { -1.0 }))
}

/// Uniform exit-time bound `c_E` and local modulus of `E_x[tau_R]` on
/// `B_{(1-eps)R}`.
pub fn check_exit_regularity(
    graph: &ClusterGraph,
    radius: f64,
    epsilon: f64,
    delta: f64,
) -> Result<CheckReport> {
    check_radii(epsilon, Some(delta))?;
    let solver = ball_solver(graph, radius)?;
    let exit = solver.exit_time()?;
    let u = vertex_vec(graph, solver.domain(), &exit.values);
    let inner = ball_vertices(graph, &vec![0; graph.dim()], (1.0 - epsilon) * radius);
    let r2 = radius * radius;
    let c_e = exit.max() / r2;
    let modulus = max_pair_difference(graph, &inner, &u, delta * radius) / r2;
    let mut rep = CheckReport::new("exit_regularity")
        .param("graph_hash", graph.content_hash())
        .param("R", radius)
        .param("epsilon", epsilon)
        .param("delta", delta);
    rep.samples = inner.len() as u64;
    rep.measure("c_E", c_e, "max_{x in B_R} E_x[tau_R] / R^2");
    rep.measure(
        "modulus",
        modulus,
        "max_{x,y in B_(1-eps)R, |x-y|<delta R} |E_x[tau_R] - E_y[tau_R]| / R^2",
    );
    let pass = c_e.is_finite() && modulus.is_finite();
    Ok(rep.verdict(pass, if pass { 1.0 } else { -1.0 }))
}

/// `eta = min_x |B_R| G_{tau_R}(0,x) / E_x[tau_R] - 1` over the annulus.
pub fn domination_margin(
    graph: &ClusterGraph,
    solver: &GreenSolver<'_>,
    green: &[f64],
    exit: &[f64],
    inner: f64,
    outer: f64,
) -> Option<f64> {
    let n_ball = solver.domain().len() as f64;
    let annulus = annulus_vertices(graph, &vec![0; graph.dim()], inner, outer);
    annulus
        .iter()
        .map(|&v| {
            let p = solver.domain().position(v).unwrap();
            n_ball * green[p] / exit[p] - 1.0
        })
        .reduce(f64::min)
}

/// Pointwise domination `|B_R| G_{tau_R}(0,x) > (1 + eta) E_x[tau_R]` on the
/// annulus, with `eta` measured. A nested annulus is measured alongside.
pub fn check_domination(graph: &ClusterGraph, radius: f64, epsilon: f64) -> Result<CheckReport> {
    check_radii(epsilon, None)?;
    let solver = ball_solver(graph, radius)?;
    let green = solver.green(graph.origin())?.values;
    let exit = solver.exit_time()?.values;
    let eta = domination_margin(
        graph,
        &solver,
        &green,
        &exit,
        epsilon * radius,
        (1.0 - epsilon) * radius,
    )
    .ok_or_else(|| Error::input("the annulus contains no vertices"))?;
    let nested_eps = epsilon + (0.5 - epsilon) / 2.0;
    let eta_nested = domination_margin(
        graph,
        &solver,
        &green,
        &exit,
        nested_eps * radius,
        (1.0 - nested_eps) * radius,
    );
    let mut rep = CheckReport::new("domination")
        .param("graph_hash", graph.content_hash())
        .param("R", radius)
        .param("epsilon", epsilon)
        .param("nested_epsilon", nested_eps);
    rep.samples = solver.domain().len() as u64;
    rep.measure("ball_size", solver.domain().len() as f64, "|B_R|");
    rep.measure(
        "eta",
        eta,
        "min_{annulus} |B_R| G_{tau_R}(0,x) / E_x[tau_R] - 1",
    );
    let nested_ok = match eta_nested {
        Some(e) => {
            rep.measure("eta_nested", e, "same minimum over the nested annulus");
            e >= eta - THEOREM_TOL
        }
        None => {
            rep.note("nested annulus is empty");
            true
        }
    };
    Ok(rep.verdict(eta > 0.0 && nested_ok, eta))
}

/// `E_x[tau_Z] > k G_Z(x,x)^2 / log G_Z(x,x)` with `Z` the complement of
/// `domain`; `k` is measured.
pub fn check_excursion_lemma(graph: &ClusterGraph, x: u32, domain: &Domain) -> Result<CheckReport> {
    if !domain.contains(x) || graph.neighbors(x).any(|y| !domain.contains(y)) {
        return Err(Error::input("x and all its neighbours must lie outside Z"));
    }
    let solver = GreenSolver::new(graph, domain.clone(), SolverChoice::Auto)?;
    let g = solver.green(x)?.value_at(x).unwrap();
    let e = solver.exit_time()?.value_at(x).unwrap();
    let mut rep = CheckReport::new("excursion")
        .param("graph_hash", graph.content_hash())
        .param("x", graph.coord(x))
        .param("domain_size", domain.len());
    rep.samples = 1;
    rep.measure("E_tau_Z", e, "E_x[tau_Z]");
    rep.measure("G_Z", g, "G_Z(x,x)");
    if g <= 1.0 {
        rep.note("G_Z <= 1: log is not positive, instance excluded");
        rep.measure("k", f64::NAN, "E_x[tau_Z] log G_Z / G_Z^2");
        return Ok(rep.verdict(true, 0.0));
    }
    let k = e * g.ln() / (g * g);
    rep.measure("k", k, "E_x[tau_Z] log G_Z / G_Z^2");
    Ok(rep.verdict(k > 0.0, k))
}

/// Monte Carlo input for [`check_truncation`].
#[derive(Debug, Clone, Copy)]
pub struct TailSampling<'a> {
    pub n_walks: u64,
    pub streams: &'a StreamFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationRow {
    pub t: f64,
    pub steps: u64,
    /// `max_x (E_x[tau_R] - E_x[tau_R ^ T R^2]) / R^2`
    pub max_gap: f64,
    /// `min_x (c_E R^2 P_x(tau_R > T R^2) - gap(x))`
    pub exact_slack: f64,
    pub gap_at_origin: f64,
    pub tail_at_origin: f64,
}

/// `E_x[tau_R] - E_x[tau_R ^ T R^2] <= c_E R^2 P_x(tau_R > T R^2)` for every
/// `x` and `T`, with the truncated means and survival probabilities computed
/// by iterating the killed kernel. With sampling, the origin's gap is also
/// compared against `c_E (P-hat + 3 sigma)`, with `sigma` computed from
/// `max(P-hat, 1/n)`.
pub fn check_truncation(
    graph: &ClusterGraph,
    radius: f64,
    t_values: &[f64],
    sampling: Option<TailSampling<'_>>,
) -> Result<CheckReport> {
    if t_values.is_empty() || t_values.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::input("T values must be positive"));
    }
    let mut ts = t_values.to_vec();
    ts.sort_by(f64::total_cmp);
    let solver = ball_solver(graph, radius)?;
    let u = solver.exit_time()?.values;
    let kernel = solver.kernel();
    let r2 = radius * radius;
    let u_max = u.iter().copied().fold(0.0, f64::max);
    let c_e = u_max / r2;
    let tol = THEOREM_TOL * u_max;
    let origin = solver.domain().position(graph.origin()).unwrap();

    let steps: Vec<u64> = ts.iter().map(|&t| (t * r2).floor() as u64).collect();
    let mut survival = vec![1.0; u.len()];
    let mut partial = vec![0.0; u.len()];
    let mut t = 0u64;
    let mut rows = Vec::new();
    for (&tv, &n) in ts.iter().zip(&steps) {
        while t < n {
            for (p, s) in partial.iter_mut().zip(&survival) {
                *p += s;
            }
            survival = kernel.apply(&survival);
            t += 1;
        }
        let gaps: Vec<f64> = u.iter().zip(&partial).map(|(a, b)| a - b).collect();
        let max_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max) / r2;
        let exact_slack = gaps
            .iter()
            .zip(&survival)
            .map(|(g, s)| u_max * s - g + tol)
            .fold(f64::INFINITY, f64::min);
        rows.push(TruncationRow {
            t: tv,
            steps: n,
            max_gap,
            exact_slack,
            gap_at_origin: gaps[origin] / r2,
            tail_at_origin: survival[origin],
        });
    }

    let mut rep = CheckReport::new("truncation")
        .param("graph_hash", graph.content_hash())
        .param("R", radius)
        .param("T", &ts);
    rep.samples = sampling.map_or(0, |s| s.n_walks);
    rep.measure("c_E", c_e, "max_x E_x[tau_R] / R^2");
    let monotone = rows
        .windows(2)
        .all(|w| w[1].max_gap <= w[0].max_gap + tol / r2);
    let mut margin = rows
        .iter()
        .map(|r| r.exact_slack)
        .fold(f64::INFINITY, f64::min);
    for r in &rows {
        rep.measure(
            &format!("gap_T{}", r.t),
            r.max_gap,
            "max_x (E_x[tau_R] - E_x[tau_R ^ T R^2]) / R^2",
        );
        rep.measure(
            &format!("tail_T{}", r.t),
            r.tail_at_origin,
            "P_0(tau_R > T R^2), exact",
        );
    }
    let mut mc_ok = true;
    if let Some(s) = sampling {
        let tails = estimate_exit_tail(graph, graph.origin(), radius, &ts, s.n_walks, s.streams)?;
        for (r, tail) in rows.iter().zip(&tails) {
            // plug-in Bernoulli error with the success rate floored at 1/n, so
            // that a zero count still carries an error bar
            let n = tail.estimate.n as f64;
            let p = tail.estimate.mean.max(1.0 / n);
            let sigma = (p * (1.0 - p) / n).sqrt();
            let bound = c_e * (tail.estimate.mean + 3.0 * sigma) + tol / r2;
            rep.measure(
                &format!("tail_hat_T{}", r.t),
                tail.estimate.mean,
                "empirical P_0(tau_R > T R^2)",
            );
            mc_ok &= r.gap_at_origin <= bound;
            margin = margin.min((bound - r.gap_at_origin) * r2);
        }
    }
    let exact_ok = rows.iter().all(|r| r.exact_slack >= 0.0);
    Ok(rep.verdict(monotone && exact_ok && mc_ok, margin))
}
