//! Harnack and oscillation checks on finite families of harmonic functions.

use rand::Rng;
use serde::Serialize;

use super::report::{CheckReport, THEOREM_TOL};
use crate::exact::{DirichletSolver, Domain, SolverChoice};
use crate::lattice::{ball_vertices, ClusterGraph};
use crate::seeds::StreamFamily;
use crate::walk::check_ball_interior;
use crate::Result;

/// Which nonnegative harmonic functions a check is run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HarmonicFamily {
    /// Dirichlet solutions with i.i.d. uniform `[0, 1]` boundary data.
    pub random_data: usize,
    /// Probabilities of leaving through a random patch of the boundary.
    pub hitting_sets: usize,
    pub seed: u64,
}

impl Default for HarmonicFamily {
    fn default() -> Self {
        Self {
            random_data: 16,
            hitting_sets: 8,
            seed: 0,
        }
    }
}

/// Harmonic functions on `B_{4r}(x)`, as vertex-indexed vectors (NaN off
/// the ball and its outer boundary).
pub struct TestFunctions {
    pub functions: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

/// Build the test family on `B_{4r}(x)`.
pub fn harmonic_family(
    graph: &ClusterGraph,
    x: u32,
    r: f64,
    family: HarmonicFamily,
) -> Result<TestFunctions> {
    let center = graph.coord(x).to_vec();
    check_ball_interior(graph, &center, 4.0 * r)?;
    let interior = Domain::ball(graph, &center, 4.0 * r);
    let solver = DirichletSolver::new(graph, interior, SolverChoice::Auto)?;
    let boundary = solver.boundary();
    let mut functions = Vec::new();
    let mut labels = Vec::new();
    let mut extend = |data: Vec<f64>, label: String| -> Result<()> {
        let inner = solver.solve(&data)?;
        let mut h = data;
        for (&v, &val) in solver.interior().vertices().iter().zip(&inner) {
            h[v as usize] = val;
        }
        functions.push(h);
        labels.push(label);
        Ok(())
    };
    let streams = StreamFamily::new(family.seed, "harmonic-family", 0);
    for j in 0..family.random_data {
        let mut rng = streams.stream(j as u64);
        let mut data = vec![f64::NAN; graph.num_vertices()];
        for &b in &boundary {
            data[b as usize] = rng.random::<f64>();
        }
        extend(data, format!("uniform_data_{j}"))?;
    }
    for j in 0..family.hitting_sets {
        let mut rng = streams.stream((family.random_data + j) as u64);
        let anchor = graph
            .coord(boundary[rng.random_range(0..boundary.len())])
            .to_vec();
        let mut data = vec![f64::NAN; graph.num_vertices()];
        for &b in &boundary {
            let near = (graph.dist2_to(b, &anchor) as f64) < (2.0 * r) * (2.0 * r);
            data[b as usize] = if near { 1.0 } else { 0.0 };
        }
        extend(data, format!("hitting_patch_{j}"))?;
    }
    Ok(TestFunctions { functions, labels })
}

/// `sup / inf` of `h` over `B_r(x)`; `None` when `h` vanishes there.
/// A function equal to a positive constant gives exactly one.
pub fn harnack_ratio(graph: &ClusterGraph, x: u32, r: f64, h: &[f64]) -> Option<f64> {
    let ball = ball_vertices(graph, graph.coord(x), r);
    let (lo, hi) = min_max(ball.iter().map(|&v| h[v as usize]));
    if hi <= 0.0 {
        return None;
    }
    Some(if lo <= 0.0 { f64::INFINITY } else { hi / lo })
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Elliptic Harnack inequality on `B_r(x)` for the test family.
pub fn check_harnack(
    graph: &ClusterGraph,
    x: u32,
    r: f64,
    family: HarmonicFamily,
) -> Result<CheckReport> {
    let fam = harmonic_family(graph, x, r, family)?;
    let mut c_h: f64 = 1.0;
    let mut degenerate = 0usize;
    for h in &fam.functions {
        match harnack_ratio(graph, x, r, h) {
            Some(c) => c_h = c_h.max(c),
            None => degenerate += 1,
        }
    }
    let mut rep = CheckReport::new("harnack")
        .param("graph_hash", graph.content_hash())
        .param("x", graph.coord(x))
        .param("r", r)
        .param("family", family);
    rep.samples = fam.functions.len() as u64;
    rep.measure("c_H", c_h, "max_h sup_{B_r(x)} h / inf_{B_r(x)} h");
    rep.measure(
        "degenerate",
        degenerate as f64,
        "count of h vanishing on B_r(x)",
    );
    let pass = c_h.is_finite();
    Ok(rep.verdict(pass, if pass { 1.0 / c_h } else { -1.0 }))
}

/// Oscillation bound derived from the instance Harnack ratios of
/// `v = h - min_{B_2r} h` and `w = max_{B_2r} h - h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationInstance {
    pub osc_inner: f64,
    pub osc_outer: f64,
    /// `max` of the two instance ratios; infinite when either vanishes
    /// somewhere on `B_r` without vanishing identically.
    pub ratio: f64,
    /// `((c - 1)/(c + 1)) osc_outer + tol - osc_inner`
    pub slack: f64,
}

fn osc(graph: &ClusterGraph, x: u32, r: f64, h: &[f64]) -> (f64, f64) {
    min_max(
        ball_vertices(graph, graph.coord(x), r)
            .iter()
            .map(|&v| h[v as usize]),
    )
}

pub fn oscillation_instance(
    graph: &ClusterGraph,
    x: u32,
    r: f64,
    h: &[f64],
) -> OscillationInstance {
    let (m2, big_m2) = osc(graph, x, 2.0 * r, h);
    let (m1, big_m1) = osc(graph, x, r, h);
    // sup and inf over B_r of v and w, in closed form
    let ratio_of = |sup: f64, inf: f64| {
        if sup <= 0.0 {
            1.0
        } else if inf <= 0.0 {
            f64::INFINITY
        } else {
            sup / inf
        }
    };
    let c = ratio_of(big_m1 - m2, m1 - m2).max(ratio_of(big_m2 - m1, big_m2 - big_m1));
    let osc_inner = big_m1 - m1;
    let osc_outer = big_m2 - m2;
    let factor = if c.is_finite() {
        (c - 1.0) / (c + 1.0)
    } else {
        1.0
    };
    OscillationInstance {
        osc_inner,
        osc_outer,
        ratio: c,
        slack: factor * osc_outer + THEOREM_TOL - osc_inner,
    }
}

/// `osc_{B_r} h <= ((c-1)/(c+1)) osc_{B_2r} h` on every test function, with
/// `c` the instance Harnack ratio.
pub fn check_oscillation(
    graph: &ClusterGraph,
    x: u32,
    r: f64,
    family: HarmonicFamily,
) -> Result<CheckReport> {
    let fam = harmonic_family(graph, x, r, family)?;
    let inst: Vec<OscillationInstance> = fam
        .functions
        .iter()
        .map(|h| oscillation_instance(graph, x, r, h))
        .collect();
    let vacuous = inst.iter().filter(|i| !i.ratio.is_finite()).count();
    let failures = inst
        .iter()
        .filter(|i| i.ratio.is_finite() && i.slack < 0.0)
        .count();
    let min_slack = inst
        .iter()
        .filter(|i| i.ratio.is_finite())
        .map(|i| i.slack)
        .fold(f64::INFINITY, f64::min);
    let worst_contraction = inst
        .iter()
        .filter(|i| i.osc_outer > 0.0)
        .map(|i| i.osc_inner / i.osc_outer)
        .fold(0.0, f64::max);
    let mut rep = CheckReport::new("oscillation")
        .param("graph_hash", graph.content_hash())
        .param("x", graph.coord(x))
        .param("r", r)
        .param("family", family);
    rep.samples = inst.len() as u64;
    rep.measure("instances", inst.len() as f64, "test functions");
    rep.measure(
        "vacuous",
        vacuous as f64,
        "instances with infinite Harnack ratio",
    );
    rep.measure(
        "failures",
        failures as f64,
        "instances with osc_{B_r} > ((c-1)/(c+1)) osc_{B_2r} + 1e-9",
    );
    rep.measure(
        "min_slack",
        min_slack,
        "min ((c-1)/(c+1)) osc_{B_2r} + 1e-9 - osc_{B_r}",
    );
    rep.measure(
        "max_contraction",
        worst_contraction,
        "max osc_{B_r} h / osc_{B_2r} h",
    );
    Ok(rep.verdict(failures == 0, min_slack))
}

/// Oscillation decay along the radius chain `r, 2r, ..., 2^levels r` for
/// functions harmonic on `B_{2^(levels+1) r}(x)`.
///
/// Reports the worst one-level contraction at each level and the smallest
/// `2^k` with `osc_{B_r} <= alpha osc_{B_{2^k r}}` for every test function.
pub fn oscillation_chain(
    graph: &ClusterGraph,
    x: u32,
    r: f64,
    levels: u32,
    alpha: f64,
    family: HarmonicFamily,
) -> Result<CheckReport> {
    let top = r * 2f64.powi(levels as i32 - 1);
    let fam = harmonic_family(graph, x, top, family)?;
    let mut level_max = vec![0.0f64; levels as usize];
    let mut chain_needed = 0u32;
    for h in &fam.functions {
        let oscs: Vec<f64> = (0..=levels)
            .map(|k| {
                let (lo, hi) = osc(graph, x, r * 2f64.powi(k as i32), h);
                hi - lo
            })
            .collect();
        for k in 0..levels as usize {
            if oscs[k + 1] > 0.0 {
                level_max[k] = level_max[k].max(oscs[k] / oscs[k + 1]);
            }
        }
        let needed = (0..=levels).find(|&k| oscs[0] <= alpha * oscs[k as usize] + THEOREM_TOL);
        chain_needed = chain_needed.max(needed.unwrap_or(u32::MAX));
    }
    let mut rep = CheckReport::new("oscillation_chain")
        .param("graph_hash", graph.content_hash())
        .param("x", graph.coord(x))
        .param("r", r)
        .param("levels", levels)
        .param("alpha", alpha)
        .param("family", family);
    rep.samples = fam.functions.len() as u64;
    let mut product = 1.0;
    for (k, &f) in level_max.iter().enumerate() {
        product *= f;
        rep.measure(
            &format!("contraction_{k}"),
            f,
            &format!("max_h osc_(B_(2^{k} r)) h / osc_(B_(2^{} r)) h", k + 1),
        );
    }
    rep.measure(
        "contraction_product",
        product,
        "product of per-level worst contractions",
    );
    let m_alpha = if chain_needed == u32::MAX {
        f64::INFINITY
    } else {
        2f64.powi(chain_needed as i32)
    };
    rep.measure(
        "M_alpha",
        m_alpha,
        "min 2^k with osc_(B_r) h <= alpha osc_(B_(2^k r)) h for all h",
    );
    let monotone = level_max.iter().all(|&f| f <= 1.0 + THEOREM_TOL);
    Ok(rep.verdict(
        monotone,
        1.0 - level_max.iter().copied().fold(0.0, f64::max),
    ))
}
