use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::blind_exit_steps;
use super::estimate::{estimate_from_sums, Estimate, Tally};
use crate::exact::{Domain, GreenTable, Quantity, TableKind};
use crate::lattice::{ball_mask, ClusterGraph, NONE};
use crate::seeds::StreamFamily;
use crate::{Error, Result};

/// `64 (2M)^2` steps per walk.
pub fn default_step_cap(graph: &ClusterGraph) -> u64 {
    let side = 2 * graph.half_width() as u64;
    64 * side * side
}

/// `B_r(center)` must not reach the outer face of the box.
pub(crate) fn check_ball_interior(graph: &ClusterGraph, center: &[i32], r: f64) -> Result<()> {
    let hw = graph.half_width() as f64;
    if center.iter().any(|&c| (c as f64).abs() + r > hw) {
        return Err(Error::Range(format!(
            "ball of radius {r} about {center:?} is not inside the box of half-width {hw}"
        )));
    }
    Ok(())
}

fn check_vertex(graph: &ClusterGraph, v: u32) -> Result<()> {
    if (v as usize) < graph.num_vertices() {
        Ok(())
    } else {
        Err(Error::input(format!("vertex {v} is not in the graph")))
    }
}

/// Monte Carlo estimate of `E_x[tau_r(x)]` for the blind walk.
///
/// Walk `i` draws from `streams.stream(i)`. Walks that hit the default step
/// cap contribute the cap.
pub fn estimate_exit_time(
    graph: &ClusterGraph,
    x: u32,
    r: f64,
    n_walks: u64,
    streams: &StreamFamily,
) -> Result<Estimate> {
    check_vertex(graph, x)?;
    if n_walks == 0 {
        return Err(Error::input("n_walks must be at least 1"));
    }
    let center = graph.coord(x).to_vec();
    check_ball_interior(graph, &center, r)?;
    let mask = ball_mask(graph, &center, r);
    let cap = default_step_cap(graph);
    let tally = (0..n_walks)
        .into_par_iter()
        .fold(Tally::default, |mut t, i| {
            let mut rng = streams.stream(i);
            t.push(blind_exit_steps(graph, x, &mask, cap, &mut rng).0);
            t
        })
        .reduce(Tally::default, Tally::merge);
    Ok(tally.estimate())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub l: f64,
    /// `floor(L r^2)`
    pub threshold: u64,
    /// Estimate of `P_x(tau_r(x) > L r^2)`.
    pub estimate: Estimate,
}

/// Empirical tails `P_x(tau_r(x) > L r^2)` for each `L`.
pub fn estimate_exit_tail(
    graph: &ClusterGraph,
    x: u32,
    r: f64,
    l_values: &[f64],
    n_walks: u64,
    streams: &StreamFamily,
) -> Result<Vec<TailPoint>> {
    check_vertex(graph, x)?;
    if n_walks == 0 {
        return Err(Error::input("n_walks must be at least 1"));
    }
    if l_values.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::input("tail parameters must be non-negative"));
    }
    let center = graph.coord(x).to_vec();
    check_ball_interior(graph, &center, r)?;
    let mask = ball_mask(graph, &center, r);
    let thresholds: Vec<u64> = l_values
        .iter()
        .map(|&l| (l * r * r).floor() as u64)
        .collect();
    let max_threshold = thresholds.iter().copied().max().unwrap_or(0);
    let cap = default_step_cap(graph).max(max_threshold + 1);
    let counts = (0..n_walks)
        .into_par_iter()
        .fold(
            || vec![0u64; thresholds.len()],
            |mut acc, i| {
                let mut rng = streams.stream(i);
                let (steps, _) = blind_exit_steps(graph, x, &mask, cap, &mut rng);
                for (c, &th) in acc.iter_mut().zip(&thresholds) {
                    if steps > th {
                        *c += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; thresholds.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        );
    Ok(l_values
        .iter()
        .zip(&thresholds)
        .zip(counts)
        .map(|((&l, &threshold), k)| TailPoint {
            l,
            threshold,
            estimate: estimate_from_sums(n_walks, k as u128, k as u128),
        })
        .collect())
}

/// Bernoulli estimate of `P_x(tau_z < tau_R)` with `B_R` about the origin.
pub fn estimate_hit_before_exit(
    graph: &ClusterGraph,
    x: u32,
    z: u32,
    radius: f64,
    n_walks: u64,
    streams: &StreamFamily,
) -> Result<Estimate> {
    check_vertex(graph, x)?;
    check_vertex(graph, z)?;
    if n_walks == 0 {
        return Err(Error::input("n_walks must be at least 1"));
    }
    let mask = ball_mask(graph, &vec![0; graph.dim()], radius);
    if !mask[z as usize] {
        return Err(Error::input("target lies outside B_R"));
    }
    if !mask[x as usize] {
        return Err(Error::input("start lies outside B_R"));
    }
    if x == z {
        return Ok(Estimate {
            mean: 1.0,
            stderr: 0.0,
            n: n_walks,
        });
    }
    let cap = default_step_cap(graph);
    let two_d = 2 * graph.dim();
    let dirs = graph.direction_table();
    let hits: u64 = (0..n_walks)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(i);
            let mut v = x;
            let mut t = 0u64;
            while mask[v as usize] && v != z && t < cap {
                let u = dirs[v as usize * two_d + rng.random_range(0..two_d)];
                if u != NONE {
                    v = u;
                }
                t += 1;
            }
            (v == z) as u64
        })
        .sum();
    Ok(estimate_from_sums(n_walks, hits as u128, hits as u128))
}

#[derive(Debug, Clone)]
pub struct GreenEstimate {
    /// Mean occupation counts with standard errors.
    pub table: GreenTable,
    /// Exit-time estimate from the same trajectories.
    pub exit_time: Estimate,
    /// Total visits over all walks and vertices; equals `step_total`.
    pub visit_total: u128,
    pub step_total: u128,
}

struct GreenAcc {
    sum: Vec<u64>,
    sum_sq: Vec<u128>,
    scratch: Vec<u64>,
    touched: Vec<u32>,
    tally: Tally,
}

impl GreenAcc {
    fn new(n: usize) -> Self {
        Self {
            sum: vec![0; n],
            sum_sq: vec![0; n],
            scratch: vec![0; n],
            touched: Vec::new(),
            tally: Tally::default(),
        }
    }

    fn merge(mut self, other: GreenAcc) -> GreenAcc {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.tally = self.tally.merge(other.tally);
        self
    }
}

/// Monte Carlo killed Green function `G_{tau_R}(source, .)` over `B_R`
/// about the origin. Every time index before exit counts as a visit,
/// including `t = 0` and blind-walk stays.
pub fn estimate_green(
    graph: &ClusterGraph,
    source: u32,
    radius: f64,
    n_walks: u64,
    streams: &StreamFamily,
) -> Result<GreenEstimate> {
    check_vertex(graph, source)?;
    if n_walks == 0 {
        return Err(Error::input("n_walks must be at least 1"));
    }
    let domain = Domain::ball(graph, &vec![0; graph.dim()], radius);
    let Some(_) = domain.position(source) else {
        return Err(Error::input("source lies outside B_R"));
    };
    let cap = default_step_cap(graph);
    let two_d = 2 * graph.dim();
    let dirs = graph.direction_table();
    let n = domain.len();
    let acc = (0..n_walks)
        .into_par_iter()
        .fold(
            || GreenAcc::new(n),
            |mut acc, i| {
                let mut rng = streams.stream(i);
                let mut v = source;
                let mut t = 0u64;
                while t < cap {
                    let Some(p) = domain.position(v) else { break };
                    if acc.scratch[p] == 0 {
                        acc.touched.push(p as u32);
                    }
                    acc.scratch[p] += 1;
                    let u = dirs[v as usize * two_d + rng.random_range(0..two_d)];
                    if u != NONE {
                        v = u;
                    }
                    t += 1;
                }
                acc.tally.push(t);
                for p in acc.touched.drain(..) {
                    let c = std::mem::take(&mut acc.scratch[p as usize]);
                    acc.sum[p as usize] += c;
                    acc.sum_sq[p as usize] += (c as u128) * (c as u128);
                }
                acc
            },
        )
        .reduce(|| GreenAcc::new(n), GreenAcc::merge);

    let (values, stderr): (Vec<f64>, Vec<f64>) = acc
        .sum
        .iter()
        .zip(&acc.sum_sq)
        .map(|(&s, &sq)| {
            let e = estimate_from_sums(n_walks, s as u128, sq);
            (e.mean, e.stderr)
        })
        .unzip();
    let visit_total = acc.sum.iter().map(|&s| s as u128).sum();
    Ok(GreenEstimate {
        table: GreenTable {
            quantity: Quantity::Green,
            kind: TableKind::MonteCarlo {
                n_walks: n_walks as usize,
            },
            source: Some(source),
            domain,
            values,
            stderr: Some(stderr),
        },
        exit_time: acc.tally.estimate(),
        visit_total,
        step_total: acc.tally.sum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointCovariance {
    pub steps: u64,
    pub n: u64,
    /// Sample covariance of `X_steps / R`, row-major `d x d`.
    pub covariance: Vec<Vec<f64>>,
    /// `max(max |off-diagonal|, max diag - min diag) / mean diag`.
    pub isotropy: f64,
}

/// Covariance of the scaled endpoint `X_{floor(T R^2)} / R` of blind walks
/// from the origin.
///
/// Fails with a range error if any walk reaches the outer face of the box.
pub fn scaled_endpoint_sample(
    graph: &ClusterGraph,
    t_scale: f64,
    radius: f64,
    n_walks: u64,
    streams: &StreamFamily,
) -> Result<EndpointCovariance> {
    if n_walks < 2 {
        return Err(Error::input("need at least two walks for a covariance"));
    }
    if !(t_scale > 0.0 && radius > 0.0) {
        return Err(Error::input("T and R must be positive"));
    }
    let steps = (t_scale * radius * radius).floor() as u64;
    if steps > default_step_cap(graph) {
        return Err(Error::input("T R^2 exceeds the step cap"));
    }
    let d = graph.dim();
    let origin = graph.origin();
    let endpoints: Vec<Option<u32>> = (0..n_walks)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.stream(i);
            let mut v = origin;
            for _ in 0..steps {
                v = super::step_blind(graph, v, &mut rng);
                if graph.on_box_face(v) {
                    return None;
                }
            }
            Some(v)
        })
        .collect();
    let mut sum = vec![0i128; d];
    let mut prod = vec![vec![0i128; d]; d];
    for e in &endpoints {
        let v = e.ok_or_else(|| {
            Error::Range(format!(
                "a walk reached the box face within {steps} steps; enlarge the box"
            ))
        })?;
        let c = graph.coord(v);
        for i in 0..d {
            sum[i] += c[i] as i128;
            for j in 0..d {
                prod[i][j] += (c[i] as i128) * (c[j] as i128);
            }
        }
    }
    let nf = n_walks as f64;
    let r2 = radius * radius;
    let covariance: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let centered = prod[i][j] as f64 - (sum[i] as f64) * (sum[j] as f64) / nf;
                    centered / (nf - 1.0) / r2
                })
                .collect()
        })
        .collect();
    let diag: Vec<f64> = (0..d).map(|i| covariance[i][i]).collect();
    let mean_diag = diag.iter().sum::<f64>() / d as f64;
    let spread = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - diag.iter().copied().fold(f64::INFINITY, f64::min);
    let off = (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| covariance[i][j].abs())
        .fold(0.0, f64::max);
    Ok(EndpointCovariance {
        steps,
        n: n_walks,
        covariance,
        isotropy: off.max(spread) / mean_diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{percolation_cluster, ClusterPolicy};

    fn plus() -> ClusterGraph {
        ClusterGraph::full_lattice(2, 6).unwrap()
    }

    #[test]
    fn plus_shape_exit_time() {
        let g = plus();
        let e = estimate_exit_time(
            &g,
            g.origin(),
            1.2,
            100_000,
            &StreamFamily::new(1, "exit", 0),
        )
        .unwrap();
        assert!(e.within(8.0 / 3.0, 4.0), "{e:?}");
    }

    #[test]
    fn tails_are_nonincreasing() {
        let g = plus();
        let tails = estimate_exit_tail(
            &g,
            g.origin(),
            4.0,
            &[0.0, 0.25, 0.5, 1.0, 2.0],
            20_000,
            &StreamFamily::new(2, "tail", 0),
        )
        .unwrap();
        assert_eq!(tails[0].estimate.mean, 1.0);
        for w in tails.windows(2) {
            assert!(w[1].estimate.mean <= w[0].estimate.mean);
        }
    }

    #[test]
    fn plus_shape_hit_probability() {
        let g = plus();
        let arm = g.vertex_at(&[1, 0]).unwrap();
        let e = estimate_hit_before_exit(
            &g,
            arm,
            g.origin(),
            1.2,
            100_000,
            &StreamFamily::new(3, "hit", 0),
        )
        .unwrap();
        assert!(e.within(0.25, 4.0), "{e:?}");
        let same = estimate_hit_before_exit(&g, arm, arm, 1.2, 10, &StreamFamily::new(3, "hit", 0))
            .unwrap();
        assert_eq!(same.mean, 1.0);
        let far = g.vertex_at(&[3, 0]).unwrap();
        assert!(
            estimate_hit_before_exit(&g, arm, far, 1.2, 10, &StreamFamily::new(3, "hit", 0))
                .is_err()
        );
    }

    #[test]
    fn plus_shape_green() {
        let g = plus();
        let est = estimate_green(
            &g,
            g.origin(),
            1.2,
            100_000,
            &StreamFamily::new(4, "green", 0),
        )
        .unwrap();
        let t = &est.table;
        let se = t.stderr.as_ref().unwrap();
        let o = t.domain.position(g.origin()).unwrap();
        assert!((t.values[o] - 4.0 / 3.0).abs() <= 4.0 * se[o]);
        for c in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
            let p = t.domain.position(g.vertex_at(&c).unwrap()).unwrap();
            assert!((t.values[p] - 1.0 / 3.0).abs() <= 4.0 * se[p]);
        }
        assert!(t.values.iter().all(|&v| v >= 0.0));
        assert!(t.values[o] >= 1.0);
        assert_eq!(est.visit_total, est.step_total);
        assert!((t.total() - est.exit_time.mean).abs() < 1e-9 * est.exit_time.mean);
    }

    #[test]
    fn estimators_are_reproducible() {
        let g = percolation_cluster(2, 0.8, 20, 3, ClusterPolicy::default()).unwrap();
        let fam = StreamFamily::new(11, "exit", 0);
        let a = estimate_exit_time(&g, g.origin(), 6.0, 500, &fam).unwrap();
        let b = estimate_exit_time(&g, g.origin(), 6.0, 500, &fam).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let c = pool.install(|| estimate_exit_time(&g, g.origin(), 6.0, 500, &fam).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn ball_must_be_interior() {
        let g = plus();
        let err =
            estimate_exit_time(&g, g.origin(), 6.5, 10, &StreamFamily::new(0, "x", 0)).unwrap_err();
        assert!(matches!(err, Error::Range(_)));
    }

    #[test]
    fn endpoint_covariance_is_symmetric_psd() {
        let g = ClusterGraph::full_lattice(2, 60).unwrap();
        let cov = scaled_endpoint_sample(&g, 1.0, 8.0, 4000, &StreamFamily::new(5, "endpoint", 0))
            .unwrap();
        let c = &cov.covariance;
        assert_eq!(c[0][1], c[1][0]);
        assert!(c[0][0] > 0.0 && c[1][1] > 0.0);
        assert!(c[0][0] * c[1][1] - c[0][1] * c[1][0] >= 0.0);
        // per-axis variance t/2 for the simple walk on Z^2, scaled by R^2
        assert!((c[0][0] - 0.5).abs() < 0.1);
    }

    #[test]
    fn endpoint_sample_detects_box_face() {
        let g = ClusterGraph::full_lattice(2, 5).unwrap();
        let err = scaled_endpoint_sample(&g, 1.0, 10.0, 100, &StreamFamily::new(5, "endpoint", 0))
            .unwrap_err();
        assert!(matches!(err, Error::Range(_)));
    }
}
