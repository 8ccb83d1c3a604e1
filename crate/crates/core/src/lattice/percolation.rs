use std::collections::VecDeque;

use super::boxgeom::BoxGeometry;
use super::graph::{neighbours_in_box, ClusterGraph, GraphSource};
use crate::seeds::hashed_uniform;
use crate::{Error, Result};

/// Default number of reseeds tried when conditioning the origin cluster.
pub const DEFAULT_MAX_RETRIES: u32 = 64;

/// A sampled Bernoulli bond configuration on `[-M, M]^d`.
///
/// Edge `e` is open iff `U(seed, e) < p`, where `U` is a hash-derived
/// uniform. Configurations at different `p` with the same seed are therefore
/// monotonically coupled.
#[derive(Debug, Clone, PartialEq)]
pub struct PercolationConfig {
    d: usize,
    p: f64,
    half_width: i32,
    seed: u64,
    open_edges: Vec<u64>,
    edge_count: usize,
}

impl PercolationConfig {
    pub fn sample(d: usize, p: f64, half_width: i32, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::input(format!(
                "dimension must be at least 2, got {d}"
            )));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::input(format!("p must lie in (0, 1], got {p}")));
        }
        if half_width < 1 {
            return Err(Error::input(format!(
                "half_width must be at least 1, got {half_width}"
            )));
        }
        let geometry = BoxGeometry::new(d, half_width);
        let edge_count = geometry.edge_count();
        let mut open_edges = vec![0u64; edge_count.div_ceil(64)];
        for e in 0..edge_count {
            if hashed_uniform(seed, e as u64) < p {
                open_edges[e / 64] |= 1 << (e % 64);
            }
        }
        Ok(Self {
            d,
            p,
            half_width,
            seed,
            open_edges,
            edge_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn half_width(&self) -> i32 {
        self.half_width
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn geometry(&self) -> BoxGeometry {
        BoxGeometry::new(self.d, self.half_width)
    }

    /// Number of nearest-neighbour edges with both ends in the box.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn is_open(&self, edge: usize) -> bool {
        self.open_edges[edge / 64] >> (edge % 64) & 1 == 1
    }

    pub fn open_count(&self) -> usize {
        self.open_edges
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// Raw bit words, edge `e` at bit `e % 64` of word `e / 64`.
    pub fn bits(&self) -> &[u64] {
        &self.open_edges
    }
}

/// Free function form of [`PercolationConfig::sample`].
pub fn sample_percolation(
    d: usize,
    p: f64,
    half_width: i32,
    seed: u64,
) -> Result<PercolationConfig> {
    PercolationConfig::sample(d, p, half_width, seed)
}

/// How the origin is conditioned to lie in the (surrogate) infinite cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterPolicy {
    /// Fail unless the origin's cluster is the largest in the box.
    OriginClusterMustBeLargest,
    /// Reseed with `seed + k`, `k = 0..=max_retries`, until the origin's
    /// cluster is the largest.
    ResampleUntilOriginInLargest { max_retries: u32 },
}

impl Default for ClusterPolicy {
    fn default() -> Self {
        ClusterPolicy::ResampleUntilOriginInLargest {
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

/// Component sizes of the open subgraph and the label of every box vertex.
fn label_components(config: &PercolationConfig) -> (Vec<u32>, Vec<usize>) {
    let geometry = config.geometry();
    let mut labels = vec![u32::MAX; geometry.vertex_count()];
    let mut sizes = Vec::new();
    let mut c = vec![0i32; config.dim()];
    let mut queue = VecDeque::new();
    let open = |e: usize| config.is_open(e);
    for start in 0..geometry.vertex_count() {
        if labels[start] != u32::MAX {
            continue;
        }
        let label = sizes.len() as u32;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(b) = queue.pop_front() {
            size += 1;
            geometry.coord_into(b, &mut c);
            neighbours_in_box(&geometry, &mut c, &open, |nb| {
                if labels[nb] == u32::MAX {
                    labels[nb] = label;
                    queue.push_back(nb);
                }
            });
        }
        sizes.push(size);
    }
    (labels, sizes)
}

fn origin_cluster_if_largest(
    config: &PercolationConfig,
) -> std::result::Result<ClusterGraph, String> {
    let geometry = config.geometry();
    let (labels, sizes) = label_components(config);
    let origin_box = geometry.index(&vec![0; config.dim()]).unwrap();
    let origin_label = labels[origin_box] as usize;
    let origin_size = sizes[origin_label];
    if origin_size == 1 {
        return Err("origin is isolated".into());
    }
    let largest = sizes.iter().copied().max().unwrap_or(0);
    if origin_size < largest {
        return Err(format!(
            "origin cluster has {origin_size} vertices, largest has {largest}"
        ));
    }
    let members: Vec<bool> = labels.iter().map(|&l| l as usize == origin_label).collect();
    Ok(ClusterGraph::from_members(
        geometry,
        GraphSource::Percolation,
        config.p(),
        config.seed(),
        &members,
        |e| config.is_open(e),
    ))
}

/// Open cluster of the origin, conditioned according to `policy`.
///
/// Under the resampling policy the returned graph records the seed that
/// actually succeeded.
pub fn extract_cluster(config: &PercolationConfig, policy: ClusterPolicy) -> Result<ClusterGraph> {
    match policy {
        ClusterPolicy::OriginClusterMustBeLargest => {
            origin_cluster_if_largest(config).map_err(|reason| Error::ConditioningFailed {
                attempts: 1,
                reason,
            })
        }
        ClusterPolicy::ResampleUntilOriginInLargest { max_retries } => {
            let mut last = String::new();
            for k in 0..=max_retries {
                let attempt = if k == 0 {
                    config.clone()
                } else {
                    PercolationConfig::sample(
                        config.dim(),
                        config.p(),
                        config.half_width(),
                        config.seed().wrapping_add(k as u64),
                    )?
                };
                match origin_cluster_if_largest(&attempt) {
                    Ok(g) => return Ok(g),
                    Err(reason) => last = reason,
                }
            }
            Err(Error::ConditioningFailed {
                attempts: max_retries + 1,
                reason: last,
            })
        }
    }
}

/// Sample and condition in one go.
pub fn percolation_cluster(
    d: usize,
    p: f64,
    half_width: i32,
    seed: u64,
    policy: ClusterPolicy,
) -> Result<ClusterGraph> {
    extract_cluster(&PercolationConfig::sample(d, p, half_width, seed)?, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_one_opens_everything() {
        let c = PercolationConfig::sample(2, 1.0, 3, 7).unwrap();
        assert_eq!(c.edge_count(), 2 * 6 * 7);
        assert_eq!(c.open_count(), c.edge_count());
    }

    #[test]
    fn tiny_p_opens_nothing_here() {
        let c = PercolationConfig::sample(2, 1e-9, 2, 0).unwrap();
        assert_eq!(c.open_count(), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(PercolationConfig::sample(2, 0.0, 3, 0).is_err());
        assert!(PercolationConfig::sample(2, 1.5, 3, 0).is_err());
        assert!(PercolationConfig::sample(2, f64::NAN, 3, 0).is_err());
        assert!(PercolationConfig::sample(1, 0.5, 3, 0).is_err());
        assert!(PercolationConfig::sample(2, 0.5, 0, 0).is_err());
    }

    #[test]
    fn open_fraction_matches_binomial() {
        let c = PercolationConfig::sample(2, 0.7, 64, 1).unwrap();
        let n = c.edge_count() as f64;
        let sigma = (n * 0.7 * 0.3).sqrt();
        let dev = (c.open_count() as f64 - 0.7 * n).abs();
        assert!(dev < 3.0 * sigma, "deviation {dev} vs sigma {sigma}");
    }

    #[test]
    fn deterministic_given_inputs() {
        let a = PercolationConfig::sample(3, 0.4, 5, 11).unwrap();
        let b = PercolationConfig::sample(3, 0.4, 5, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monotone_coupling_in_p() {
        let lo = PercolationConfig::sample(2, 0.55, 20, 3).unwrap();
        let hi = PercolationConfig::sample(2, 0.8, 20, 3).unwrap();
        for (a, b) in lo.bits().iter().zip(hi.bits()) {
            assert_eq!(a & !b, 0);
        }
    }

    #[test]
    fn p_one_cluster_is_the_box() {
        let g = percolation_cluster(2, 1.0, 5, 0, ClusterPolicy::default()).unwrap();
        assert_eq!(g.num_vertices(), 121);
    }

    #[test]
    fn supercritical_cluster_is_large() {
        let g = percolation_cluster(2, 0.7, 64, 1, ClusterPolicy::default()).unwrap();
        let box_vertices = 129 * 129;
        assert!(g.num_vertices() * 2 >= box_vertices);
        assert_eq!(g.coord(g.origin()), &[0, 0]);
    }

    #[test]
    fn subcritical_conditioning_fails() {
        let err = percolation_cluster(2, 0.3, 64, 5, ClusterPolicy::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::ConditioningFailed { attempts: 65, .. }
        ));
    }

    #[test]
    fn strict_policy_reports_isolated_origin() {
        let c = PercolationConfig::sample(2, 1e-9, 4, 0).unwrap();
        let err = extract_cluster(&c, ClusterPolicy::OriginClusterMustBeLargest).unwrap_err();
        assert!(matches!(err, Error::ConditioningFailed { attempts: 1, .. }));
    }
}
