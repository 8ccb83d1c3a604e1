//! Blind and simple random walks with stopping rules, and Monte Carlo
//! estimators built on them.
//!
//! The blind walk picks one of the `2d` lattice directions uniformly and
//! stays put when that edge is closed, so its kernel is symmetric. The simple
//! walk moves to a uniform neighbour.

mod estimate;
mod mc;

use rand::Rng;
use serde::Serialize;

use crate::lattice::{ClusterGraph, NONE};

pub use estimate::{Estimate, Tally};
pub(crate) use mc::check_ball_interior;
pub use mc::{
    default_step_cap, estimate_exit_tail, estimate_exit_time, estimate_green,
    estimate_hit_before_exit, scaled_endpoint_sample, EndpointCovariance, GreenEstimate, TailPoint,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkKind {
    Blind,
    Simple,
}

/// One blind step: each neighbour with probability `1/2d`, otherwise stay.
#[inline]
pub fn step_blind<R: Rng + ?Sized>(graph: &ClusterGraph, v: u32, rng: &mut R) -> u32 {
    let two_d = 2 * graph.dim();
    let k = rng.random_range(0..two_d);
    let u = graph.direction_table()[v as usize * two_d + k];
    if u == NONE {
        v
    } else {
        u
    }
}

/// One simple-walk step: a uniform neighbour. Isolated vertices stay.
#[inline]
pub fn step_simple<R: Rng + ?Sized>(graph: &ClusterGraph, v: u32, rng: &mut R) -> u32 {
    let dirs = graph.directions(v);
    let deg = dirs.iter().filter(|&&u| u != NONE).count();
    if deg == 0 {
        return v;
    }
    let pick = rng.random_range(0..deg);
    dirs.iter()
        .copied()
        .filter(|&u| u != NONE)
        .nth(pick)
        .unwrap()
}

#[inline]
pub fn step<R: Rng + ?Sized>(graph: &ClusterGraph, kind: WalkKind, v: u32, rng: &mut R) -> u32 {
    match kind {
        WalkKind::Blind => step_blind(graph, v, rng),
        WalkKind::Simple => step_simple(graph, v, rng),
    }
}

/// Primary stopping rule. Masks are indexed by vertex.
#[derive(Debug, Clone, Copy)]
pub enum StopRule<'a> {
    /// Stop at the first `t >= 0` with `X_t` outside the region.
    ExitRegion(&'a [bool]),
    /// Stop at the first `t >= 0` with `X_t` in the target.
    HitTarget(&'a [bool]),
    /// Run until the time cap.
    CapOnly,
}

#[derive(Debug, Clone, Copy)]
pub struct WalkSpec<'a> {
    pub kind: WalkKind,
    pub start: u32,
    pub stop: StopRule<'a>,
    /// Safety cap on the number of steps; always present.
    pub cap: u64,
    /// When set, count visits to flagged vertices at times `0..steps`.
    pub observe: Option<&'a [bool]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ExitedRegion,
    HitTarget,
    TimeCap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkOutcome {
    pub stop_reason: StopReason,
    pub steps: u64,
    pub final_vertex: u32,
    /// `X_{steps - 1}`, absent when the walk stopped at time 0.
    pub previous: Option<u32>,
    /// Visits `(vertex, count)` to observed vertices, in first-visit order.
    pub occupation: Option<Vec<(u32, u64)>>,
}

#[inline]
fn stopped(rule: &StopRule<'_>, v: u32) -> Option<StopReason> {
    match rule {
        StopRule::ExitRegion(mask) if !mask[v as usize] => Some(StopReason::ExitedRegion),
        StopRule::HitTarget(mask) if mask[v as usize] => Some(StopReason::HitTarget),
        _ => None,
    }
}

/// Run one walk until its stopping rule fires or the cap is reached.
///
/// Blind-walk stays count as steps. Reaching the cap is reported through
/// [`StopReason::TimeCap`], never as an error.
pub fn run_walk<R: Rng + ?Sized>(
    graph: &ClusterGraph,
    spec: &WalkSpec<'_>,
    rng: &mut R,
) -> WalkOutcome {
    let mut v = spec.start;
    let mut previous = None;
    let mut t = 0u64;
    let mut occupation: Option<Vec<(u32, u64)>> = spec.observe.map(|_| Vec::new());
    let reason = loop {
        if let Some(r) = stopped(&spec.stop, v) {
            break r;
        }
        if t >= spec.cap {
            break StopReason::TimeCap;
        }
        if let (Some(mask), Some(occ)) = (spec.observe, occupation.as_mut()) {
            if mask[v as usize] {
                match occ.iter_mut().find(|(u, _)| *u == v) {
                    Some((_, c)) => *c += 1,
                    None => occ.push((v, 1)),
                }
            }
        }
        previous = Some(v);
        v = step(graph, spec.kind, v, rng);
        t += 1;
    };
    WalkOutcome {
        stop_reason: reason,
        steps: t,
        final_vertex: v,
        previous,
        occupation,
    }
}

/// Exit time of `mask` from `start` for the blind walk, capped. Hot path used
/// by the estimators; equivalent to [`run_walk`] with [`StopRule::ExitRegion`].
#[inline]
pub(crate) fn blind_exit_steps<R: Rng + ?Sized>(
    graph: &ClusterGraph,
    start: u32,
    mask: &[bool],
    cap: u64,
    rng: &mut R,
) -> (u64, u32) {
    let two_d = 2 * graph.dim();
    let dirs = graph.direction_table();
    let mut v = start;
    let mut t = 0u64;
    while mask[v as usize] && t < cap {
        let u = dirs[v as usize * two_d + rng.random_range(0..two_d)];
        if u != NONE {
            v = u;
        }
        t += 1;
    }
    (t, v)
}
