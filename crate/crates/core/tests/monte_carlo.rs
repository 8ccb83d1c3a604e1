use idla_core::exact::{exact_exit_time, exact_green, exact_hit_prob, Domain};
use idla_core::idla::{ml_statistics, run_idla};
use idla_core::lattice::{percolation_cluster, safe_half_width, ClusterPolicy};
use idla_core::walk::{
    default_step_cap, estimate_exit_time, estimate_green, estimate_hit_before_exit, Tally,
};
use idla_core::{ClusterGraph, StreamFamily};

fn cluster(r: f64, seed: u64) -> ClusterGraph {
    percolation_cluster(2, 0.8, safe_half_width(r), seed, ClusterPolicy::default()).unwrap()
}

#[test]
fn exit_time_and_green_agree_with_exact_on_cluster() {
    let r = 16.0;
    let g = cluster(r, 11);
    let domain = Domain::ball(&g, &[0, 0], r);
    let exit = exact_exit_time(&g, &domain).unwrap();
    let est = estimate_exit_time(
        &g,
        g.origin(),
        r,
        20_000,
        &StreamFamily::new(4, "test/exit", 0),
    )
    .unwrap();
    let want = exit.value_at(g.origin()).unwrap();
    assert!(est.within(want, 4.0), "{est:?} vs {want}");

    let green = exact_green(&g, &domain, g.origin()).unwrap();
    let mc = estimate_green(
        &g,
        g.origin(),
        r,
        20_000,
        &StreamFamily::new(4, "test/green", 0),
    )
    .unwrap();
    let e0 = mc.table.value_at(g.origin()).unwrap();
    let se0 = mc.table.stderr.as_ref().unwrap()[mc.table.domain.position(g.origin()).unwrap()];
    let want0 = green.value_at(g.origin()).unwrap();
    assert!((e0 - want0).abs() <= 4.0 * se0, "{e0} +- {se0} vs {want0}");
}

#[test]
fn hit_probability_agrees_with_exact_on_cluster() {
    let r = 16.0;
    let g = cluster(r, 12);
    let domain = Domain::ball(&g, &[0, 0], r);
    let z = *domain
        .vertices()
        .iter()
        .find(|&&v| g.norm(v) > 5.0)
        .unwrap();
    let hit = exact_hit_prob(&g, &domain, z).unwrap();
    let est = estimate_hit_before_exit(
        &g,
        g.origin(),
        z,
        r,
        20_000,
        &StreamFamily::new(5, "test/hit", 0),
    )
    .unwrap();
    let want = hit.value_at(g.origin()).unwrap();
    assert!(est.within(want, 4.0), "{est:?} vs {want}");
}

#[test]
fn m_and_l_hat_means_match_hitting_sums() {
    let r = 6.0;
    // the aggregate of |B_R| particles can stray well past R on a cluster
    let g = cluster(2.0 * r, 13);
    let domain = Domain::ball(&g, &[0, 0], r);
    let z = *domain
        .vertices()
        .iter()
        .find(|&&v| (g.norm(v) - 3.0).abs() < 0.5)
        .unwrap();
    let hit = exact_hit_prob(&g, &domain, z).unwrap();
    let n = domain.len() as f64;
    let want_m = n * hit.value_at(g.origin()).unwrap();
    let want_lhat = hit.total();
    let (mut m, mut l, mut lhat) = (Tally::default(), Tally::default(), Tally::default());
    for k in 0..400 {
        let s = ml_statistics(
            &g,
            z,
            r,
            &StreamFamily::new(6, "test/ml/idla", k),
            &StreamFamily::new(6, "test/ml/lhat", k),
        )
        .unwrap();
        m.push(s.m);
        l.push(s.l);
        lhat.push(s.l_hat);
        assert!(s.l <= s.m);
    }
    let (m, l, lhat) = (m.estimate(), l.estimate(), lhat.estimate());
    assert!(m.within(want_m, 4.0), "{m:?} vs {want_m}");
    assert!(lhat.within(want_lhat, 4.0), "{lhat:?} vs {want_lhat}");
    assert!(l.mean <= lhat.mean + 4.0 * (l.stderr + lhat.stderr));
}

#[test]
fn second_particle_settles_uniformly_among_neighbours() {
    let g = ClusterGraph::full_lattice(2, 6).unwrap();
    let cap = default_step_cap(&g);
    let mut counts = [0u64; 4];
    let runs = 4000;
    for k in 0..runs {
        let agg = run_idla(&g, 2, &StreamFamily::new(7, "test/two", k), cap).unwrap();
        let c = g.coord(agg.order()[1]);
        let slot = match (c[0], c[1]) {
            (1, 0) => 0,
            (-1, 0) => 1,
            (0, 1) => 2,
            (0, -1) => 3,
            other => panic!("settled at {other:?}"),
        };
        counts[slot] += 1;
    }
    let expected = runs as f64 / 4.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 99.9% quantile of chi-square with 3 degrees of freedom
    assert!(chi2 < 16.27, "chi2 = {chi2}, counts {counts:?}");
}
