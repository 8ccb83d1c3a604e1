//! The experiments behind each subcommand.

use std::collections::VecDeque;
use std::time::Instant;

use idla_core::exact::{exact_hit_prob, Domain, GreenSolver, SolverChoice};
use idla_core::idla::{
    inner_radius, run_idla, sealed_ball_experiment, shape_experiment, write_aggregate, Aggregate,
    GraphParams, ShapeRow, ShapeSummary,
};
use idla_core::lattice::{
    ball_vertices, build_counterexample, chemical_ratio_scan, density_profile, percolation_cluster,
    write_graph, ClusterPolicy,
};
use idla_core::lemmas::{
    check_carne_varopoulos, check_domination, check_escape_conductance, check_excursion_lemma,
    check_exit_regularity, check_green_regularity, check_harnack, check_heat_kernel_decay,
    check_oscillation, check_truncation, write_ndjson, CheckReport, HarmonicFamily, TailSampling,
};
use idla_core::walk::{default_step_cap, estimate_green, estimate_hit_before_exit};
use idla_core::{seed_ledger, ClusterGraph, GraphSource, StreamFamily};
use rand::Rng;
use serde::Serialize;

use crate::config::{ExperimentKind, GraphSpec, Params, Resolved};
use crate::error::CliResult;
use crate::output::{RunManifest, RunWriter, SeedRecord, RESOLVED_CONFIG_FILE};
use crate::render::{render_svg, RenderStyle};

/// What an experiment reports back to the manifest.
#[derive(Debug, Default)]
struct Outcome {
    pass: bool,
    graph_hashes: Vec<String>,
    seeds: Vec<SeedRecord>,
}

impl Outcome {
    fn graph(&mut self, g: &ClusterGraph) {
        let h = g.content_hash();
        if !self.graph_hashes.contains(&h) {
            self.graph_hashes.push(h);
        }
    }
}

/// Run a resolved experiment into `writer`'s directory and write the
/// manifest. Returns the manifest.
pub fn execute(resolved: &Resolved, mut writer: RunWriter) -> CliResult<RunManifest> {
    let start = Instant::now();
    writer.write(RESOLVED_CONFIG_FILE, resolved.canonical_toml().as_bytes())?;
    let outcome = match resolved.kind {
        ExperimentKind::Percolate => percolate(resolved, &mut writer)?,
        ExperimentKind::Idla => idla(resolved, &mut writer)?,
        ExperimentKind::Shape => shape(resolved, &mut writer)?,
        ExperimentKind::Lemmas => lemmas(resolved, &mut writer)?,
        ExperimentKind::Oracle => oracle(resolved, &mut writer)?,
        ExperimentKind::Density => density(resolved, &mut writer)?,
    };
    let manifest = RunManifest {
        tool: "idla-lab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: resolved.kind.name().into(),
        config_hash: resolved.config_hash(),
        graph_hashes: outcome.graph_hashes,
        outputs: writer.files().to_vec(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        seed_ledger: outcome.seeds,
        pass: outcome.pass,
    };
    writer.finish(&manifest)?;
    Ok(manifest)
}

/// Seed of cluster `k`.
pub fn cluster_seed(resolved: &Resolved, k: u64) -> u64 {
    match resolved.graph {
        GraphSpec::Percolation { seed: Some(s), .. } => s.wrapping_add(k),
        _ => seed_ledger(resolved.master_seed, "cluster", k, 0),
    }
}

/// Graph `k` of the experiment, in a box of the resolved half-width.
pub fn build_graph(resolved: &Resolved, k: u64) -> CliResult<ClusterGraph> {
    let m = resolved.half_width();
    Ok(match resolved.graph {
        GraphSpec::Percolation { d, p, .. } => {
            percolation_cluster(d, p, m, cluster_seed(resolved, k), ClusterPolicy::default())?
        }
        GraphSpec::Full { d, .. } => ClusterGraph::full_lattice(d, m)?,
        GraphSpec::Counterexample { r0, scale_count } => {
            build_counterexample(r0, scale_count)?.graph
        }
    })
}

fn graph_count(resolved: &Resolved) -> u64 {
    match resolved.graph {
        GraphSpec::Percolation { clusters, .. } => clusters,
        _ => 1,
    }
}

fn indexed(stem: &str, ext: &str, k: u64, count: u64) -> String {
    if count == 1 {
        format!("{stem}.{ext}")
    } else {
        format!("{stem}-{k}.{ext}")
    }
}

fn ndjson(reports: &[CheckReport]) -> (Vec<u8>, bool) {
    let mut buf = Vec::new();
    let pass = write_ndjson(reports, &mut buf).expect("writing to memory");
    (buf, pass)
}

fn ndjson_lines<T: Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, &item).expect("records serialise");
        buf.push(b'\n');
    }
    buf
}

#[derive(Serialize)]
struct GraphSummary {
    graph_hash: String,
    source: GraphSource,
    d: usize,
    p: f64,
    seed: u64,
    half_width: i32,
    vertices: usize,
    edges: usize,
    box_vertices: usize,
    fraction_of_box: f64,
}

fn graph_summary(g: &ClusterGraph) -> GraphSummary {
    let box_vertices = g.geometry().vertex_count();
    GraphSummary {
        graph_hash: g.content_hash(),
        source: g.source(),
        d: g.dim(),
        p: g.p(),
        seed: g.seed(),
        half_width: g.half_width(),
        vertices: g.num_vertices(),
        edges: g.num_edges(),
        box_vertices,
        fraction_of_box: g.num_vertices() as f64 / box_vertices as f64,
    }
}

fn percolate(resolved: &Resolved, w: &mut RunWriter) -> CliResult<Outcome> {
    let mut out = Outcome {
        pass: true,
        ..Default::default()
    };
    let count = graph_count(resolved);
    let mut summaries = Vec::new();
    for k in 0..count {
        let g = build_graph(resolved, k)?;
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).expect("writing to memory");
        w.write(&indexed("graph", "txt", k, count), &buf)?;
        summaries.push(graph_summary(&g));
        out.graph(&g);
    }
    w.write("percolation.ndjson", &ndjson_lines(&summaries))?;
    if matches!(resolved.graph, GraphSpec::Percolation { seed: None, .. }) {
        out.seeds
            .push(SeedRecord::new(resolved.master_seed, "cluster", count));
    }
    Ok(out)
}

/// Whether every settled vertex connects to the origin through settled
/// vertices.
pub fn aggregate_connected(agg: &Aggregate, graph: &ClusterGraph) -> bool {
    let Some(&first) = agg.order().first() else {
        return true;
    };
    let mut seen = vec![false; graph.num_vertices()];
    seen[first as usize] = true;
    let mut queue = VecDeque::from([first]);
    let mut reached = 1;
    while let Some(v) = queue.pop_front() {
        for y in graph.neighbors(v) {
            if agg.contains(y) && !seen[y as usize] {
                seen[y as usize] = true;
                reached += 1;
                queue.push_back(y);
            }
        }
    }
    reached == agg.len()
}

fn idla(resolved: &Resolved, w: &mut RunWriter) -> CliResult<Outcome> {
    let g = build_graph(resolved, 0)?;
    let n = resolved.params.particles;
    let streams = StreamFamily::new(resolved.master_seed, "idla", 0);
    let agg = run_idla(&g, n, &streams, default_step_cap(&g))?;

    let mut buf = Vec::new();
    write_aggregate(&agg, &g, &mut buf).expect("writing to memory");
    w.write("aggregate.txt", &buf)?;
    let points = idla_core::idla::read_aggregate_points(buf.as_slice())?;
    if g.dim() <= 3 {
        let svg = render_svg(&points, &RenderStyle::default())?;
        w.write("aggregate.svg", svg.as_bytes())?;
    }

    let connected = aggregate_connected(&agg, &g);
    let origin_first = agg.order().first() == Some(&g.origin());
    let mut rep = CheckReport::new("aggregate_invariants")
        .param("graph_hash", g.content_hash())
        .param("particles", n);
    rep.samples = n as u64;
    rep.measure("size", agg.len() as f64, "|I(n)|");
    rep.measure(
        "connected",
        connected as u8 as f64,
        "1 if I(n) is connected in the graph",
    );
    rep.measure(
        "origin_first",
        origin_first as u8 as f64,
        "1 if particle 1 settled at the origin",
    );
    rep.measure(
        "inner_radius",
        inner_radius(&agg, &g),
        "min |x| over unsettled vertices x",
    );
    rep.measure(
        "max_settled_distance",
        agg.max_settled_distance(&g),
        "max |x| over settled x",
    );
    let pass = agg.len() == n && connected && origin_first;
    let rep = rep.verdict(pass, if pass { 1.0 } else { -1.0 });
    let (buf, pass) = ndjson(&[rep]);
    w.write("idla.ndjson", &buf)?;

    let mut out = Outcome {
        pass,
        ..Default::default()
    };
    out.graph(&g);
    out.seeds
        .push(SeedRecord::new(resolved.master_seed, "idla", 1));
    if matches!(resolved.graph, GraphSpec::Percolation { seed: None, .. }) {
        out.seeds
            .push(SeedRecord::new(resolved.master_seed, "cluster", 1));
    }
    Ok(out)
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ShapeLine<'a> {
    Row(&'a ShapeRow),
    Summary(&'a ShapeSummary),
}

/// Inner-bound checks on a shape report: coverage at the largest radius
/// and the mean uncovered count across radii.
pub fn shape_checks(
    rows: &[ShapeRow],
    summaries: &[ShapeSummary],
    params: &Params,
) -> Vec<CheckReport> {
    let r_max = summaries.iter().map(|s| s.radius).fold(0.0, f64::max);
    let top: Vec<&ShapeRow> = rows.iter().filter(|r| r.radius == r_max).collect();
    let covered = top
        .iter()
        .filter(|r| r.coverage_inner >= params.coverage_threshold)
        .count();
    let fraction = covered as f64 / top.len() as f64;
    let min_cov = top.iter().map(|r| r.coverage_inner).fold(1.0, f64::min);
    let mut inner = CheckReport::new("inner_bound")
        .param("R", r_max)
        .param("epsilon", params.epsilon)
        .param("coverage_threshold", params.coverage_threshold)
        .param("replica_fraction", params.replica_fraction);
    inner.samples = top.len() as u64;
    inner.measure(
        "covered_fraction",
        fraction,
        "fraction of replicas with coverage of B_(1-eps)R at least the threshold",
    );
    inner.measure(
        "min_coverage",
        min_cov,
        "min over replicas of the coverage of B_(1-eps)R",
    );
    let inner = inner.verdict(
        fraction >= params.replica_fraction,
        fraction - params.replica_fraction,
    );

    let mut sorted: Vec<&ShapeSummary> = summaries.iter().collect();
    sorted.sort_by(|a, b| a.radius.total_cmp(&b.radius));
    let mut mono = CheckReport::new("uncovered_monotone")
        .param("radii", sorted.iter().map(|s| s.radius).collect::<Vec<_>>());
    mono.samples = rows.len() as u64;
    for s in &sorted {
        mono.measure(
            &format!("mean_uncovered_R{}", s.radius),
            s.mean_uncovered,
            "mean count of unsettled vertices in B_(1-eps)R",
        );
    }
    let worst_rise = sorted
        .windows(2)
        .map(|w| w[1].mean_uncovered - w[0].mean_uncovered)
        .fold(f64::NEG_INFINITY, f64::max);
    let mono = if sorted.len() < 2 {
        mono.verdict(true, 0.0)
    } else {
        mono.verdict(worst_rise <= 0.0, -worst_rise)
    };
    vec![inner, mono]
}

fn shape(resolved: &Resolved, w: &mut RunWriter) -> CliResult<Outcome> {
    let p = &resolved.params;
    let master = resolved.master_seed;
    let mut out = Outcome::default();
    let graph_params = match resolved.graph {
        GraphSpec::Percolation { d, p, .. } => GraphParams::Percolation { d, p },
        GraphSpec::Full { d, .. } => GraphParams::FullLattice { d },
        GraphSpec::Counterexample { r0, scale_count } => {
            let report = sealed_ball_experiment(r0, scale_count, p.replicas, master)?;
            w.write(
                "sealed.json",
                (serde_json::to_string_pretty(&report).expect("report serialises") + "\n")
                    .as_bytes(),
            )?;
            let needed = (p.replica_fraction * p.replicas as f64).ceil() as usize;
            let mut rep = CheckReport::new("sealed_ball_control")
                .param("graph_hash", &report.graph_hash)
                .param("r0", r0)
                .param("scale_count", scale_count)
                .param("replica_fraction", p.replica_fraction);
            rep.samples = p.replicas;
            rep.measure(
                "below_half",
                report.below_half as f64,
                "replicas with sealed-ball coverage below 1/2",
            );
            let rep = rep.verdict(
                report.below_half >= needed,
                report.below_half as f64 - needed as f64,
            );
            let (buf, pass) = ndjson(&[rep]);
            w.write("checks.ndjson", &buf)?;
            out.pass = pass;
            out.graph_hashes.push(report.graph_hash.clone());
            out.seeds
                .push(SeedRecord::new(master, "idla/sealed", p.replicas));
            return Ok(out);
        }
    };
    let report = shape_experiment(graph_params, p.epsilon, &p.radii, p.replicas, master)?;
    let lines = report
        .rows
        .iter()
        .map(ShapeLine::Row)
        .chain(report.summaries.iter().map(ShapeLine::Summary));
    w.write("shape.ndjson", &ndjson_lines(lines))?;
    let (buf, pass) = ndjson(&shape_checks(&report.rows, &report.summaries, p));
    w.write("checks.ndjson", &buf)?;
    out.pass = pass;
    for row in &report.rows {
        if !out.graph_hashes.contains(&row.graph_hash) {
            out.graph_hashes.push(row.graph_hash.clone());
        }
    }
    for i in 0..p.radii.len() {
        out.seeds
            .push(SeedRecord::new(master, &format!("idla/R{i}"), p.replicas));
    }
    if matches!(graph_params, GraphParams::Percolation { .. }) {
        out.seeds
            .push(SeedRecord::new(master, "cluster", p.replicas));
    }
    Ok(out)
}

/// A vertex near `(k, 0, .., 0)` for the largest `k <= target` present in
/// the graph.
fn vertex_on_axis(graph: &ClusterGraph, target: i32) -> Option<u32> {
    let mut c = vec![0; graph.dim()];
    (1..=target.max(1)).rev().find_map(|k| {
        c[0] = k;
        graph.vertex_at(&c)
    })
}

/// Stream families drawn by [`lemma_suite`] for `radii_count` radii.
pub fn lemma_seed_records(master: u64, radii_count: usize, replicas: u64) -> Vec<SeedRecord> {
    let mut out = Vec::new();
    for i in 0..radii_count {
        out.push(SeedRecord::new(
            master,
            &format!("lemmas/tail/R{i}"),
            replicas,
        ));
        out.push(SeedRecord::new(
            master,
            &format!("lemmas/escape/R{i}"),
            replicas,
        ));
        out.push(SeedRecord::new(
            master,
            &format!("lemmas/harmonic/R{i}"),
            replicas,
        ));
    }
    out
}

/// Every lemma check on one graph, radius by radius, then the heat-kernel
/// checks at the origin.
pub fn lemma_suite(
    graph: &ClusterGraph,
    params: &Params,
    master: u64,
    replica: u64,
) -> CliResult<Vec<CheckReport>> {
    let origin = graph.origin();
    let mut reports = Vec::new();
    for (i, &r) in params.radii.iter().enumerate() {
        reports.push(check_green_regularity(
            graph,
            r,
            params.epsilon,
            params.delta,
        )?);
        reports.push(check_exit_regularity(
            graph,
            r,
            params.epsilon,
            params.delta,
        )?);
        reports.push(check_domination(graph, r, params.epsilon)?);
        let tail_streams = StreamFamily::new(master, &format!("lemmas/tail/R{i}"), replica);
        let sampling = (params.n_walks > 0).then_some(TailSampling {
            n_walks: params.n_walks,
            streams: &tail_streams,
        });
        reports.push(check_truncation(graph, r, &params.t_list, sampling)?);
        reports.push(check_excursion_lemma(
            graph,
            origin,
            &Domain::ball(graph, graph.coord(origin), r),
        )?);
        let family = HarmonicFamily {
            seed: seed_ledger(master, &format!("lemmas/harmonic/R{i}"), replica, 0),
            ..Default::default()
        };
        reports.push(check_harnack(graph, origin, r / 8.0, family)?);
        reports.push(check_oscillation(graph, origin, r / 8.0, family)?);
        let escape_streams = StreamFamily::new(master, &format!("lemmas/escape/R{i}"), replica);
        let escape_r = ((r / 4.0).floor() as u32).max(1);
        reports.push(check_escape_conductance(
            graph,
            origin,
            escape_r,
            params.n_walks,
            &escape_streams,
        )?);
    }
    let r_min = params.radii.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(y) = vertex_on_axis(graph, (r_min / 4.0) as i32) {
        reports.push(check_carne_varopoulos(graph, origin, y, 1, params.t_max)?);
    }
    let parity = (graph.source() == GraphSource::FullLattice).then_some(0);
    reports.push(check_heat_kernel_decay(
        graph,
        origin,
        10,
        params.t_max,
        parity,
        4,
    )?);
    Ok(reports)
}

fn lemmas(resolved: &Resolved, w: &mut RunWriter) -> CliResult<Outcome> {
    let count = graph_count(resolved);
    let mut out = Outcome::default();
    let mut all = Vec::new();
    for k in 0..count {
        let g = build_graph(resolved, k)?;
        out.graph(&g);
        all.extend(lemma_suite(&g, &resolved.params, resolved.master_seed, k)?);
    }
    let (buf, pass) = ndjson(&all);
    w.write("lemmas.ndjson", &buf)?;
    out.pass = pass;
    out.seeds = lemma_seed_records(resolved.master_seed, resolved.params.radii.len(), count);
    if matches!(resolved.graph, GraphSpec::Percolation { seed: None, .. }) {
        out.seeds
            .push(SeedRecord::new(resolved.master_seed, "cluster", count));
    }
    Ok(out)
}

/// Tolerance for the exact identities of the oracle run.
pub const IDENTITY_TOL: f64 = 1e-8;
/// Monte Carlo agreement threshold in standard errors.
pub const MC_SIGMAS: f64 = 4.0;
/// Random source pairs per graph for the identity checks.
pub const IDENTITY_PAIRS: usize = 20;

fn agreement(
    name: &str,
    graph: &ClusterGraph,
    exact: f64,
    mean: f64,
    stderr: f64,
    n: u64,
) -> CheckReport {
    let z = if stderr > 0.0 {
        (mean - exact).abs() / stderr
    } else if mean == exact {
        0.0
    } else {
        f64::INFINITY
    };
    let mut rep = CheckReport::new(name).param("graph_hash", graph.content_hash());
    rep.samples = n;
    rep.measure("exact", exact, "exact linear solve");
    rep.measure("estimate", mean, "Monte Carlo mean");
    rep.measure("stderr", stderr, "standard error of the estimate");
    rep.measure("z", z, "|estimate - exact| / stderr");
    rep.verdict(z <= MC_SIGMAS, MC_SIGMAS - z)
}

/// Exact identities and Monte Carlo agreement on `B_R` of one graph. The
/// tables are returned for export.
pub fn oracle_checks(
    graph: &ClusterGraph,
    radius: f64,
    n_walks: u64,
    master: u64,
    replica: u64,
) -> CliResult<(Vec<CheckReport>, Vec<(&'static str, Vec<u8>)>)> {
    let origin = graph.origin();
    let center = graph.coord(origin).to_vec();
    let domain = Domain::ball(graph, &center, radius);
    let solver = GreenSolver::new(graph, domain.clone(), SolverChoice::Auto)?;
    let green0 = solver.green(origin)?;
    let exit = solver.exit_time()?;
    let mut reports = Vec::new();

    let vs = domain.vertices();
    let mut rng = StreamFamily::new(master, "oracle/pairs", replica).stream(0);
    let mut sym: f64 = 0.0;
    let mut sum_err: f64 = 0.0;
    let scale = green0.max();
    for _ in 0..IDENTITY_PAIRS {
        let x = vs[rng.random_range(0..vs.len())];
        let y = vs[rng.random_range(0..vs.len())];
        let gx = solver.green(x)?;
        let gy = solver.green(y)?;
        sym = sym.max((gx.value_at(y).unwrap() - gy.value_at(x).unwrap()).abs() / scale);
        let e = exit.value_at(x).unwrap();
        sum_err = sum_err.max((gx.total() - e).abs() / e);
    }
    let mut rep = CheckReport::new("identity_symmetry")
        .param("graph_hash", graph.content_hash())
        .param("R", radius);
    rep.samples = IDENTITY_PAIRS as u64;
    rep.measure(
        "max_asymmetry",
        sym,
        "max |G(x,y) - G(y,x)| / max_z G(0,z) over random pairs",
    );
    reports.push(rep.verdict(sym <= IDENTITY_TOL, IDENTITY_TOL - sym));
    let mut rep = CheckReport::new("identity_green_sum")
        .param("graph_hash", graph.content_hash())
        .param("R", radius);
    rep.samples = IDENTITY_PAIRS as u64;
    rep.measure(
        "max_rel_error",
        sum_err,
        "max |sum_y G(x,y) - E_x[tau_R]| / E_x[tau_R]",
    );
    reports.push(rep.verdict(sum_err <= IDENTITY_TOL, IDENTITY_TOL - sum_err));

    let z = *vs
        .iter()
        .min_by(|&&a, &&b| {
            (graph.norm(a) - radius / 2.0)
                .abs()
                .total_cmp(&(graph.norm(b) - radius / 2.0).abs())
        })
        .expect("ball is not empty");
    let gz = solver.green(z)?;
    let hit = exact_hit_prob(graph, &domain, z)?;
    let gzz = gz.value_at(z).unwrap();
    let hit_err = vs
        .iter()
        .map(|&x| (gz.value_at(x).unwrap() - hit.value_at(x).unwrap() * gzz).abs() / gzz)
        .fold(0.0, f64::max);
    let mut rep = CheckReport::new("identity_hitting")
        .param("graph_hash", graph.content_hash())
        .param("R", radius)
        .param("z", graph.coord(z));
    rep.samples = vs.len() as u64;
    rep.measure(
        "max_rel_error",
        hit_err,
        "max_x |G(x,z) - P_x(tau_z < tau_R) G(z,z)| / G(z,z)",
    );
    reports.push(rep.verdict(hit_err <= IDENTITY_TOL, IDENTITY_TOL - hit_err));

    let mut tables = Vec::new();
    let spec = format!("ball R={radius}");
    let mut buf = Vec::new();
    green0
        .write_csv(graph, &spec, &mut buf)
        .expect("writing to memory");
    tables.push(("green_exact", buf));
    let mut buf = Vec::new();
    exit.write_csv(graph, &spec, &mut buf)
        .expect("writing to memory");
    tables.push(("exit_exact", buf));

    if n_walks > 0 {
        let mc = estimate_green(
            graph,
            origin,
            radius,
            n_walks,
            &StreamFamily::new(master, "oracle/green", replica),
        )?;
        let e0 = exit.value_at(origin).unwrap();
        reports.push(
            agreement(
                "oracle_exit_time",
                graph,
                e0,
                mc.exit_time.mean,
                mc.exit_time.stderr,
                n_walks,
            )
            .param("R", radius),
        );
        let pos = mc.table.domain.position(origin).unwrap();
        let se = mc.table.stderr.as_ref().map_or(0.0, |s| s[pos]);
        reports.push(
            agreement(
                "oracle_green",
                graph,
                green0.value_at(origin).unwrap(),
                mc.table.values[pos],
                se,
                n_walks,
            )
            .param("R", radius),
        );
        let est = estimate_hit_before_exit(
            graph,
            origin,
            z,
            radius,
            n_walks,
            &StreamFamily::new(master, "oracle/hit", replica),
        )?;
        reports.push(
            agreement(
                "oracle_hit",
                graph,
                hit.value_at(origin).unwrap(),
                est.mean,
                est.stderr,
                n_walks,
            )
            .param("R", radius)
            .param("z", graph.coord(z)),
        );
        let mut buf = Vec::new();
        mc.table
            .write_csv(graph, &spec, &mut buf)
            .expect("writing to memory");
        tables.push(("green_mc", buf));
    }
    Ok((reports, tables))
}

fn oracle(resolved: &Resolved, w: &mut RunWriter) -> CliResult<Outcome> {
    let count = graph_count(resolved);
    let radius = resolved.params.radii[0];
    let master = resolved.master_seed;
    let mut out = Outcome::default();
    let mut all = Vec::new();
    for k in 0..count {
        let g = build_graph(resolved, k)?;
        out.graph(&g);
        let (reports, tables) = oracle_checks(&g, radius, resolved.params.n_walks, master, k)?;
        all.extend(reports);
        for (stem, bytes) in tables {
            w.write(&indexed(stem, "csv", k, count), &bytes)?;
        }
    }
    let (buf, pass) = ndjson(&all);
    w.write("oracle.ndjson", &buf)?;
    out.pass = pass;
    for purpose in ["oracle/pairs", "oracle/green", "oracle/hit"] {
        out.seeds.push(SeedRecord::new(master, purpose, count));
    }
    if matches!(resolved.graph, GraphSpec::Percolation { seed: None, .. }) {
        out.seeds.push(SeedRecord::new(master, "cluster", count));
    }
    Ok(out)
}

#[derive(Serialize)]
struct DensityRow {
    replica: u64,
    graph_hash: String,
    radius: f64,
    box_density: f64,
    ball_density: f64,
}

#[derive(Serialize)]
struct ChemicalRow {
    replica: u64,
    graph_hash: String,
    max_ratio: f64,
    pairs_used: usize,
}

#[derive(Serialize)]
struct DensitySummary {
    radius: f64,
    replicas: u64,
    mean_box: f64,
    sd_box: f64,
    mean_ball: f64,
    sd_ball: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.serialize(row)
            .map_err(|e| crate::error::CliError::Unsupported(e.to_string()))?;
    }
    Ok(wtr.into_inner().expect("writing to memory"))
}

fn density(resolved: &Resolved, w: &mut RunWriter) -> CliResult<Outcome> {
    let p = &resolved.params;
    let master = resolved.master_seed;
    let r_max = resolved.max_radius();
    let replicas = match resolved.graph {
        GraphSpec::Percolation { .. } => p.replicas,
        _ => 1,
    };
    let mut out = Outcome {
        pass: true,
        ..Default::default()
    };
    let mut rows = Vec::new();
    let mut chem = Vec::new();
    for k in 0..replicas {
        let g = build_graph(resolved, k)?;
        out.graph(&g);
        let prof = density_profile(&g, &vec![0; g.dim()], &p.radii)?;
        for (i, &r) in prof.radii.iter().enumerate() {
            rows.push(DensityRow {
                replica: k,
                graph_hash: g.content_hash(),
                radius: r,
                box_density: prof.box_densities[i],
                ball_density: prof.ball_densities[i],
            });
        }
        if ball_vertices(&g, &vec![0; g.dim()], r_max).len() >= 2 {
            let mut rng = StreamFamily::new(master, "density/chemical", k).stream(0);
            let scan = chemical_ratio_scan(&g, r_max, r_max / 4.0, p.pairs, &mut rng)?;
            chem.push(ChemicalRow {
                replica: k,
                graph_hash: g.content_hash(),
                max_ratio: scan.max_ratio,
                pairs_used: scan.pairs_used,
            });
        }
    }
    let summaries: Vec<DensitySummary> = p
        .radii
        .iter()
        .map(|&r| {
            let boxes: Vec<f64> = rows
                .iter()
                .filter(|x| x.radius == r)
                .map(|x| x.box_density)
                .collect();
            let balls: Vec<f64> = rows
                .iter()
                .filter(|x| x.radius == r)
                .map(|x| x.ball_density)
                .collect();
            let (mean_box, sd_box) = mean_sd(&boxes);
            let (mean_ball, sd_ball) = mean_sd(&balls);
            DensitySummary {
                radius: r,
                replicas,
                mean_box,
                sd_box,
                mean_ball,
                sd_ball,
            }
        })
        .collect();
    w.write("density.csv", &csv_bytes(&rows)?)?;
    w.write("chemical.csv", &csv_bytes(&chem)?)?;
    w.write("density_summary.ndjson", &ndjson_lines(&summaries))?;
    out.seeds
        .push(SeedRecord::new(master, "density/chemical", replicas));
    if matches!(resolved.graph, GraphSpec::Percolation { seed: None, .. }) {
        out.seeds.push(SeedRecord::new(master, "cluster", replicas));
    }
    Ok(out)
}
