//! Harness for the IDLA laboratory: configs, experiment runs, manifests and
//! renders behind the `idla-lab` binary.

pub mod args;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod render;

use std::path::{Path, PathBuf};

use args::{Cli, Command, Overrides, RenderArgs};
use config::{ExperimentConfig, ExperimentKind, Resolved};
use error::{CliError, CliResult, EXIT_CHECK_FAILED, EXIT_PASS};
use output::{RunManifest, RunWriter, OUTPUT_ROOT_ENV};

/// Where a run writes: the configured directory, else
/// `$IDLA_LAB_OUT/<kind>-<hash prefix>`, else `idla-runs/<kind>-<hash prefix>`.
pub fn output_dir(resolved: &Resolved) -> PathBuf {
    if let Some(dir) = &resolved.output {
        return dir.clone();
    }
    let root =
        std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("idla-runs"), PathBuf::from);
    root.join(format!(
        "{}-{}",
        resolved.kind.name(),
        &resolved.config_hash()[..12]
    ))
}

/// Validate and run. Nothing is written when the config is invalid.
pub fn run_config(cfg: &ExperimentConfig) -> CliResult<(PathBuf, RunManifest)> {
    let resolved = cfg.resolve()?;
    let dir = output_dir(&resolved);
    let manifest = experiments::execute(&resolved, RunWriter::create(&dir)?)?;
    Ok((dir, manifest))
}

fn experiment_config(
    kind: Option<ExperimentKind>,
    path: Option<&Path>,
    overrides: &Overrides,
) -> CliResult<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(k) = kind {
        cfg.experiment.kind = Some(k);
    }
    overrides.apply(&mut cfg);
    if path.is_none() {
        cfg.fill_demo_graph();
    }
    Ok(cfg)
}

fn render(args: &RenderArgs) -> CliResult<PathBuf> {
    let text = std::fs::read(&args.aggregate).map_err(|source| CliError::Read {
        path: args.aggregate.clone(),
        source,
    })?;
    let points = idla_core::idla::read_aggregate_points(text.as_slice())?;
    let style = render::RenderStyle {
        cell: args.cell,
        color_by_order: args.color_by_order,
        overlay: args.overlay_radius.map(|radius| render::Overlay {
            radius,
            epsilon: args.epsilon,
        }),
    };
    let svg = render::render_svg(&points, &style)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.aggregate.with_extension("svg"));
    std::fs::write(&out, svg).map_err(|source| CliError::Write {
        path: out.clone(),
        source,
    })?;
    Ok(out)
}

/// Execute a parsed command line and return the process exit code.
pub fn run_cli(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Render(args) => render(args).map(|out| {
            println!("{}", out.display());
            EXIT_PASS
        }),
        cmd => {
            let (kind, path, overrides) = match cmd {
                Command::Run { config, overrides } => (None, Some(config.as_path()), overrides),
                Command::Percolate(a) => (
                    Some(ExperimentKind::Percolate),
                    a.config.as_deref(),
                    &a.overrides,
                ),
                Command::Idla(a) => (
                    Some(ExperimentKind::Idla),
                    a.config.as_deref(),
                    &a.overrides,
                ),
                Command::Shape(a) => (
                    Some(ExperimentKind::Shape),
                    a.config.as_deref(),
                    &a.overrides,
                ),
                Command::Lemmas(a) => (
                    Some(ExperimentKind::Lemmas),
                    a.config.as_deref(),
                    &a.overrides,
                ),
                Command::Oracle(a) => (
                    Some(ExperimentKind::Oracle),
                    a.config.as_deref(),
                    &a.overrides,
                ),
                Command::Density(a) => (
                    Some(ExperimentKind::Density),
                    a.config.as_deref(),
                    &a.overrides,
                ),
                Command::Render(_) => unreachable!(),
            };
            experiment_config(kind, path, overrides)
                .and_then(|cfg| run_config(&cfg))
                .map(|(dir, manifest)| {
                    println!(
                        "{} {}",
                        if manifest.pass { "PASS" } else { "FAIL" },
                        dir.display()
                    );
                    if manifest.pass {
                        EXIT_PASS
                    } else {
                        EXIT_CHECK_FAILED
                    }
                })
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("idla-lab: {e}");
        e.exit_code()
    })
}
