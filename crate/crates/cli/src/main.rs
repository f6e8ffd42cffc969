use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use gshp_core::climate::DegreeDayProfile;
use gshp_core::geospatial;
use gshp_core::io;
use gshp_core::pipeline::{self, ParcelDesigns, Region, ScenarioSetup};
use gshp_core::scenario::ScenarioSpec;
use gshp_core::sizing::SPACINGS;
use gshp_core::{synth, PipelineError};

#[derive(Parser)]
#[command(name = "gshp", version, about = "Regional shallow geothermal potential with seasonal regeneration")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run manifest (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scenario label such as PC-ND-4.5; repeatable. Defaults to the
    /// manifest list, else the seven no-district scenarios.
    #[arg(long, global = true)]
    scenario: Vec<String>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Seed of the synthetic region generator.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Monthly degree days and load weights from daily temperatures.
    DegreeDays {
        /// Daily temperature CSV; defaults to the manifest climates.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Virtual borehole placement per parcel.
    Place {
        /// Write coordinates for this spacing instead of counts.
        #[arg(long)]
        spacing: Option<f64>,
    },
    /// Field sizing per parcel after injection ranking.
    Size,
    /// Per-unit energy balance.
    Balance,
    /// District allocation (scenarios with DHC).
    Allocate,
    /// Full pipeline with all outputs, followed by the report.
    Run,
    /// Tables and delta layers from existing scenario outputs.
    Report,
    /// Month-resolved simulation of every sized parcel.
    Validate,
    /// Writes a synthetic region with its manifest.
    Synth {
        /// Cooling-demand runs per scenario key.
        #[arg(long, default_value_t = 5)]
        runs: usize,
    },
}

fn config(common: &Common) -> Result<&Path> {
    common
        .config
        .as_deref()
        .ok_or_else(|| PipelineError::InfeasibleConfig("--config is required".into()).into())
}

struct Loaded {
    region: Region,
    designs: Vec<ParcelDesigns>,
    scenarios: Vec<ScenarioSpec>,
}

fn load(common: &Common) -> Result<Loaded> {
    let region = Region::load(config(common)?)?;
    let scenarios = pipeline::resolve_scenarios(&region, &common.scenario)?;
    let designs = pipeline::prepare_designs(&region)?;
    let flagged = region.flagged();
    if !flagged.is_empty() {
        eprintln!("warning: {} features outside the pixel grid: {}", flagged.len(), flagged.join(", "));
    }
    Ok(Loaded {
        region,
        designs,
        scenarios,
    })
}

/// Runs every Monte Carlo realisation of a scenario.
fn runs(l: &Loaded, spec: ScenarioSpec) -> Result<(ScenarioSetup<'_>, Vec<pipeline::RunResult>)> {
    let setup = ScenarioSetup::new(&l.region, &l.designs, spec)?;
    let runs = l
        .region
        .cooling_runs(&spec)?
        .into_par_iter()
        .map(|c| setup.run(c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((setup, runs))
}

fn degree_days(common: &Common, input: Option<&Path>) -> Result<()> {
    let mut profiles = BTreeMap::new();
    match input {
        Some(path) => {
            for (cell, days) in io::read_daily_temperatures(path)? {
                let p = DegreeDayProfile::from_daily(&days).map_err(|e| PipelineError::Schema {
                    path: path.to_path_buf(),
                    message: format!("cell '{cell}': {e}"),
                })?;
                profiles.insert(cell, p);
            }
        }
        None => {
            let region = Region::load(config(common)?)?;
            profiles = region.climates;
        }
    }
    let out = common.out_dir.join("degree_days.csv");
    io::write_profiles(&out, &profiles)?;
    println!("{}", out.display());
    Ok(())
}

fn place(common: &Common, spacing: Option<f64>) -> Result<()> {
    let region = Region::load(config(common)?)?;
    let buffer = region.manifest.sizing.buffer;
    let out = common.out_dir.join("placements.csv");
    match spacing {
        Some(b) => {
            let rows = region
                .parcels
                .par_iter()
                .map(|p| {
                    let pts = geospatial::place_boreholes(&p.parcel.geometry, b, buffer)?;
                    Ok(pts
                        .into_iter()
                        .map(|[x, y]| vec![p.parcel.id.clone(), b.to_string(), x.to_string(), y.to_string()])
                        .collect::<Vec<_>>())
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            io::write_csv(&out, &["parcel_id", "B", "x", "y"], rows.into_iter().flatten())?;
        }
        None => {
            let rows = region
                .parcels
                .par_iter()
                .map(|p| {
                    SPACINGS
                        .iter()
                        .map(|&b| {
                            let n = geospatial::place_boreholes(&p.parcel.geometry, b, buffer)?.len();
                            Ok(vec![p.parcel.id.clone(), b.to_string(), n.to_string()])
                        })
                        .collect::<Result<Vec<_>, PipelineError>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            io::write_csv(&out, &["parcel_id", "B", "N_B"], rows.into_iter().flatten())?;
        }
    }
    println!("{}", out.display());
    Ok(())
}

/// Writes one table per scenario and run.
fn staged<F>(common: &Common, name: &str, header: &[&str], rows: F, need_dhc: bool) -> Result<()>
where
    F: Fn(&pipeline::RunResult) -> Vec<Vec<String>>,
{
    let l = load(common)?;
    for &spec in &l.scenarios {
        if need_dhc && !spec.dhc {
            return Err(PipelineError::InfeasibleConfig(format!("scenario {spec} has no district networks")).into());
        }
        let (_, results) = runs(&l, spec)?;
        for (k, r) in results.iter().enumerate() {
            let out = common.out_dir.join(spec.label()).join(format!("run_{k:03}")).join(name);
            io::write_csv(&out, header, rows(r))?;
        }
        println!("{}: {} runs", spec, results.len());
    }
    Ok(())
}

fn run_all(common: &Common) -> Result<()> {
    let l = load(common)?;
    for &spec in &l.scenarios {
        let result = pipeline::run_scenario(&l.region, &l.designs, spec)?;
        pipeline::write_scenario(&common.out_dir, &l.region, &result)?;
        println!(
            "{}: Q_inj {:.4} TWh/y, Q_extr {:.4} TWh/y, useful heat {:.4} TWh/y",
            spec,
            result.mean("q_inj") / 1e12,
            result.mean("q_extr") / 1e12,
            result.mean("useful_heat") / 1e12
        );
    }
    pipeline::report(&common.out_dir)?;
    Ok(())
}

fn validate(common: &Common) -> Result<()> {
    let l = load(common)?;
    let mut worst = 0.0_f64;
    for &spec in &l.scenarios {
        let (setup, results) = runs(&l, spec)?;
        let mut rows = Vec::new();
        for (k, r) in results.iter().enumerate() {
            for (id, v) in setup.validate(r)? {
                worst = worst.max(v.violation);
                rows.push(vec![
                    k.to_string(),
                    id,
                    v.min_heating.to_string(),
                    v.max_cooling.to_string(),
                    v.violation.to_string(),
                ]);
            }
        }
        let out = common.out_dir.join(spec.label()).join("validation.csv");
        io::write_csv(&out, &["run", "parcel_id", "T_min_heating", "T_max_cooling", "violation_K"], rows)?;
    }
    println!("largest excursion {worst:.3} K");
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::DegreeDays { input } => degree_days(c, input.as_deref()),
        Command::Place { spacing } => place(c, *spacing),
        Command::Size => staged(c, "parcels.csv", &pipeline::PARCEL_COLUMNS, pipeline::parcel_rows, false),
        Command::Balance => staged(c, "units.csv", &pipeline::UNIT_COLUMNS, pipeline::unit_rows, false),
        Command::Allocate => staged(
            c,
            "flows.csv",
            &["source_id", "demand_id", "amount"],
            |r| {
                r.flows
                    .iter()
                    .map(|f| vec![f.source.clone(), f.demand.clone(), f.amount.to_string()])
                    .collect()
            },
            true,
        ),
        Command::Run => run_all(c),
        Command::Report => {
            let labels = pipeline::report(&c.out_dir)?;
            println!("report for {}", labels.join(", "));
            Ok(())
        }
        Command::Validate => validate(c),
        Command::Synth { runs } => {
            let path = synth::generate(&c.out_dir, c.seed, *runs)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    e.chain()
        .find_map(|c| c.downcast_ref::<PipelineError>())
        .map_or(1, |p| p.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.common.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.common.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli).context("gshp failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

