//! Scenario orchestration: placement, injection ranking, sizing, unit
//! balances, district allocation and Monte Carlo aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::allocation::{self, AllocationGraph, Flow, Vertex};
use crate::climate::DegreeDayProfile;
use crate::config::{CiMethod, Manifest};
use crate::error::PipelineError;
use crate::geometry::{MultiPolygon, Point};
use crate::geospatial::{self, Parcel, PixelAccount, PixelId, Restriction, UnitKind};
use crate::io::{self, Geometry};
use crate::oracle_sim::{self, Validation};
use crate::scenario::ScenarioSpec;
use crate::sizing::{self, FieldDesign, FieldOptimum, SizingContext, DEPTHS, SPACINGS};

#[derive(Debug, Clone, PartialEq)]
pub struct RegionParcel {
    pub parcel: Parcel,
    pub altitude: f64,
    pub location: Point,
    pub pixel: Option<PixelId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Building {
    pub id: String,
    pub location: Point,
    pub pixel: Option<PixelId>,
    /// Wh/y
    pub heat_demand: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DhcZone {
    pub id: String,
    pub geometry: MultiPolygon,
}

/// All inputs of a region, loaded and validated.
#[derive(Debug, Clone)]
pub struct Region {
    pub manifest: Manifest,
    pub parcels: Vec<RegionParcel>,
    pub buildings: Vec<Building>,
    pub dhc: Vec<DhcZone>,
    pub climates: BTreeMap<String, DegreeDayProfile>,
    pub cooling: BTreeMap<String, Vec<BTreeMap<String, f64>>>,
}

fn area_of(f: &io::Feature, path: &Path) -> Result<MultiPolygon, PipelineError> {
    match &f.geometry {
        Geometry::Area(m) => Ok(m.clone()),
        Geometry::Point(_) => Err(PipelineError::schema(path, format!("feature '{}' must be a polygon", f.id))),
    }
}

impl Region {
    pub fn load(manifest_path: &Path) -> Result<Self, PipelineError> {
        let manifest = Manifest::load(manifest_path)?;
        Self::from_manifest(manifest)
    }

    pub fn from_manifest(manifest: Manifest) -> Result<Self, PipelineError> {
        let grid = manifest.grid;
        let path = &manifest.region.parcels;
        let mut parcels = Vec::new();
        for f in io::read_features(path)? {
            let geometry = area_of(&f, path)?;
            let restriction = match f.text("restriction") {
                None => Restriction::Permitted,
                Some(s) => s.parse().map_err(|e: String| PipelineError::schema(path, format!("parcel '{}': {e}", f.id)))?,
            };
            let altitude = f.number("altitude").unwrap_or(manifest.sizing.default_altitude);
            let location = geometry
                .representative_point()
                .ok_or_else(|| PipelineError::schema(path, format!("parcel '{}' has no area", f.id)))?;
            parcels.push(RegionParcel {
                pixel: grid.locate(location),
                parcel: Parcel { id: f.id, geometry, restriction },
                altitude,
                location,
            });
        }
        let path = &manifest.region.buildings;
        let mut buildings = Vec::new();
        for f in io::read_features(path)? {
            let heat_demand = f
                .number("heat_demand")
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| PipelineError::schema(path, format!("building '{}' needs a non-negative heat_demand", f.id)))?;
            let location = f
                .geometry
                .representative_point()
                .ok_or_else(|| PipelineError::schema(path, format!("building '{}' has no location", f.id)))?;
            buildings.push(Building {
                id: f.id,
                location,
                pixel: grid.locate(location),
                heat_demand,
            });
        }
        let mut dhc = Vec::new();
        if let Some(path) = &manifest.region.dhc {
            for f in io::read_features(path)? {
                dhc.push(DhcZone { geometry: area_of(&f, path)?, id: f.id });
            }
        }
        let mut climates = BTreeMap::new();
        for (key, path) in &manifest.climate {
            climates.insert(key.clone(), io::read_profile(path)?);
        }
        let mut cooling = BTreeMap::new();
        for (key, paths) in &manifest.cooling {
            let runs = paths.iter().map(|p| io::read_cooling_run(p)).collect::<Result<Vec<_>, _>>()?;
            cooling.insert(key.clone(), runs);
        }
        Ok(Region {
            manifest,
            parcels,
            buildings,
            dhc,
            climates,
            cooling,
        })
    }

    pub fn profile(&self, spec: &ScenarioSpec) -> Result<&DegreeDayProfile, PipelineError> {
        let key = spec.climate.map_or("baseline", |c| c.key());
        self.climates
            .get(key)
            .ok_or_else(|| PipelineError::InfeasibleConfig(format!("scenario {spec} needs climate '{key}'")))
    }

    pub fn cooling_runs(&self, spec: &ScenarioSpec) -> Result<Vec<Option<&BTreeMap<String, f64>>>, PipelineError> {
        match spec.cooling_key() {
            None => Ok(vec![None]),
            Some(key) => match self.cooling.get(&key) {
                Some(runs) if !runs.is_empty() => Ok(runs.iter().map(Some).collect()),
                _ => Err(PipelineError::InfeasibleConfig(format!(
                    "scenario {spec} needs cooling runs under '{key}'"
                ))),
            },
        }
    }

    /// Ids of parcels and buildings whose location lies outside the grid.
    pub fn flagged(&self) -> Vec<String> {
        self.parcels
            .iter()
            .filter(|p| p.pixel.is_none())
            .map(|p| p.parcel.id.clone())
            .chain(self.buildings.iter().filter(|b| b.pixel.is_none()).map(|b| b.id.clone()))
            .collect()
    }

    /// Sizing inputs of a parcel, `None` in prohibited zones.
    pub fn sizing_context(&self, parcel: &RegionParcel, profile: &DegreeDayProfile) -> Option<SizingContext> {
        let m = &self.manifest;
        let max_depth = parcel.parcel.restriction.max_depth(m.ground.max_depth)?;
        let mut ground = m.ground.clone();
        ground.max_depth = max_depth;
        Some(SizingContext {
            ground,
            hp: m.heat_pump,
            profile: profile.clone(),
            t_nom: m.sizing.nominal_hours(parcel.altitude),
        })
    }
}

/// Placed candidate designs of one parcel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParcelDesigns {
    pub designs: Vec<FieldDesign>,
}

/// Places boreholes for every spacing and evaluates every allowed depth.
pub fn prepare_designs(region: &Region) -> Result<Vec<ParcelDesigns>, PipelineError> {
    let m = &region.manifest;
    region
        .parcels
        .par_iter()
        .map(|p| {
            let Some(h_max) = p.parcel.restriction.max_depth(m.ground.max_depth) else {
                return Ok(ParcelDesigns::default());
            };
            let mut designs = Vec::new();
            for b in SPACINGS {
                let pts = geospatial::place_boreholes(&p.parcel.geometry, b, m.sizing.buffer)?;
                if pts.is_empty() {
                    continue;
                }
                for h in DEPTHS.into_iter().filter(|&h| h <= h_max) {
                    designs.push(FieldDesign::evaluate(b, h, pts.clone(), &m.ground, m.heat_pump.t_dim)?);
                }
            }
            Ok(ParcelDesigns { designs })
        })
        .collect()
}

/// Matching unit of every parcel and building: the DHC zone containing its
/// location when district networks are modelled, otherwise its pixel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Units {
    pub parcel_unit: Vec<Option<String>>,
    pub building_unit: Vec<Option<String>>,
}

pub fn dhc_unit_id(zone: &str) -> String {
    format!("dhc_{zone}")
}

pub fn matching_units(region: &Region, dhc: bool) -> Units {
    let zone_of = |p: Point| -> Option<String> {
        if !dhc {
            return None;
        }
        region.dhc.iter().find(|z| z.geometry.contains(p)).map(|z| dhc_unit_id(&z.id))
    };
    let unit = |p: Point, px: Option<PixelId>| zone_of(p).or_else(|| px.map(|px| px.to_string()));
    Units {
        parcel_unit: region.parcels.iter().map(|p| unit(p.location, p.pixel)).collect(),
        building_unit: region.buildings.iter().map(|b| unit(b.location, b.pixel)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParcelOutcome {
    pub id: String,
    pub unit: Option<String>,
    pub pixel: Option<PixelId>,
    pub area: f64,
    /// Wh/y
    pub capacity: f64,
    pub q_inj: f64,
    pub optimum: Option<FieldOptimum>,
    pub q_extr: f64,
    pub q_heat: f64,
    pub q_cool: f64,
}

/// Regional totals of one run, Wh/y unless noted.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunSummary {
    pub heat_demand: f64,
    pub cool_demand: f64,
    pub injection_demand: f64,
    pub q_inj: f64,
    pub q_extr: f64,
    pub q_heat: f64,
    pub q_cool: f64,
    pub useful_heat: f64,
    pub useful_cool: f64,
    pub allocated_heat: f64,
    pub unmet_cool: f64,
    /// Fractions in [0, 1].
    pub heat_coverage: f64,
    pub cool_coverage: f64,
}

impl RunSummary {
    pub const METRICS: [&'static str; 13] = [
        "heat_demand",
        "cool_demand",
        "injection_demand",
        "q_inj",
        "q_extr",
        "q_heat",
        "q_cool",
        "useful_heat",
        "useful_cool",
        "allocated_heat",
        "unmet_cool",
        "heat_coverage",
        "cool_coverage",
    ];

    pub fn values(&self) -> [f64; 13] {
        [
            self.heat_demand,
            self.cool_demand,
            self.injection_demand,
            self.q_inj,
            self.q_extr,
            self.q_heat,
            self.q_cool,
            self.useful_heat,
            self.useful_cool,
            self.allocated_heat,
            self.unmet_cool,
            self.heat_coverage,
            self.cool_coverage,
        ]
    }

    pub fn from_values(v: &[f64]) -> Option<Self> {
        if v.len() != 13 {
            return None;
        }
        Some(RunSummary {
            heat_demand: v[0],
            cool_demand: v[1],
            injection_demand: v[2],
            q_inj: v[3],
            q_extr: v[4],
            q_heat: v[5],
            q_cool: v[6],
            useful_heat: v[7],
            useful_cool: v[8],
            allocated_heat: v[9],
            unmet_cool: v[10],
            heat_coverage: v[11],
            cool_coverage: v[12],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub parcels: Vec<ParcelOutcome>,
    pub accounts: BTreeMap<String, PixelAccount>,
    pub flows: Vec<Flow>,
    pub summary: RunSummary,
}

/// Scenario-wide sizing inputs shared by all Monte Carlo runs.
pub struct ScenarioSetup<'a> {
    pub region: &'a Region,
    pub designs: &'a [ParcelDesigns],
    pub spec: ScenarioSpec,
    pub units: Units,
    pub contexts: Vec<Option<SizingContext>>,
    pub capacities: Vec<f64>,
}

impl<'a> ScenarioSetup<'a> {
    pub fn new(region: &'a Region, designs: &'a [ParcelDesigns], spec: ScenarioSpec) -> Result<Self, PipelineError> {
        let profile = region.profile(&spec)?;
        let contexts: Vec<Option<SizingContext>> = region.parcels.iter().map(|p| region.sizing_context(p, profile)).collect();
        let cooling = spec.cooling_key().is_some();
        let capacities = designs
            .par_iter()
            .zip(contexts.par_iter())
            .map(|(d, ctx)| -> Result<f64, PipelineError> {
                let Some(ctx) = ctx.as_ref().filter(|_| cooling) else {
                    return Ok(0.0);
                };
                let mut best = 0.0_f64;
                for design in &d.designs {
                    best = best.max(sizing::injection_capacity(design, ctx)?);
                }
                Ok(best)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScenarioSetup {
            region,
            designs,
            spec,
            units: matching_units(region, spec.dhc),
            contexts,
            capacities,
        })
    }

    fn optimum(&self, i: usize, q_inj: f64) -> Result<Option<FieldOptimum>, PipelineError> {
        match &self.contexts[i] {
            Some(ctx) if !self.designs[i].designs.is_empty() => Ok(sizing::optimize_field(&self.designs[i].designs, ctx, q_inj)?),
            _ => Ok(None),
        }
    }

    /// Ranks injection within one unit, re-ranking whenever a parcel cannot
    /// absorb its share, then sizes every parcel.
    fn size_unit(&self, members: &[usize], injection_demand: f64) -> Result<Vec<(usize, f64, Option<FieldOptimum>)>, PipelineError> {
        let parcels = &self.region.parcels;
        let keyed: Vec<(&str, f64)> = members.iter().map(|&i| (parcels[i].parcel.id.as_str(), parcels[i].parcel.area())).collect();
        let mut caps: Vec<f64> = members.iter().map(|&i| self.capacities[i]).collect();
        let mut solved: BTreeMap<usize, Option<FieldOptimum>> = BTreeMap::new();
        let plan = loop {
            let plan = geospatial::rank_and_inject(&keyed, injection_demand, &caps)?;
            let mut changed = false;
            for (k, &q) in plan.q_inj.iter().enumerate() {
                if q > 0.0 {
                    let opt = self.optimum(members[k], q)?;
                    if opt.is_none() {
                        caps[k] = 0.0;
                        changed = true;
                    }
                    solved.insert(k, opt);
                }
            }
            if !changed {
                break plan;
            }
        };
        members
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let q = plan.q_inj[k];
                let opt = if q > 0.0 { solved.remove(&k).flatten() } else { self.optimum(i, 0.0)? };
                Ok((i, q, opt))
            })
            .collect()
    }

    /// One Monte Carlo realisation with the given per-building cooling demand.
    pub fn run(&self, cooling: Option<&BTreeMap<String, f64>>) -> Result<RunResult, PipelineError> {
        let region = self.region;
        let hp = &region.manifest.heat_pump;
        let mut heat: BTreeMap<String, f64> = BTreeMap::new();
        let mut cool: BTreeMap<String, f64> = BTreeMap::new();
        for (b, unit) in region.buildings.iter().zip(&self.units.building_unit) {
            let Some(unit) = unit else { continue };
            *heat.entry(unit.clone()).or_default() += b.heat_demand;
            let c = cooling.and_then(|m| m.get(&b.id)).copied().unwrap_or(0.0);
            *cool.entry(unit.clone()).or_default() += c;
        }
        let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, unit) in self.units.parcel_unit.iter().enumerate() {
            if let Some(unit) = unit {
                members.entry(unit.clone()).or_default().push(i);
            }
        }
        let unit_ids: BTreeSet<String> = heat.keys().chain(members.keys()).cloned().collect();
        let unit_ids: Vec<String> = unit_ids.into_iter().collect();

        let sized: Vec<Vec<(usize, f64, Option<FieldOptimum>)>> = unit_ids
            .par_iter()
            .map(|u| {
                let demand = sizing::injection_for_cooling(cool.get(u).copied().unwrap_or(0.0), hp);
                self.size_unit(members.get(u).map_or(&[][..], |v| v.as_slice()), demand)
            })
            .collect::<Result<_, _>>()?;

        let mut parcels: Vec<Option<ParcelOutcome>> = vec![None; region.parcels.len()];
        for (i, q_inj, optimum) in sized.into_iter().flatten() {
            let q_extr = optimum.as_ref().map_or(0.0, |o| o.point.q_extr);
            let (q_heat, q_cool) = sizing::to_useful_energy(q_extr, q_inj, hp)?;
            let p = &region.parcels[i];
            parcels[i] = Some(ParcelOutcome {
                id: p.parcel.id.clone(),
                unit: self.units.parcel_unit[i].clone(),
                pixel: p.pixel,
                area: p.parcel.area(),
                capacity: self.capacities[i],
                q_inj,
                optimum,
                q_extr,
                q_heat,
                q_cool,
            });
        }
        let parcels: Vec<ParcelOutcome> = parcels
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                p.unwrap_or_else(|| {
                    let rp = &region.parcels[i];
                    ParcelOutcome {
                        id: rp.parcel.id.clone(),
                        unit: None,
                        pixel: rp.pixel,
                        area: rp.parcel.area(),
                        capacity: self.capacities[i],
                        q_inj: 0.0,
                        optimum: None,
                        q_extr: 0.0,
                        q_heat: 0.0,
                        q_cool: 0.0,
                    }
                })
            })
            .collect();

        let mut supply: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for p in &parcels {
            if let Some(u) = &p.unit {
                let e = supply.entry(u.as_str()).or_default();
                e.0 += p.q_extr;
                e.1 += p.q_inj;
            }
        }
        let mut accounts = BTreeMap::new();
        for u in &unit_ids {
            let (q_extr, q_inj) = supply.get(u.as_str()).copied().unwrap_or_default();
            let kind = if u.starts_with("dhc_") { UnitKind::Dhc } else { UnitKind::Pixel };
            let acc = geospatial::pixel_balance(
                u.clone(),
                kind,
                heat.get(u).copied().unwrap_or(0.0),
                cool.get(u).copied().unwrap_or(0.0),
                q_extr,
                q_inj,
                hp,
            )?;
            accounts.insert(u.clone(), acc);
        }

        let flows = if self.spec.dhc {
            self.allocate(&mut accounts)?
        } else {
            Vec::new()
        };
        let summary = summarize(&parcels, &accounts, hp);
        Ok(RunResult {
            parcels,
            accounts,
            flows,
            summary,
        })
    }

    fn allocate(&self, accounts: &mut BTreeMap<String, PixelAccount>) -> Result<Vec<Flow>, PipelineError> {
        let region = self.region;
        let pixel_of: BTreeMap<String, PixelId> = region
            .parcels
            .iter()
            .filter_map(|p| p.pixel)
            .chain(region.buildings.iter().filter_map(|b| b.pixel))
            .map(|px| (px.to_string(), px))
            .collect();
        let sources: Vec<Vertex> = accounts
            .values()
            .filter(|a| a.kind == UnitKind::Pixel && a.surplus_heat > 0.0)
            .filter_map(|a| {
                pixel_of.get(&a.id).map(|&px| Vertex {
                    id: a.id.clone(),
                    geometry: region.manifest.grid.cell(px),
                    capacity: a.surplus_heat,
                })
            })
            .collect();
        let demands: Vec<Vertex> = region
            .dhc
            .iter()
            .filter_map(|z| {
                let id = dhc_unit_id(&z.id);
                accounts.get(&id).filter(|a| a.deficit_heat > 0.0).map(|a| Vertex {
                    id,
                    geometry: z.geometry.clone(),
                    capacity: a.deficit_heat,
                })
            })
            .collect();
        let mut graph: AllocationGraph = allocation::build_graph(sources, demands, &region.manifest.allocation)?;
        graph.solve()?;
        allocation::apply_allocation(accounts, &graph)?;
        Ok(graph.flows)
    }
}

impl ScenarioSetup<'_> {
    /// Simulates every sized parcel of a run month by month and reports the
    /// fluid temperature excursions.
    pub fn validate(&self, run: &RunResult) -> Result<Vec<(String, Validation)>, PipelineError> {
        let hp = &self.region.manifest.heat_pump;
        let jobs: Vec<(usize, &FieldOptimum)> = run
            .parcels
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.optimum.as_ref().map(|o| (i, o)))
            .collect();
        jobs.into_par_iter()
            .map(|(i, o)| {
                let ctx = self.contexts[i].as_ref().expect("sized parcels have a context");
                let design = &self.designs[i].designs[o.design];
                let v = oracle_sim::validate_operating_point(&o.point, design, &ctx.ground, &ctx.profile, hp)?;
                Ok((run.parcels[i].id.clone(), v))
            })
            .collect()
    }
}

fn summarize(parcels: &[ParcelOutcome], accounts: &BTreeMap<String, PixelAccount>, hp: &sizing::HpParams) -> RunSummary {
    let mut s = RunSummary::default();
    for p in parcels.iter().filter(|p| p.unit.is_some()) {
        s.q_inj += p.q_inj;
        s.q_extr += p.q_extr;
        s.q_heat += p.q_heat;
        s.q_cool += p.q_cool;
    }
    for a in accounts.values() {
        s.heat_demand += a.heat_demand;
        s.cool_demand += a.cool_demand;
        s.useful_heat += a.useful_heat;
        s.useful_cool += a.useful_cool;
        s.allocated_heat += a.imported_heat;
        s.unmet_cool += a.unmet_cool;
    }
    s.injection_demand = sizing::injection_for_cooling(s.cool_demand, hp);
    s.heat_coverage = if s.heat_demand > 0.0 { (s.useful_heat / s.heat_demand).min(1.0) } else { 0.0 };
    s.cool_coverage = if s.cool_demand > 0.0 { (s.useful_cool / s.cool_demand).min(1.0) } else { 0.0 };
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricStat {
    pub name: &'static str,
    pub n: usize,
    pub mean: f64,
    /// Interval bounds; `None` for a single run.
    pub ci: Option<(f64, f64)>,
}

impl MetricStat {
    pub fn half_width(&self) -> Option<f64> {
        self.ci.map(|(lo, hi)| 0.5 * (hi - lo))
    }
}

/// Linear-interpolated sample quantile.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean and 95 % interval of a series of run totals.
pub fn summarize_series(name: &'static str, values: &[f64], method: CiMethod) -> Result<MetricStat, PipelineError> {
    let n = values.len();
    if n == 0 {
        return Err(PipelineError::Other("no runs to aggregate".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ci = if n < 2 {
        None
    } else {
        match method {
            CiMethod::Normal => {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let hw = 1.96 * var.sqrt() / (n as f64).sqrt();
                Some((mean - hw, mean + hw))
            }
            CiMethod::Percentile => {
                let mut sorted = values.to_vec();
                sorted.sort_by(f64::total_cmp);
                Some((quantile(&sorted, 0.025), quantile(&sorted, 0.975)))
            }
        }
    };
    Ok(MetricStat { name, n, mean, ci })
}

pub fn aggregate_mc(runs: &[RunSummary], method: CiMethod) -> Result<Vec<MetricStat>, PipelineError> {
    if runs.is_empty() {
        return Err(PipelineError::Other("no runs to aggregate".into()));
    }
    RunSummary::METRICS
        .iter()
        .enumerate()
        .map(|(k, &name)| {
            let series: Vec<f64> = runs.iter().map(|r| r.values()[k]).collect();
            summarize_series(name, &series, method)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub runs: Vec<RunResult>,
    pub aggregate: Vec<MetricStat>,
}

impl ScenarioResult {
    pub fn mean(&self, metric: &str) -> f64 {
        self.aggregate.iter().find(|m| m.name == metric).map_or(f64::NAN, |m| m.mean)
    }
}

pub fn run_scenario(region: &Region, designs: &[ParcelDesigns], spec: ScenarioSpec) -> Result<ScenarioResult, PipelineError> {
    let setup = ScenarioSetup::new(region, designs, spec)?;
    let runs = region
        .cooling_runs(&spec)?
        .into_par_iter()
        .map(|c| setup.run(c))
        .collect::<Result<Vec<_>, _>>()?;
    let summaries: Vec<RunSummary> = runs.iter().map(|r| r.summary).collect();
    let aggregate = aggregate_mc(&summaries, region.manifest.report.ci)?;
    Ok(ScenarioResult { spec, runs, aggregate })
}

/// Scenario labels from the command line or, failing that, the manifest.
pub fn resolve_scenarios(region: &Region, requested: &[String]) -> Result<Vec<ScenarioSpec>, PipelineError> {
    let labels: Vec<String> = if !requested.is_empty() {
        requested.to_vec()
    } else if !region.manifest.scenarios.is_empty() {
        region.manifest.scenarios.clone()
    } else {
        ScenarioSpec::standard().iter().map(ScenarioSpec::label).collect()
    };
    labels
        .iter()
        .map(|l| l.parse::<ScenarioSpec>().map_err(PipelineError::InfeasibleConfig))
        .collect()
}

fn f(v: f64) -> String {
    v.to_string()
}

fn opt_f(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

pub const PARCEL_COLUMNS: [&str; 18] = [
    "parcel_id", "unit_id", "pixel_id", "area_m2", "B", "H", "N_B", "mode", "q_max", "t_op_h", "capacity",
    "Q_inj", "Q_extr", "Q_heat", "Q_cool", "T_mf_min", "T_mf_max", "feasible",
];

pub fn parcel_rows(run: &RunResult) -> Vec<Vec<String>> {
    run.parcels
        .iter()
        .map(|p| {
            let o = p.optimum.as_ref();
            vec![
                p.id.clone(),
                p.unit.clone().unwrap_or_default(),
                p.pixel.map(|x| x.to_string()).unwrap_or_default(),
                f(p.area),
                opt_f(o.map(|o| o.spacing)),
                opt_f(o.map(|o| o.depth)),
                o.map(|o| o.count.to_string()).unwrap_or_default(),
                o.map(|o| o.point.mode.label().to_string()).unwrap_or_default(),
                opt_f(o.map(|o| o.point.q_max)),
                opt_f(o.map(|o| o.point.t_op_h)),
                f(p.capacity),
                f(p.q_inj),
                f(p.q_extr),
                f(p.q_heat),
                f(p.q_cool),
                opt_f(o.map(|o| o.point.min_fluid_temperature())),
                opt_f(o.map(|o| o.point.max_fluid_temperature())),
                o.is_some().to_string(),
            ]
        })
        .collect()
}

pub const UNIT_COLUMNS: [&str; 16] = [
    "unit_id", "kind", "heat_demand", "cool_demand", "Q_extr", "Q_inj", "Q_heat", "Q_cool", "useful_heat", "surplus_heat",
    "deficit_heat", "useful_cool", "unmet_cool", "imported_heat", "exported_heat", "heat_coverage",
];

pub fn unit_rows(run: &RunResult) -> Vec<Vec<String>> {
    run.accounts
        .values()
        .map(|a| {
            let kind = match a.kind {
                UnitKind::Pixel => "pixel",
                UnitKind::Dhc => "dhc",
            };
            let cov = if a.heat_demand > 0.0 { (a.useful_heat / a.heat_demand).min(1.0) } else { 0.0 };
            vec![
                a.id.clone(),
                kind.to_string(),
                f(a.heat_demand),
                f(a.cool_demand),
                f(a.q_extr),
                f(a.q_inj),
                f(a.q_heat),
                f(a.q_cool),
                f(a.useful_heat),
                f(a.surplus_heat),
                f(a.deficit_heat),
                f(a.useful_cool),
                f(a.unmet_cool),
                f(a.imported_heat),
                f(a.exported_heat),
                f(cov),
            ]
        })
        .collect()
}

/// Per-pixel layer values: Q_extr of the parcels in the pixel, heat demand
/// of its buildings, and useful heat. Useful heat of a DHC zone is shared
/// among pixels by their heat demand inside the zone.
pub fn pixel_layer(region: &Region, units: &Units, run: &RunResult) -> BTreeMap<PixelId, (f64, f64, f64)> {
    let mut out: BTreeMap<PixelId, (f64, f64, f64)> = BTreeMap::new();
    for p in &run.parcels {
        if let (Some(px), Some(_)) = (p.pixel, &p.unit) {
            out.entry(px).or_default().0 += p.q_extr;
        }
    }
    for (b, unit) in region.buildings.iter().zip(&units.building_unit) {
        let (Some(px), Some(unit)) = (b.pixel, unit) else { continue };
        let e = out.entry(px).or_default();
        e.1 += b.heat_demand;
        if let Some(a) = run.accounts.get(unit) {
            if a.heat_demand > 0.0 {
                e.2 += a.useful_heat * b.heat_demand / a.heat_demand;
            }
        }
    }
    out
}

/// Writes the outputs of one scenario under `out_dir/<label>/`.
pub fn write_scenario(out_dir: &Path, region: &Region, result: &ScenarioResult) -> Result<(), PipelineError> {
    let dir = out_dir.join(result.spec.label());
    let mut summary_header = vec!["run"];
    summary_header.extend(RunSummary::METRICS);
    io::write_csv(
        &dir.join("summary.csv"),
        &summary_header,
        result.runs.iter().enumerate().map(|(k, r)| {
            std::iter::once(k.to_string())
                .chain(r.summary.values().into_iter().map(f))
                .collect::<Vec<_>>()
        }),
    )?;
    io::write_csv(
        &dir.join("aggregate.csv"),
        &["metric", "n", "mean", "ci_low", "ci_high", "half_width"],
        result.aggregate.iter().map(|m| {
            vec![
                m.name.to_string(),
                m.n.to_string(),
                f(m.mean),
                opt_f(m.ci.map(|c| c.0)),
                opt_f(m.ci.map(|c| c.1)),
                opt_f(m.half_width()),
            ]
        }),
    )?;
    let units = matching_units(region, result.spec.dhc);
    let grid = &region.manifest.grid;
    for (k, run) in result.runs.iter().enumerate() {
        let rdir = dir.join(format!("run_{k:03}"));
        io::write_csv(&rdir.join("parcels.csv"), &PARCEL_COLUMNS, parcel_rows(run))?;
        io::write_csv(&rdir.join("units.csv"), &UNIT_COLUMNS, unit_rows(run))?;
        io::write_csv(
            &rdir.join("flows.csv"),
            &["source_id", "demand_id", "amount"],
            run.flows.iter().map(|fl| vec![fl.source.clone(), fl.demand.clone(), f(fl.amount)]),
        )?;
        let features = pixel_layer(region, &units, run)
            .into_iter()
            .map(|(px, (q_extr, demand, useful))| {
                let mut props = Map::new();
                props.insert("pixel_id".into(), json!(px.to_string()));
                props.insert("q_extr".into(), json!(q_extr));
                // Wh per pixel area to kWh/m²
                props.insert("density_kwh_m2".into(), json!(q_extr / 1000.0 / grid.cell_area()));
                props.insert("heat_demand".into(), json!(demand));
                props.insert("useful_heat".into(), json!(useful));
                let cov: Value = if demand > 0.0 { json!(100.0 * (useful / demand).min(1.0)) } else { Value::Null };
                props.insert("coverage_pct".into(), cov);
                (io::geometry_json(&grid.cell(px)), props)
            })
            .collect();
        io::write_json(&rdir.join("pixels.geojson"), &io::feature_collection(features))?;
    }
    Ok(())
}

/// Tables of mean and CI half-width per scenario and metric, and delta
/// layers (with minus without DHC, percentage points) for every pair of
/// scenarios present in `out_dir`.
pub fn report(out_dir: &Path) -> Result<Vec<String>, PipelineError> {
    let mut labels = Vec::new();
    let entries = std::fs::read_dir(out_dir).map_err(|e| PipelineError::io(out_dir, e))?;
    for e in entries {
        let e = e.map_err(|e| PipelineError::io(out_dir, e))?;
        let name = e.file_name().to_string_lossy().to_string();
        if name.parse::<ScenarioSpec>().is_ok() && e.path().join("aggregate.csv").exists() {
            labels.push(name);
        }
    }
    labels.sort();
    if labels.is_empty() {
        return Err(PipelineError::schema(out_dir, "no scenario results found"));
    }
    let report_dir = out_dir.join("report");
    let mut rows = Vec::new();
    for l in &labels {
        for row in io::read_table(&out_dir.join(l).join("aggregate.csv"))? {
            let get = |k: &str| row.get(k).cloned().unwrap_or_default();
            rows.push(vec![l.clone(), get("metric"), get("n"), get("mean"), get("half_width")]);
        }
    }
    io::write_csv(&report_dir.join("scenarios.csv"), &["scenario", "metric", "n", "mean", "half_width"], rows)?;

    for l in &labels {
        let spec: ScenarioSpec = l.parse().map_err(PipelineError::Other)?;
        if !spec.dhc {
            continue;
        }
        let nd = spec.with_dhc(false).label();
        if !labels.contains(&nd) {
            continue;
        }
        let read = |label: &str| -> Result<Value, PipelineError> {
            let p = out_dir.join(label).join("run_000").join("pixels.geojson");
            let text = std::fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))?;
            serde_json::from_str(&text).map_err(|e| PipelineError::schema(&p, e.to_string()))
        };
        let with = read(l)?;
        let without = read(&nd)?;
        let coverage = |v: &Value| -> BTreeMap<String, (Value, f64)> {
            v["features"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(|ft| {
                    let id = ft["properties"]["pixel_id"].as_str()?.to_string();
                    let c = ft["properties"]["coverage_pct"].as_f64()?;
                    Some((id, (ft["geometry"].clone(), c)))
                })
                .collect()
        };
        let a = coverage(&with);
        let b = coverage(&without);
        let features = a
            .iter()
            .filter_map(|(id, (geom, ca))| {
                let (_, cb) = b.get(id)?;
                let mut props = Map::new();
                props.insert("pixel_id".into(), json!(id));
                props.insert("delta_coverage_pp".into(), json!(ca - cb));
                Some((geom.clone(), props))
            })
            .collect();
        io::write_json(
            &report_dir.join(format!("delta_{l}_vs_{nd}.geojson")),
            &io::feature_collection(features),
        )?;
    }
    Ok(labels)
}
