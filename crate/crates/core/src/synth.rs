//! Seeded synthetic region: ten 400 m pixels, parcels of varied size and
//! restriction, buildings, one dense district-heating zone in deficit, daily
//! climate series and Monte Carlo cooling-demand runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map};

use crate::config::{Manifest, RegionFiles, ReportConfig, SizingConfig};
use crate::error::PipelineError;
use crate::geometry::{MultiPolygon, Point, Polygon};
use crate::geospatial::{Parcel, PixelGrid, Restriction};
use crate::io;
use crate::scenario::{Climate, CoolingLevel};
use crate::sizing::HpParams;
use crate::thermal::GroundColumn;

pub const PITCH: f64 = 400.0;
pub const NX: usize = 5;
pub const NY: usize = 2;
/// Approximate injection capacity of a densely drilled parcel, Wh per m².
pub const CAPACITY_PER_AREA: f64 = 9.0e5;

/// Square parcel used for the spacing-shift fixture.
pub fn reference_parcel() -> Parcel {
    Parcel {
        id: "reference".into(),
        geometry: Polygon::rectangle(0.0, 0.0, 86.0, 86.0).into(),
        restriction: Restriction::Permitted,
    }
}

pub fn grid() -> PixelGrid {
    PixelGrid {
        origin: [0.0, 0.0],
        pitch: PITCH,
        nx: NX,
        ny: NY,
    }
}

/// District zone inside pixel (2, 0); its neighbours (1, 0) and (3, 0) lie
/// within the allocation threshold, (2, 1) does not.
pub fn dhc_zone() -> MultiPolygon {
    Polygon::rectangle(820.0, 100.0, 1180.0, 300.0).into()
}

fn sparse(ix: usize, iy: usize) -> bool {
    matches!((ix, iy), (1, 0) | (3, 0) | (0, 1) | (4, 1) | (2, 1))
}

#[derive(Debug, Clone)]
struct SynthParcel {
    id: String,
    rect: [f64; 4],
    restriction: Restriction,
    altitude: f64,
    unit: String,
}

#[derive(Debug, Clone)]
struct SynthBuilding {
    id: String,
    at: Point,
    heat: f64,
    unit: String,
    /// Share of the unit's cooling demand.
    weight: f64,
}

fn climate_offset(c: Option<Climate>) -> f64 {
    match c {
        None => 0.0,
        Some(Climate::Rcp26) => 0.6,
        Some(Climate::Rcp45) => 1.2,
        Some(Climate::Rcp85) => 2.2,
    }
}

fn cooling_scale(level: CoolingLevel, c: Climate) -> f64 {
    let base = match level {
        CoolingLevel::NC => 0.0,
        CoolingLevel::PC => 0.45,
        CoolingLevel::FC => 0.9,
    };
    let m = match c {
        Climate::Rcp26 => 0.95,
        Climate::Rcp45 => 1.0,
        Climate::Rcp85 => 1.06,
    };
    base * m
}

/// Writes the region files and `manifest.toml` under `dir`; returns the
/// manifest path.
pub fn generate(dir: &Path, seed: u64, runs: usize) -> Result<PathBuf, PipelineError> {
    if runs == 0 {
        return Err(PipelineError::InfeasibleConfig("at least one cooling run is needed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zone = dhc_zone();
    let block = PITCH / 3.0;

    let mut parcels = Vec::new();
    let mut buildings = Vec::new();
    for iy in 0..NY {
        for ix in 0..NX {
            let x0 = ix as f64 * PITCH;
            let y0 = iy as f64 * PITCH;
            let px = format!("px_{ix}_{iy}");
            let altitude = 350.0 + 180.0 * ix as f64 + rng.gen_range(0.0..60.0);
            let mut blocks: Vec<usize> = (0..9).collect();
            blocks.shuffle(&mut rng);
            let in_zone_pixel = (ix, iy) == (2, 0);
            if in_zone_pixel {
                // middle row inside the zone, two more outside
                blocks = vec![3, 4, 5, 0, 8];
            } else {
                blocks.truncate(rng.gen_range(3..=5));
            }
            for (k, b) in blocks.into_iter().enumerate() {
                let (bx, by) = ((b % 3) as f64, (b / 3) as f64);
                let zoned = in_zone_pixel && b / 3 == 1;
                let (lo, hi): (f64, f64) = if zoned { (24.0, 40.0) } else { (26.0, 100.0) };
                let w = rng.gen_range(lo..hi).round();
                let h = rng.gen_range(lo..hi).round();
                let margin = 15.0;
                let ox = x0 + bx * block + margin + rng.gen_range(0.0..(block - 2.0 * margin - w).max(0.0) + 1e-9);
                let oy = y0 + by * block + margin + rng.gen_range(0.0..(block - 2.0 * margin - h).max(0.0) + 1e-9);
                let ox = ox.round();
                let oy = oy.round();
                let mut restriction = if rng.gen_bool(0.12) { Restriction::Limited } else { Restriction::Permitted };
                if (ix, iy, k) == (1, 1, 0) {
                    restriction = Restriction::Prohibited;
                }
                if (ix, iy, k) == (4, 0, 0) {
                    restriction = Restriction::Limited;
                }
                parcels.push(SynthParcel {
                    id: format!("p_{ix}_{iy}_{k}"),
                    rect: [ox, oy, ox + w, oy + h],
                    restriction,
                    altitude: altitude.round(),
                    unit: if zoned { "dhc_Z1".into() } else { px.clone() },
                });
            }

            let total_heat = if sparse(ix, iy) { 8.0e8 } else { 2.5e10 };
            let n = rng.gen_range(6..=10);
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
            let wsum: f64 = weights.iter().sum();
            for (k, w) in weights.iter().enumerate() {
                let mut at = [x0 + rng.gen_range(10.0..PITCH - 10.0), y0 + rng.gen_range(10.0..PITCH - 10.0)];
                if in_zone_pixel {
                    // keep ordinary buildings of the zone pixel outside the zone
                    at[1] = if k % 2 == 0 { y0 + rng.gen_range(10.0..90.0) } else { y0 + rng.gen_range(310.0..390.0) };
                }
                buildings.push(SynthBuilding {
                    id: format!("b_{ix}_{iy}_{k}"),
                    at: [at[0].round(), at[1].round()],
                    heat: (total_heat * w / wsum).round(),
                    unit: px.clone(),
                    weight: *w,
                });
            }
        }
    }
    for k in 0..8 {
        let at = [rng.gen_range(830.0..1170.0_f64).round(), rng.gen_range(110.0..290.0_f64).round()];
        debug_assert!(zone.contains(at));
        buildings.push(SynthBuilding {
            id: format!("b_zone_{k}"),
            at,
            heat: rng.gen_range(6.0e9..9.0e9_f64).round(),
            unit: "dhc_Z1".into(),
            weight: rng.gen_range(0.5..1.5),
        });
    }

    let parcel_features = parcels
        .iter()
        .map(|p| {
            let mut props = Map::new();
            props.insert("id".into(), json!(p.id));
            props.insert("restriction".into(), json!(format!("{:?}", p.restriction).to_lowercase()));
            props.insert("altitude".into(), json!(p.altitude));
            let [x0, y0, x1, y1] = p.rect;
            (io::geometry_json(&Polygon::rectangle(x0, y0, x1, y1).into()), props)
        })
        .collect();
    io::write_json(&dir.join("parcels.geojson"), &io::feature_collection(parcel_features))?;
    let building_features = buildings
        .iter()
        .map(|b| {
            let mut props = Map::new();
            props.insert("id".into(), json!(b.id));
            props.insert("heat_demand".into(), json!(b.heat));
            (io::point_json(b.at), props)
        })
        .collect();
    io::write_json(&dir.join("buildings.geojson"), &io::feature_collection(building_features))?;
    let mut zprops = Map::new();
    zprops.insert("id".into(), json!("Z1"));
    io::write_json(&dir.join("dhc.geojson"), &io::feature_collection(vec![(io::geometry_json(&zone), zprops)]))?;

    let mut climate = BTreeMap::new();
    let keys: [(Option<Climate>, &str); 4] = [
        (None, "baseline"),
        (Some(Climate::Rcp26), "rcp26"),
        (Some(Climate::Rcp45), "rcp45"),
        (Some(Climate::Rcp85), "rcp85"),
    ];
    let noise: Vec<f64> = (0..730).map(|_| rng.gen_range(-3.0..3.0)).collect();
    for (c, key) in keys {
        let rel = PathBuf::from(format!("climate/{key}.csv"));
        let start = NaiveDate::from_ymd_opt(2001, 1, 1).expect("valid date");
        let rows = (0..730).map(|d| {
            let date = start + Duration::days(d);
            let doy = date.ordinal0() as f64;
            let t = 9.5 - 10.0 * (2.0 * std::f64::consts::PI * (doy - 15.0) / 365.0).cos() + noise[d as usize] + climate_offset(c);
            vec![date.to_string(), format!("{:.2}", t)]
        });
        io::write_csv(&dir.join(&rel), &["date", "temperature"], rows)?;
        climate.insert(key.to_string(), rel);
    }

    // estimated injection capacity per unit, sizing the cooling demand
    let mut capacity: BTreeMap<&str, f64> = BTreeMap::new();
    for p in &parcels {
        let [x0, y0, x1, y1] = p.rect;
        let depth_share = match p.restriction {
            Restriction::Permitted => 1.0,
            Restriction::Limited => 0.75,
            Restriction::Prohibited => 0.0,
        };
        *capacity.entry(p.unit.as_str()).or_default() += CAPACITY_PER_AREA * (x1 - x0) * (y1 - y0) * depth_share;
    }
    let mut unit_weight: BTreeMap<&str, f64> = BTreeMap::new();
    for b in &buildings {
        *unit_weight.entry(b.unit.as_str()).or_default() += b.weight;
    }
    let cop = HpParams::default().cop_cool;
    let mut cooling = BTreeMap::new();
    for level in [CoolingLevel::PC, CoolingLevel::FC] {
        for c in Climate::ALL {
            let key = format!("{level:?}-{}", c.suffix());
            let mut files = Vec::new();
            for r in 0..runs {
                let mut unit_demand: BTreeMap<&str, f64> = BTreeMap::new();
                for (&u, &cap) in &capacity {
                    let share = if u.starts_with("dhc_") { 0.1 } else { cooling_scale(level, c) };
                    unit_demand.insert(u, share * cap * rng.gen_range(0.94..1.0) * cop / (cop + 1.0));
                }
                let rows: Vec<Vec<String>> = buildings
                    .iter()
                    .map(|b| {
                        let d = unit_demand.get(b.unit.as_str()).copied().unwrap_or(0.0) * b.weight / unit_weight[b.unit.as_str()];
                        vec![b.id.clone(), format!("{:.0}", d.floor())]
                    })
                    .collect();
                let rel = PathBuf::from(format!("cooling/{key}/run_{r:03}.csv"));
                io::write_csv(&dir.join(&rel), &["building_id", "cool_demand"], rows)?;
                files.push(rel);
            }
            cooling.insert(key, files);
        }
    }

    let manifest = Manifest {
        region: RegionFiles {
            parcels: "parcels.geojson".into(),
            buildings: "buildings.geojson".into(),
            dhc: Some("dhc.geojson".into()),
        },
        grid: grid(),
        ground: GroundColumn::reference(),
        heat_pump: HpParams::default(),
        sizing: SizingConfig::default(),
        allocation: Default::default(),
        climate,
        cooling,
        report: ReportConfig::default(),
        scenarios: Vec::new(),
    };
    let text = toml::to_string(&manifest).map_err(|e| PipelineError::Other(e.to_string()))?;
    let path = dir.join("manifest.toml");
    io::write_text(&path, &text)?;
    Ok(path)
}
