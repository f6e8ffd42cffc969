//! Borehole placement on available areas, pixel matching and the
//! distribution of cooling rejects over the parcels of a matching unit.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GeoError;
use crate::geometry::{MultiPolygon, Point};
use crate::sizing::{self, HpParams};
use crate::thermal::MIN_SPACING;

pub const DEFAULT_BUFFER: f64 = 3.0;
pub const PIXEL_SIZE: f64 = 400.0;
/// Drilling depth limit in limited zones, m.
pub const LIMITED_MAX_DEPTH: f64 = 150.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Restriction {
    Permitted,
    Limited,
    Prohibited,
}

impl Restriction {
    /// Allowed drilling depth given the regional maximum, `None` if drilling
    /// is prohibited.
    pub fn max_depth(&self, regional: f64) -> Option<f64> {
        match self {
            Restriction::Permitted => Some(regional),
            Restriction::Limited => Some(regional.min(LIMITED_MAX_DEPTH)),
            Restriction::Prohibited => None,
        }
    }
}

impl std::str::FromStr for Restriction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "permitted" => Ok(Restriction::Permitted),
            "limited" => Ok(Restriction::Limited),
            "prohibited" => Ok(Restriction::Prohibited),
            other => Err(format!("unknown restriction '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parcel {
    pub id: String,
    /// Available area for drilling.
    pub geometry: MultiPolygon,
    pub restriction: Restriction,
}

impl Parcel {
    pub fn area(&self) -> f64 {
        self.geometry.area()
    }
}

/// Rectangular lattice of pitch `spacing` anchored at the lower-left corner
/// of the bounding box, keeping points inside the area and at least
/// `buffer` from its boundary. Multi-part areas share one lattice.
pub fn place_boreholes(area: &MultiPolygon, spacing: f64, buffer: f64) -> Result<Vec<Point>, GeoError> {
    if !(spacing >= MIN_SPACING) {
        return Err(GeoError::SpacingTooSmall(spacing));
    }
    let Some(bbox) = area.bbox() else {
        return Ok(Vec::new());
    };
    let nx = ((bbox.max[0] - bbox.min[0]) / spacing).floor() as usize;
    let ny = ((bbox.max[1] - bbox.min[1]) / spacing).floor() as usize;
    let mut out = Vec::new();
    for j in 0..=ny {
        let y = bbox.min[1] + j as f64 * spacing;
        for i in 0..=nx {
            let p = [bbox.min[0] + i as f64 * spacing, y];
            if area.contains(p) && area.distance_to_boundary(p) >= buffer {
                out.push(p);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelId {
    pub ix: usize,
    pub iy: usize,
}

impl fmt::Display for PixelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "px_{}_{}", self.ix, self.iy)
    }
}

/// Square aggregation grid. Cell k spans (origin + k·pitch, origin + (k+1)·pitch],
/// with the lower region boundary assigned to cell 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    pub origin: Point,
    pub pitch: f64,
    pub nx: usize,
    pub ny: usize,
}

impl PixelGrid {
    fn axis(&self, v: f64, o: f64, n: usize) -> Option<usize> {
        let u = (v - o) / self.pitch;
        if !u.is_finite() || u < 0.0 || u > n as f64 {
            return None;
        }
        Some((u.ceil() as usize).max(1) - 1)
    }

    pub fn locate(&self, p: Point) -> Option<PixelId> {
        Some(PixelId {
            ix: self.axis(p[0], self.origin[0], self.nx)?,
            iy: self.axis(p[1], self.origin[1], self.ny)?,
        })
    }

    pub fn cell(&self, id: PixelId) -> MultiPolygon {
        let x0 = self.origin[0] + id.ix as f64 * self.pitch;
        let y0 = self.origin[1] + id.iy as f64 * self.pitch;
        crate::geometry::Polygon::rectangle(x0, y0, x0 + self.pitch, y0 + self.pitch).into()
    }

    pub fn cell_area(&self) -> f64 {
        self.pitch * self.pitch
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PixelAssignment {
    pub pixels: BTreeMap<String, PixelId>,
    /// Ids whose representative point lies outside the grid.
    pub flagged: Vec<String>,
}

/// Pixel of each geometry's representative point.
pub fn assign_pixels<'a, I>(geometries: I, grid: &PixelGrid) -> PixelAssignment
where
    I: IntoIterator<Item = (&'a str, &'a MultiPolygon)>,
{
    let mut out = PixelAssignment::default();
    for (id, geom) in geometries {
        match geom.representative_point().and_then(|p| grid.locate(p)) {
            Some(px) => {
                out.pixels.insert(id.to_string(), px);
            }
            None => out.flagged.push(id.to_string()),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionPlan {
    pub q_inj: Vec<f64>,
    pub unmet: f64,
}

/// Fills parcels in descending area order (ties by id) up to their
/// capacity until the injection demand is exhausted.
pub fn rank_and_inject(
    parcels: &[(&str, f64)],
    demand: f64,
    capacities: &[f64],
) -> Result<InjectionPlan, GeoError> {
    if !(demand >= 0.0) {
        return Err(GeoError::NegativeDemand(demand));
    }
    if parcels.len() != capacities.len() {
        return Err(GeoError::LengthMismatch {
            parcels: parcels.len(),
            capacities: capacities.len(),
        });
    }
    let mut order: Vec<usize> = (0..parcels.len()).collect();
    order.sort_by(|&a, &b| {
        parcels[b]
            .1
            .total_cmp(&parcels[a].1)
            .then_with(|| parcels[a].0.cmp(parcels[b].0))
    });
    let mut q_inj = vec![0.0; parcels.len()];
    let mut remaining = demand;
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let take = remaining.min(capacities[i].max(0.0));
        q_inj[i] = take;
        remaining -= take;
    }
    Ok(InjectionPlan {
        q_inj,
        unmet: remaining.max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Pixel,
    Dhc,
}

/// Energy balance of a matching unit (a pixel, or a DHC zone when district
/// networks are modelled). All energies in Wh/y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelAccount {
    pub id: String,
    pub kind: UnitKind,
    pub heat_demand: f64,
    pub cool_demand: f64,
    pub q_extr: f64,
    pub q_inj: f64,
    pub q_heat: f64,
    pub q_cool: f64,
    pub useful_heat: f64,
    pub surplus_heat: f64,
    pub deficit_heat: f64,
    pub useful_cool: f64,
    pub unmet_cool: f64,
    /// Heat received from or sent to other units by allocation.
    pub imported_heat: f64,
    pub exported_heat: f64,
}

pub fn pixel_balance(
    id: impl Into<String>,
    kind: UnitKind,
    heat_demand: f64,
    cool_demand: f64,
    q_extr: f64,
    q_inj: f64,
    hp: &HpParams,
) -> Result<PixelAccount, GeoError> {
    for v in [heat_demand, cool_demand] {
        if !(v >= 0.0) {
            return Err(GeoError::NegativeDemand(v));
        }
    }
    let (q_heat, q_cool) = sizing::to_useful_energy(q_extr, q_inj, hp).map_err(|_| GeoError::NonFinite)?;
    let useful_cool = q_cool.min(cool_demand);
    Ok(PixelAccount {
        id: id.into(),
        kind,
        heat_demand,
        cool_demand,
        q_extr,
        q_inj,
        q_heat,
        q_cool,
        useful_heat: q_heat.min(heat_demand),
        surplus_heat: (q_heat - heat_demand).max(0.0),
        deficit_heat: (heat_demand - q_heat).max(0.0),
        useful_cool,
        unmet_cool: (cool_demand - useful_cool).max(0.0),
        imported_heat: 0.0,
        exported_heat: 0.0,
    })
}
