//! Operating-point selection for a borehole field.
//!
//! The fluid temperature in peak heating and peak cooling is bounded at
//! the start of operation and at the end of the dimensioning horizon. With
//! the heating hours fixed both constraints are linear in the extraction
//! rate, so the nominal-hours mode is solved in closed form. The
//! nominal-power mode bisects on the heating hours.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::climate::DegreeDayProfile;
use crate::error::SizingError;
use crate::thermal::{self, GroundColumn, ResistanceSet, HOURS_PER_YEAR};

/// Simulated borehole spacings, m.
pub const SPACINGS: [f64; 11] = [5.0, 7.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 70.0, 100.0];
/// Simulated borehole depths, m.
pub const DEPTHS: [f64; 4] = [50.0, 100.0, 150.0, 200.0];
/// Minimum share of the nominal extraction rate.
pub const MIN_RATE_FRACTION: f64 = 0.8;
/// Slack on temperature limits, K.
pub const TEMPERATURE_SLACK: f64 = 1e-9;
/// Resolution of the nominal-power bisection, h.
pub const HOURS_RESOLUTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpParams {
    pub cop_heat: f64,
    pub cop_cool: f64,
    /// °C
    pub t_mf_min: f64,
    /// °C
    pub t_mf_max: f64,
    /// years
    pub t_dim: f64,
}

impl Default for HpParams {
    fn default() -> Self {
        HpParams {
            cop_heat: 4.5,
            cop_cool: 5.5,
            t_mf_min: -1.5,
            t_mf_max: 50.0,
            t_dim: 50.0,
        }
    }
}

/// A candidate borehole arrangement on one parcel.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDesign {
    pub spacing: f64,
    pub depth: f64,
    pub boreholes: Vec<[f64; 2]>,
    pub resistances: ResistanceSet,
}

impl FieldDesign {
    /// Builds the design and evaluates its resistances.
    pub fn evaluate(
        spacing: f64,
        depth: f64,
        boreholes: Vec<[f64; 2]>,
        ground: &GroundColumn,
        t_dim: f64,
    ) -> Result<Self, SizingError> {
        let resistances = thermal::resistances(&boreholes, depth, ground, t_dim)?;
        Ok(FieldDesign {
            spacing,
            depth,
            boreholes,
            resistances,
        })
    }

    pub fn count(&self) -> usize {
        self.boreholes.len()
    }

    /// Total borehole length N_B · H, m.
    pub fn total_length(&self) -> f64 {
        self.count() as f64 * self.depth
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatingMode {
    /// t_op,h fixed to t_nom, q_max maximised.
    NominalHours,
    /// q_max fixed to q_nom, t_op,h maximised.
    NominalPower,
}

impl OperatingMode {
    pub fn label(&self) -> &'static str {
        match self {
            OperatingMode::NominalHours => "nominal_hours",
            OperatingMode::NominalPower => "nominal_power",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Start,
    End,
}

/// Site inputs shared by every design of a parcel.
#[derive(Debug, Clone, PartialEq)]
pub struct SizingContext {
    pub ground: GroundColumn,
    pub hp: HpParams,
    pub profile: DegreeDayProfile,
    /// Nominal heating hours, h.
    pub t_nom: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedResistances {
    pub long_term_heat: f64,
    pub long_term_cool: f64,
    pub seasonal_heat: f64,
    pub seasonal_cool: f64,
}

fn check_hours(name: &'static str, value: f64) -> Result<(), SizingError> {
    if value.is_finite() && (0.0..=HOURS_PER_YEAR).contains(&value) {
        Ok(())
    } else {
        Err(SizingError::OperatingTime { name, value })
    }
}

/// Long-term resistances weighted by annual operating share and seasonal
/// resistances weighted by the share of the peak month.
pub fn weighted_resistances(
    design: &FieldDesign,
    profile: &DegreeDayProfile,
    t_op_h: f64,
    t_op_c: f64,
    phase: Phase,
) -> Result<WeightedResistances, SizingError> {
    check_hours("t_op_h", t_op_h)?;
    check_hours("t_op_c", t_op_c)?;
    let r = &design.resistances;
    let (long_term_heat, long_term_cool) = match phase {
        Phase::Start => (0.0, 0.0),
        Phase::End => {
            let net = r.net_long_term();
            if net < 0.0 {
                return Err(SizingError::NegativeNetResistance(net));
            }
            (t_op_h / HOURS_PER_YEAR * net, t_op_c / HOURS_PER_YEAR * net)
        }
    };
    let seasonal_heat = if profile.t_m_heat > 0.0 {
        profile.w_hdd_max * t_op_h / profile.t_m_heat * r.seasonal
    } else {
        0.0
    };
    let seasonal_cool = if profile.t_m_cool > 0.0 {
        profile.w_cdd_max * t_op_c / profile.t_m_cool * r.seasonal
    } else {
        0.0
    };
    Ok(WeightedResistances {
        long_term_heat,
        long_term_cool,
        seasonal_heat,
        seasonal_cool,
    })
}

/// Mean fluid temperatures in peak heating and peak cooling, °C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidTemperatures {
    pub heating: f64,
    pub cooling: f64,
}

/// Specific injection rate during cooling hours, W/m.
fn injection_rate(design: &FieldDesign, t_op_c: f64, q_inj: f64) -> Result<f64, SizingError> {
    if !(q_inj.is_finite() && q_inj >= 0.0) {
        return Err(SizingError::InvalidEnergy {
            name: "Q_inj",
            value: q_inj,
        });
    }
    if q_inj == 0.0 {
        return Ok(0.0);
    }
    let denom = design.total_length() * t_op_c;
    if denom <= 0.0 {
        return Err(SizingError::InjectionWithoutCoolingTime(q_inj));
    }
    Ok(q_inj / denom)
}

#[allow(clippy::too_many_arguments)]
pub fn fluid_temperatures(
    design: &FieldDesign,
    ctx: &SizingContext,
    q_max: f64,
    t_op_h: f64,
    t_op_c: f64,
    q_inj: f64,
    phase: Phase,
) -> Result<FluidTemperatures, SizingError> {
    let w = weighted_resistances(design, &ctx.profile, t_op_h, t_op_c, phase)?;
    let q_i = injection_rate(design, t_op_c, q_inj)?;
    let t_g = thermal::undisturbed_ground_temperature(design.depth, &ctx.ground);
    let rb = ctx.ground.borehole_resistance;
    Ok(FluidTemperatures {
        heating: t_g - q_max * (w.long_term_heat + w.seasonal_heat + rb) + q_i * w.long_term_cool,
        cooling: t_g + q_i * (w.long_term_cool + w.seasonal_cool + rb) - q_max * w.long_term_heat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub mode: OperatingMode,
    /// W/m
    pub q_max: f64,
    /// h
    pub t_op_h: f64,
    /// h
    pub t_op_c: f64,
    /// Wh/y
    pub q_inj: f64,
    /// Wh/y
    pub q_field: f64,
    /// Extracted ground heat of the selected field, Wh/y.
    pub q_extr: f64,
    pub t_mf_h_start: f64,
    pub t_mf_h_end: f64,
    pub t_mf_c_start: f64,
    pub t_mf_c_end: f64,
}

impl OperatingPoint {
    pub fn min_fluid_temperature(&self) -> f64 {
        self.t_mf_h_start.min(self.t_mf_h_end)
    }

    pub fn max_fluid_temperature(&self) -> f64 {
        self.t_mf_c_start.max(self.t_mf_c_end)
    }

    pub fn within_limits(&self, hp: &HpParams, slack: f64) -> bool {
        [self.t_mf_h_start, self.t_mf_h_end, self.t_mf_c_start, self.t_mf_c_end]
            .iter()
            .all(|&t| t >= hp.t_mf_min - slack && t <= hp.t_mf_max + slack)
    }
}

fn build_point(
    design: &FieldDesign,
    ctx: &SizingContext,
    mode: OperatingMode,
    q_max: f64,
    t_op_h: f64,
    t_op_c: f64,
    q_inj: f64,
) -> Result<OperatingPoint, SizingError> {
    let start = fluid_temperatures(design, ctx, q_max, t_op_h, t_op_c, q_inj, Phase::Start)?;
    let end = fluid_temperatures(design, ctx, q_max, t_op_h, t_op_c, q_inj, Phase::End)?;
    let q_field = q_max * t_op_h * design.total_length();
    Ok(OperatingPoint {
        mode,
        q_max,
        t_op_h,
        t_op_c,
        q_inj,
        q_field,
        q_extr: q_field,
        t_mf_h_start: start.heating,
        t_mf_h_end: end.heating,
        t_mf_c_start: start.cooling,
        t_mf_c_end: end.cooling,
    })
}

fn feasible_at(
    design: &FieldDesign,
    ctx: &SizingContext,
    q_max: f64,
    t_op_h: f64,
    t_op_c: f64,
    q_inj: f64,
) -> Result<bool, SizingError> {
    for phase in [Phase::Start, Phase::End] {
        let t = fluid_temperatures(design, ctx, q_max, t_op_h, t_op_c, q_inj, phase)?;
        if t.heating < ctx.hp.t_mf_min - TEMPERATURE_SLACK || t.cooling > ctx.hp.t_mf_max + TEMPERATURE_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Highest q_max satisfying all temperature limits with t_op,h = t_nom.
/// `None` when that rate is below 80 % of q_nom or no rate works.
pub fn solve_nominal_hours(
    design: &FieldDesign,
    ctx: &SizingContext,
    q_inj: f64,
) -> Result<Option<OperatingPoint>, SizingError> {
    if design.count() == 0 {
        return Ok(None);
    }
    let q_nom = ctx.ground.nominal_rate(design.depth)?;
    let t_op_h = ctx.t_nom;
    let t_op_c = ctx.profile.cooling_hours();
    if t_op_h > ctx.profile.max_heating_hours() {
        return Ok(None);
    }
    let q_i = injection_rate(design, t_op_c, q_inj)?;
    let t_g = thermal::undisturbed_ground_temperature(design.depth, &ctx.ground);
    let rb = ctx.ground.borehole_resistance;

    let mut upper = f64::INFINITY;
    let mut lower = MIN_RATE_FRACTION * q_nom;
    for phase in [Phase::Start, Phase::End] {
        let w = weighted_resistances(design, &ctx.profile, t_op_h, t_op_c, phase)?;
        // heating: q·(R'_LT,h + R'_seas,h + R_b) ≤ T_g − T_min + q_i·R'_LT,c
        let slope = w.long_term_heat + w.seasonal_heat + rb;
        let room = t_g - ctx.hp.t_mf_min + q_i * w.long_term_cool;
        if slope > 0.0 {
            upper = upper.min(room / slope);
        } else if room < 0.0 {
            return Ok(None);
        }
        // cooling: q·R'_LT,h ≥ T_g + q_i·(R'_LT,c + R'_seas,c + R_b) − T_max
        let excess = t_g + q_i * (w.long_term_cool + w.seasonal_cool + rb) - ctx.hp.t_mf_max;
        if w.long_term_heat > 0.0 {
            lower = lower.max(excess / w.long_term_heat);
        } else if excess > TEMPERATURE_SLACK {
            return Ok(None);
        }
    }
    if !upper.is_finite() || upper < lower {
        return Ok(None);
    }
    build_point(design, ctx, OperatingMode::NominalHours, upper, t_op_h, t_op_c, q_inj).map(Some)
}

/// Longest t_op,h in [t_nom, t_m / w_hdd,max] satisfying all temperature
/// limits at q_max = q_nom, located by bisection.
pub fn solve_nominal_power(
    design: &FieldDesign,
    ctx: &SizingContext,
    q_inj: f64,
) -> Result<Option<OperatingPoint>, SizingError> {
    if design.count() == 0 {
        return Ok(None);
    }
    let q_nom = ctx.ground.nominal_rate(design.depth)?;
    let t_op_c = ctx.profile.cooling_hours();
    let t_lo = ctx.t_nom;
    let t_hi = ctx.profile.max_heating_hours();
    if t_lo > t_hi || !feasible_at(design, ctx, q_nom, t_lo, t_op_c, q_inj)? {
        return Ok(None);
    }
    let t_op_h = if feasible_at(design, ctx, q_nom, t_hi, t_op_c, q_inj)? {
        t_hi
    } else {
        let (mut lo, mut hi) = (t_lo, t_hi);
        while hi - lo > HOURS_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if feasible_at(design, ctx, q_nom, mid, t_op_c, q_inj)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    build_point(design, ctx, OperatingMode::NominalPower, q_nom, t_op_h, t_op_c, q_inj).map(Some)
}

pub fn solve(
    design: &FieldDesign,
    ctx: &SizingContext,
    mode: OperatingMode,
    q_inj: f64,
) -> Result<Option<OperatingPoint>, SizingError> {
    match mode {
        OperatingMode::NominalHours => solve_nominal_hours(design, ctx, q_inj),
        OperatingMode::NominalPower => solve_nominal_power(design, ctx, q_inj),
    }
}

/// Selected design and operating point of a parcel.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOptimum {
    /// Index into the candidate list.
    pub design: usize,
    pub spacing: f64,
    pub depth: f64,
    pub count: usize,
    pub point: OperatingPoint,
}

// larger Q_field wins; ties: larger B, smaller H, nominal hours first
fn better(candidate: &FieldOptimum, incumbent: &FieldOptimum) -> bool {
    let a = candidate.point.q_field;
    let b = incumbent.point.q_field;
    let scale = a.abs().max(b.abs()).max(1.0);
    if (a - b).abs() > 1e-12 * scale {
        return a > b;
    }
    match candidate.spacing.partial_cmp(&incumbent.spacing) {
        Some(Ordering::Greater) => return true,
        Some(Ordering::Less) => return false,
        _ => {}
    }
    match candidate.depth.partial_cmp(&incumbent.depth) {
        Some(Ordering::Less) => return true,
        Some(Ordering::Greater) => return false,
        _ => {}
    }
    candidate.point.mode < incumbent.point.mode
}

/// Feasible design, depth and mode maximising Q_field + Q_inj. Q_inj is the
/// same for every candidate, so this is the feasible maximum of Q_field.
pub fn optimize_field(
    designs: &[FieldDesign],
    ctx: &SizingContext,
    q_inj: f64,
) -> Result<Option<FieldOptimum>, SizingError> {
    if designs.is_empty() {
        return Err(SizingError::NoDesigns);
    }
    let mut best: Option<FieldOptimum> = None;
    for (i, design) in designs.iter().enumerate() {
        if design.depth > ctx.ground.max_depth {
            continue;
        }
        for mode in [OperatingMode::NominalHours, OperatingMode::NominalPower] {
            if let Some(point) = solve(design, ctx, mode, q_inj)? {
                let candidate = FieldOptimum {
                    design: i,
                    spacing: design.spacing,
                    depth: design.depth,
                    count: design.count(),
                    point,
                };
                if best.as_ref().is_none_or(|b| better(&candidate, b)) {
                    best = Some(candidate);
                }
            }
        }
    }
    Ok(best)
}

/// Useful heating and cooling from extracted and injected ground heat.
pub fn to_useful_energy(q_extr: f64, q_inj: f64, hp: &HpParams) -> Result<(f64, f64), SizingError> {
    for (name, value) in [("Q_extr", q_extr), ("Q_inj", q_inj)] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(SizingError::InvalidEnergy { name, value });
        }
    }
    Ok((
        q_extr * hp.cop_heat / (hp.cop_heat - 1.0),
        q_inj * hp.cop_cool / (hp.cop_cool + 1.0),
    ))
}

/// Ground heat needed to serve a cooling demand, the inverse of the cooling
/// conversion.
pub fn injection_for_cooling(cool_demand: f64, hp: &HpParams) -> f64 {
    cool_demand * (hp.cop_cool + 1.0) / hp.cop_cool
}

/// Half-plane a·x + b·y ≤ c.
#[derive(Debug, Clone, Copy)]
struct HalfPlane {
    a: f64,
    b: f64,
    c: f64,
}

/// Largest y over the polygon cut out by `planes`, by vertex enumeration.
fn max_y(planes: &[HalfPlane]) -> Option<f64> {
    let tol = |c: f64| 1e-9 * c.abs().max(1.0);
    let mut best: Option<f64> = None;
    for i in 0..planes.len() {
        for j in (i + 1)..planes.len() {
            let (p, q) = (planes[i], planes[j]);
            let det = p.a * q.b - p.b * q.a;
            if det.abs() < 1e-14 {
                continue;
            }
            let x = (p.c * q.b - p.b * q.c) / det;
            let y = (p.a * q.c - p.c * q.a) / det;
            if planes.iter().all(|h| h.a * x + h.b * y <= h.c + tol(h.c)) {
                best = Some(best.map_or(y, |b: f64| b.max(y)));
            }
        }
    }
    best
}

// far outside any physical operating range; keeps the polygons bounded
const RATE_CAP: f64 = 1.0e6;

/// Largest annual injection (Wh/y) for which the design admits a feasible
/// operating point. Zero without a cooling season.
pub fn injection_capacity(design: &FieldDesign, ctx: &SizingContext) -> Result<f64, SizingError> {
    let t_op_c = ctx.profile.cooling_hours();
    if design.count() == 0 || t_op_c <= 0.0 || design.depth > ctx.ground.max_depth {
        return Ok(0.0);
    }
    let q_nom = ctx.ground.nominal_rate(design.depth)?;
    if ctx.t_nom > ctx.profile.max_heating_hours() {
        return Ok(0.0);
    }
    let net = design.resistances.net_long_term();
    if net < 0.0 {
        return Err(SizingError::NegativeNetResistance(net));
    }
    let rs = design.resistances.seasonal;
    let rb = ctx.ground.borehole_resistance;
    let t_g = thermal::undisturbed_ground_temperature(design.depth, &ctx.ground);
    let room_heat = t_g - ctx.hp.t_mf_min;
    let room_cool = ctx.hp.t_mf_max - t_g;
    let p = &ctx.profile;
    let lt_c = t_op_c / HOURS_PER_YEAR * net;
    let seas_c = p.w_cdd_max * t_op_c / p.t_m_cool * rs;
    let t_h = ctx.t_nom;
    let lt_h_rate = net / HOURS_PER_YEAR;
    let seas_h_rate = p.w_hdd_max / p.t_m_heat * rs;

    // x = q_max, y = specific injection rate
    let hours_mode = [
        HalfPlane { a: seas_h_rate * t_h + rb, b: 0.0, c: room_heat },
        HalfPlane { a: (lt_h_rate + seas_h_rate) * t_h + rb, b: -lt_c, c: room_heat },
        HalfPlane { a: 0.0, b: seas_c + rb, c: room_cool },
        HalfPlane { a: -lt_h_rate * t_h, b: lt_c + seas_c + rb, c: room_cool },
        HalfPlane { a: -1.0, b: 0.0, c: -MIN_RATE_FRACTION * q_nom },
        HalfPlane { a: 1.0, b: 0.0, c: RATE_CAP },
        HalfPlane { a: 0.0, b: -1.0, c: 0.0 },
        HalfPlane { a: 0.0, b: 1.0, c: RATE_CAP },
    ];
    // the nominal-power mode must be feasible at t_nom, which is the point
    // (q_nom, t_nom) of the nominal-hours region, so one polygon covers both
    let rate = max_y(&hours_mode).unwrap_or(0.0);
    // shave a relative 1e-9 so the capacity itself solves as feasible
    Ok((rate * (1.0 - 1e-9)).max(0.0) * design.total_length() * t_op_c)
}
