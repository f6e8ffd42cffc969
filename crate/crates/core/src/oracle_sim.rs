//! Month-resolved borehole-field simulator used to check the weighted
//! resistance model. Loads are superposed as monthly steps on the full
//! finite-line-source response of the field.

use rayon::prelude::*;

use crate::climate::DegreeDayProfile;
use crate::error::ThermalError;
use crate::sizing::{FieldDesign, HpParams, OperatingPoint};
use crate::thermal::{self, GroundColumn, HOURS_PER_MONTH, SECONDS_PER_HOUR};

/// Monthly mean specific load in W/m, extraction positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadHistory {
    loads: Vec<f64>,
}

impl LoadHistory {
    pub fn new(loads: Vec<f64>) -> Result<Self, ThermalError> {
        if loads.is_empty() || !loads.len().is_multiple_of(12) {
            return Err(ThermalError::OutOfRange {
                name: "load history length",
                requirement: "a positive multiple of 12",
                value: loads.len() as f64,
            });
        }
        if let Some(&v) = loads.iter().find(|v| !v.is_finite()) {
            return Err(ThermalError::NonFinite { name: "load", value: v });
        }
        Ok(LoadHistory { loads })
    }

    /// The same twelve monthly values repeated for `years`.
    pub fn repeat(year: [f64; 12], years: usize) -> Result<Self, ThermalError> {
        Self::new(year.iter().copied().cycle().take(12 * years).collect())
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }
}

/// Response of the field per unit load on every borehole, averaged over
/// boreholes, at the end of each month 1..=months.
pub fn field_step_responses(
    boreholes: &[[f64; 2]],
    depth: f64,
    ground: &GroundColumn,
    months: usize,
) -> Result<Vec<f64>, ThermalError> {
    let mut terms = vec![(ground.borehole_radius, 1.0)];
    terms.extend(thermal::pair_distance_weights(boreholes));
    let step = HOURS_PER_MONTH * SECONDS_PER_HOUR;
    (1..=months)
        .into_par_iter()
        .map(|lag| thermal::fls_weighted(&terms, depth, lag as f64 * step, ground))
        .collect()
}

/// Mean fluid temperature at the end of each month:
/// T_g − Σ Δq_k·g(t_m − t_k) − q_m·R_b.
pub fn simulate_t_mf(design: &FieldDesign, ground: &GroundColumn, loads: &LoadHistory) -> Result<Vec<f64>, ThermalError> {
    let g = field_step_responses(&design.boreholes, design.depth, ground, loads.len())?;
    let t_g = thermal::undisturbed_ground_temperature(design.depth, ground);
    Ok(superpose(loads.loads(), &g)
        .into_iter()
        .zip(loads.loads())
        .map(|(dt, &q)| t_g - dt - q * ground.borehole_resistance)
        .collect())
}

/// Ground temperature drop at the end of each month from step superposition.
pub fn superpose(loads: &[f64], g: &[f64]) -> Vec<f64> {
    let mut steps = Vec::with_capacity(loads.len());
    let mut previous = 0.0;
    for &q in loads {
        steps.push(q - previous);
        previous = q;
    }
    (0..loads.len())
        .map(|m| (0..=m).map(|k| steps[k] * g[m - k]).sum())
        .collect()
}

/// Monthly specific loads implied by an operating point: extraction
/// distributed by heating degree days, injection by cooling degree days.
pub fn implied_loads(
    point: &OperatingPoint,
    design: &FieldDesign,
    profile: &DegreeDayProfile,
    years: usize,
) -> Result<LoadHistory, ThermalError> {
    let hdd: f64 = profile.hdd.iter().sum();
    let cdd: f64 = profile.cdd.iter().sum();
    let length = design.total_length();
    let q_i = if point.q_inj > 0.0 && point.t_op_c > 0.0 && length > 0.0 {
        point.q_inj / (length * point.t_op_c)
    } else {
        0.0
    };
    let mut year = [0.0; 12];
    for (m, load) in year.iter_mut().enumerate() {
        if hdd > 0.0 {
            *load += point.q_max * point.t_op_h * profile.hdd[m] / hdd / HOURS_PER_MONTH;
        }
        if cdd > 0.0 {
            *load -= q_i * point.t_op_c * profile.cdd[m] / cdd / HOURS_PER_MONTH;
        }
    }
    LoadHistory::repeat(year, years)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    /// Coldest peak-heating fluid temperature, °C.
    pub min_heating: f64,
    /// Warmest peak-cooling fluid temperature, °C.
    pub max_cooling: f64,
    /// Largest excursion beyond the fluid temperature limits, K.
    pub violation: f64,
}

/// Simulates the point over the dimensioning horizon and reports how far
/// the peak-hour fluid temperatures leave the allowed band. In a month
/// with heating load the heat pump peaks at q_max; in a month with cooling
/// load it peaks at the specific injection rate.
pub fn validate_operating_point(
    point: &OperatingPoint,
    design: &FieldDesign,
    ground: &GroundColumn,
    profile: &DegreeDayProfile,
    hp: &HpParams,
) -> Result<Validation, ThermalError> {
    let years = hp.t_dim.round().max(1.0) as usize;
    let loads = implied_loads(point, design, profile, years)?;
    let g = field_step_responses(&design.boreholes, design.depth, ground, loads.len())?;
    let drop = superpose(loads.loads(), &g);
    let t_g = thermal::undisturbed_ground_temperature(design.depth, ground);
    let rb = ground.borehole_resistance;
    let q_i = if point.q_inj > 0.0 && point.t_op_c > 0.0 {
        point.q_inj / (design.total_length() * point.t_op_c)
    } else {
        0.0
    };
    let mut min_heating = t_g;
    let mut max_cooling = t_g;
    for (m, d) in drop.iter().enumerate() {
        let month = m % 12;
        if profile.hdd[month] > 0.0 && point.q_max > 0.0 {
            min_heating = min_heating.min(t_g - d - point.q_max * rb);
        }
        if profile.cdd[month] > 0.0 && q_i > 0.0 {
            max_cooling = max_cooling.max(t_g - d + q_i * rb);
        }
    }
    let violation = (hp.t_mf_min - min_heating).max(max_cooling - hp.t_mf_max).max(0.0);
    Ok(Validation {
        min_heating,
        max_cooling,
        violation,
    })
}
