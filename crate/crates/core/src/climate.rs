//! Degree days, monthly load weights and operating-time bounds.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::ClimateError;
use crate::thermal::HOURS_PER_YEAR;

pub const HDD_BASE: f64 = 20.0;
pub const HDD_THRESHOLD: f64 = 12.0;
pub const CDD_BASE: f64 = 18.0;
/// Peak factor on the maximum monthly share.
pub const PEAK_FACTOR: f64 = 1.05;

const NON_LEAP_DAYS: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

/// Hours in calendar month `month` (0-based) of a non-leap year.
pub fn month_hours(month: usize) -> f64 {
    NON_LEAP_DAYS[month] as f64 * 24.0
}

pub fn heating_degrees(t: f64) -> f64 {
    if t <= HDD_THRESHOLD {
        HDD_BASE - t
    } else {
        0.0
    }
}

pub fn cooling_degrees(t: f64) -> f64 {
    if t >= CDD_BASE {
        t - CDD_BASE
    } else {
        0.0
    }
}

fn days_in_month(year: i32, month: u32) -> usize {
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    };
    let first = NaiveDate::from_ymd_opt(year, month, 1);
    match (first, next) {
        (Some(a), Some(b)) => (b - a).num_days() as usize,
        _ => 0,
    }
}

/// Sums a daily rule per calendar month, averaged over the years present.
/// Every (year, month) that appears must be complete.
fn monthly_sum(days: &[(NaiveDate, f64)], rule: fn(f64) -> f64) -> Result<[f64; 12], ClimateError> {
    let mut per_month: BTreeMap<(i32, u32), (BTreeMap<u32, f64>, f64)> = BTreeMap::new();
    for &(date, t) in days {
        if !t.is_finite() {
            return Err(ClimateError::NonFinite(date));
        }
        let entry = per_month.entry((date.year(), date.month())).or_default();
        if entry.0.insert(date.day(), t).is_some() {
            return Err(ClimateError::DuplicateDay(date));
        }
        entry.1 += rule(t);
    }
    let mut sums = [0.0; 12];
    let mut years = [0usize; 12];
    for (&(year, month), (seen, total)) in &per_month {
        let expected = days_in_month(year, month);
        if seen.len() != expected {
            return Err(ClimateError::IncompleteMonth {
                year,
                month,
                found: seen.len(),
                expected,
            });
        }
        sums[month as usize - 1] += total;
        years[month as usize - 1] += 1;
    }
    for (s, &n) in sums.iter_mut().zip(years.iter()) {
        if n > 0 {
            *s /= n as f64;
        }
    }
    Ok(sums)
}

/// Monthly heating degree days: Σ (20 − T) over days with T ≤ 12 °C.
pub fn compute_hdd(days: &[(NaiveDate, f64)]) -> Result<[f64; 12], ClimateError> {
    monthly_sum(days, heating_degrees)
}

/// Monthly cooling degree days: Σ (T − 18) over days with T ≥ 18 °C.
pub fn compute_cdd(days: &[(NaiveDate, f64)]) -> Result<[f64; 12], ClimateError> {
    monthly_sum(days, cooling_degrees)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadWeight {
    /// 1.05 · max / Σ
    pub w_max: f64,
    /// 0-based month of the maximum, earliest on ties.
    pub month: usize,
}

pub fn load_weights(monthly: &[f64; 12]) -> Result<LoadWeight, ClimateError> {
    let total: f64 = monthly.iter().sum();
    if !(total > 0.0) {
        return Err(ClimateError::NoLoadSeason);
    }
    let mut month = 0;
    for (i, &v) in monthly.iter().enumerate() {
        if v > monthly[month] {
            month = i;
        }
    }
    Ok(LoadWeight {
        w_max: PEAK_FACTOR * monthly[month] / total,
        month,
    })
}

/// Upper bound on full-load hours, t_m / w_max, capped at one year.
pub fn max_operating_time(w_max: f64, t_m: f64) -> f64 {
    (t_m / w_max).min(HOURS_PER_YEAR)
}

/// Seasonal load characteristics of one climate cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDayProfile {
    pub hdd: [f64; 12],
    pub cdd: [f64; 12],
    pub w_hdd_max: f64,
    /// Zero when the cell has no cooling season.
    pub w_cdd_max: f64,
    /// Hours in the month of maximum heating.
    pub t_m_heat: f64,
    /// Hours in the month of maximum cooling; zero without cooling season.
    pub t_m_cool: f64,
}

impl DegreeDayProfile {
    pub fn from_monthly(hdd: [f64; 12], cdd: [f64; 12]) -> Result<Self, ClimateError> {
        let heat = load_weights(&hdd)?;
        let (w_cdd_max, t_m_cool) = match load_weights(&cdd) {
            Ok(w) => (w.w_max, month_hours(w.month)),
            Err(ClimateError::NoLoadSeason) => (0.0, 0.0),
            Err(e) => return Err(e),
        };
        Ok(DegreeDayProfile {
            hdd,
            cdd,
            w_hdd_max: heat.w_max,
            w_cdd_max,
            t_m_heat: month_hours(heat.month),
            t_m_cool,
        })
    }

    pub fn from_daily(days: &[(NaiveDate, f64)]) -> Result<Self, ClimateError> {
        Self::from_monthly(compute_hdd(days)?, compute_cdd(days)?)
    }

    pub fn has_cooling_season(&self) -> bool {
        self.w_cdd_max > 0.0 && self.t_m_cool > 0.0
    }

    /// t_m / w_hdd,max capped at 8760 h.
    pub fn max_heating_hours(&self) -> f64 {
        max_operating_time(self.w_hdd_max, self.t_m_heat)
    }

    /// Cooling operating time t_op,c = t_m / w_cdd,max, zero without cooling season.
    pub fn cooling_hours(&self) -> f64 {
        if self.has_cooling_season() {
            max_operating_time(self.w_cdd_max, self.t_m_cool)
        } else {
            0.0
        }
    }

    /// A heating-dominated temperate profile (Swiss plateau-like) used by
    /// fixtures and the synthetic region.
    pub fn temperate() -> Self {
        let hdd = [
            500.0, 430.0, 380.0, 270.0, 120.0, 30.0, 0.0, 0.0, 60.0, 220.0, 370.0, 480.0,
        ];
        let cdd = [0.0, 0.0, 0.0, 0.0, 5.0, 25.0, 60.0, 50.0, 10.0, 0.0, 0.0, 0.0];
        Self::from_monthly(hdd, cdd).expect("fixture profile has a heating season")
    }
}

/// Regular grid of cell-center values, interpolated bilinearly.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureGrid {
    /// Center of cell (0, 0).
    pub origin: [f64; 2],
    pub pitch: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `values[iy * nx + ix]`.
    pub values: Vec<f64>,
}

impl TemperatureGrid {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    /// Bilinear interpolation between cell centers, clamped at the edges.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.origin[0]) / self.pitch).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((y - self.origin[1]) / self.pitch).clamp(0.0, (self.ny - 1) as f64);
        let ix = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let iy = (fy.floor() as usize).min(self.ny.saturating_sub(2));
        let tx = if self.nx > 1 { fx - ix as f64 } else { 0.0 };
        let ty = if self.ny > 1 { fy - iy as f64 } else { 0.0 };
        let ix1 = (ix + 1).min(self.nx - 1);
        let iy1 = (iy + 1).min(self.ny - 1);
        let v00 = self.value(ix, iy);
        let v10 = self.value(ix1, iy);
        let v01 = self.value(ix, iy1);
        let v11 = self.value(ix1, iy1);
        // convex-combination form is exact at t = 0 and t = 1
        let bottom = v00 * (1.0 - tx) + v10 * tx;
        let top = v01 * (1.0 - tx) + v11 * tx;
        bottom * (1.0 - ty) + top * ty
    }

    /// Resamples onto a finer grid covering the same centers.
    pub fn refine(&self, pitch: f64) -> TemperatureGrid {
        let width = (self.nx - 1) as f64 * self.pitch;
        let height = (self.ny - 1) as f64 * self.pitch;
        let nx = (width / pitch).round() as usize + 1;
        let ny = (height / pitch).round() as usize + 1;
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                values.push(self.interpolate(
                    self.origin[0] + ix as f64 * pitch,
                    self.origin[1] + iy as f64 * pitch,
                ));
            }
        }
        TemperatureGrid {
            origin: self.origin,
            pitch,
            nx,
            ny,
            values,
        }
    }
}
