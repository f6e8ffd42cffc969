//! Analytic ground heat-transfer primitives.
//!
//! Every borehole is a finite line source of length `H` buried at the
//! surface, with a negative image source above the surface to hold the
//! surface isothermal. The temperature response is averaged over the
//! receiving borehole's depth, which gives the classic integral form
//!
//! ```text
//!   ΔT/q = 1/(4πλ) ∫_{1/√(4αt)}^∞ exp(-r²s²) / (H s²) · [4·ierf(Hs) − ierf(2Hs)] ds
//!   ierf(x) = x·erf(x) − (1 − exp(-x²))/√π
//! ```
//!
//! evaluated in `ln s` with adaptive Gauss–Kronrod quadrature. Responses at
//! several distances share the depth factor, so field sums are evaluated as a
//! single weighted integral.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ThermalError;
use crate::quadrature;

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const HOURS_PER_YEAR: f64 = 8760.0;
pub const SECONDS_PER_YEAR: f64 = HOURS_PER_YEAR * SECONDS_PER_HOUR;
pub const HOURS_PER_MONTH: f64 = HOURS_PER_YEAR / 12.0;

/// Minimum spacing between two boreholes of a field, m.
pub const MIN_SPACING: f64 = 5.0;

/// The surface boundary used by the kernel. Only the isothermal (image
/// source) formulation is implemented.
pub const SURFACE_BOUNDARY: &str = "isothermal";

// Tolerance on the dimensionless integral. Independent of λ so that the
// 1/λ prefactor scales results exactly; for λ ≥ 0.5 W/(m·K) the resulting
// resistance error stays below 1e-8 m·K/W, well inside 1e-4.
const INTEGRAL_TOL: f64 = 1e-7;
// range cut-off: exp(-81) is far below any tolerance
const TAIL_EXPONENT: f64 = 9.0;
const MAX_SEGMENTS: usize = 400;
const SEASONAL_MONTHS: usize = 36;

/// Per-cell ground properties and norm parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundColumn {
    /// Thermal conductivity, W/(m·K).
    pub lambda: f64,
    /// Thermal diffusivity, m²/s.
    pub alpha: f64,
    /// Ground surface temperature, °C.
    pub surface_temperature: f64,
    /// Vertical temperature gradient, K/m.
    pub gradient: f64,
    /// Nominal extraction rate per simulated depth, (m, W/m), sorted by depth.
    pub nominal_rates: Vec<(f64, f64)>,
    /// Maximum allowed drilling depth, m. Zero means prohibited.
    pub max_depth: f64,
    /// Borehole thermal resistance R_b*, m·K/W.
    pub borehole_resistance: f64,
    /// Borehole radius, m.
    pub borehole_radius: f64,
}

impl Default for GroundColumn {
    fn default() -> Self {
        Self::reference()
    }
}

impl GroundColumn {
    /// Reference ground used throughout the test fixtures.
    pub fn reference() -> Self {
        GroundColumn {
            lambda: 2.0,
            alpha: 1.0e-6,
            surface_temperature: 11.0,
            gradient: 0.03,
            nominal_rates: vec![(50.0, 40.0), (100.0, 40.0), (150.0, 40.0), (200.0, 40.0)],
            max_depth: 200.0,
            borehole_resistance: 0.10,
            borehole_radius: 0.06,
        }
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        for (name, value) in [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("surface_temperature", self.surface_temperature),
            ("gradient", self.gradient),
            ("max_depth", self.max_depth),
            ("borehole_resistance", self.borehole_resistance),
            ("borehole_radius", self.borehole_radius),
        ] {
            finite(name, value)?;
        }
        positive("lambda", self.lambda)?;
        positive("alpha", self.alpha)?;
        positive("borehole_radius", self.borehole_radius)?;
        if self.borehole_resistance < 0.0 {
            return Err(ThermalError::OutOfRange {
                name: "borehole_resistance",
                requirement: "non-negative",
                value: self.borehole_resistance,
            });
        }
        if self.max_depth < 0.0 {
            return Err(ThermalError::OutOfRange {
                name: "max_depth",
                requirement: "non-negative",
                value: self.max_depth,
            });
        }
        Ok(())
    }

    /// Nominal extraction rate q_nom for a simulated depth.
    pub fn nominal_rate(&self, depth: f64) -> Result<f64, ThermalError> {
        self.nominal_rates
            .iter()
            .find(|(d, _)| (d - depth).abs() < 1e-9)
            .map(|&(_, q)| q)
            .ok_or(ThermalError::MissingNominalRate { depth })
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

/// Long-term, field and seasonal thermal resistances of a design.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResistanceSet {
    pub long_term: f64,
    pub field: f64,
    pub seasonal: f64,
}

impl ResistanceSet {
    /// R_LT + R_field − R_seas.
    pub fn net_long_term(&self) -> f64 {
        self.long_term + self.field - self.seasonal
    }
}

fn finite(name: &'static str, value: f64) -> Result<(), ThermalError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ThermalError::NonFinite { name, value })
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ThermalError> {
    finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(ThermalError::OutOfRange {
            name,
            requirement: "positive",
            value,
        })
    }
}

/// ierf(x) = x·erf(x) − (1 − e^{-x²})/√π
fn ierf(x: f64) -> f64 {
    x * libm::erf(x) - (1.0 - (-x * x).exp()) / PI.sqrt()
}

/// Depth factor 4·ierf(x) − ierf(2x) of the mean-temperature kernel.
fn depth_factor(x: f64) -> f64 {
    if x < 0.1 {
        // the x² terms cancel; use the series
        // Σ_{n≥1} (-1)^n (4 - 4^{n+1}) x^{2n+2} / (n! (2n+1)(n+1) √π)
        let x2 = x * x;
        let mut sum = 0.0;
        let mut power = x2 * x2; // x^{2n+2} for n = 1
        let mut factorial = 1.0;
        let mut four_pow = 16.0; // 4^{n+1}
        for n in 1..10 {
            let nf = n as f64;
            factorial *= nf;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (4.0 - four_pow) * power / (factorial * (2.0 * nf + 1.0) * (nf + 1.0));
            power *= x2;
            four_pow *= 4.0;
        }
        sum / PI.sqrt()
    } else {
        4.0 * ierf(x) - ierf(2.0 * x)
    }
}

/// Weighted sum of finite-line-source responses sharing one depth and time:
/// Σ_k w_k · ΔT/q(r_k, H, t). Zero at `t = 0`.
pub fn fls_weighted(
    terms: &[(f64, f64)],
    depth: f64,
    seconds: f64,
    ground: &GroundColumn,
) -> Result<f64, ThermalError> {
    positive("depth", depth)?;
    finite("time", seconds)?;
    if seconds < 0.0 {
        return Err(ThermalError::OutOfRange {
            name: "time",
            requirement: "non-negative",
            value: seconds,
        });
    }
    positive("lambda", ground.lambda)?;
    positive("alpha", ground.alpha)?;
    let mut min_distance = f64::INFINITY;
    for &(r, w) in terms {
        positive("distance", r)?;
        finite("weight", w)?;
        min_distance = min_distance.min(r);
    }
    if terms.is_empty() || seconds == 0.0 {
        return Ok(0.0);
    }

    let s_lo = 1.0 / (4.0 * ground.alpha * seconds).sqrt();
    let s_hi = TAIL_EXPONENT / min_distance;
    if s_lo >= s_hi {
        return Ok(0.0);
    }
    let integrand = |u: f64| {
        let s = u.exp();
        let radial: f64 = terms.iter().map(|&(r, w)| w * (-(r * s) * (r * s)).exp()).sum();
        radial * depth_factor(depth * s) / (depth * s)
    };
    let integral = quadrature::integrate(
        integrand,
        s_lo.ln(),
        s_hi.ln(),
        INTEGRAL_TOL,
        1e-10,
        MAX_SEGMENTS,
    );
    Ok(integral / (4.0 * PI * ground.lambda))
}

/// Mean-over-depth temperature response per unit line load (m·K/W) at radial
/// distance `r` after `seconds` of constant extraction.
pub fn fls_step_response(
    r: f64,
    depth: f64,
    seconds: f64,
    ground: &GroundColumn,
) -> Result<f64, ThermalError> {
    finite("distance", r)?;
    fls_weighted(&[(r, 1.0)], depth, seconds, ground)
}

fn horizon_seconds(t_dim_years: f64) -> Result<f64, ThermalError> {
    finite("t_dim", t_dim_years)?;
    if t_dim_years < 0.0 {
        return Err(ThermalError::OutOfRange {
            name: "t_dim",
            requirement: "non-negative",
            value: t_dim_years,
        });
    }
    Ok(t_dim_years * SECONDS_PER_YEAR)
}

/// Long-term resistance of a single borehole: the step response at the
/// borehole wall after `t_dim_years`.
pub fn compute_r_lt(depth: f64, ground: &GroundColumn, t_dim_years: f64) -> Result<f64, ThermalError> {
    let t = horizon_seconds(t_dim_years)?;
    fls_step_response(ground.borehole_radius, depth, t, ground)
}

/// Pairwise distance histogram of a borehole set, as `(distance, weight)`
/// with weight = ordered-pair count / N. Distances are merged at 1 µm.
pub fn pair_distance_weights(boreholes: &[[f64; 2]]) -> Vec<(f64, f64)> {
    let n = boreholes.len();
    if n < 2 {
        return Vec::new();
    }
    let mut histogram: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = boreholes[i][0] - boreholes[j][0];
            let dy = boreholes[i][1] - boreholes[j][1];
            let d = (dx * dx + dy * dy).sqrt();
            let key = (d * 1e6).round() as i64;
            let entry = histogram.entry(key).or_insert((d, 0));
            entry.1 += 2;
        }
    }
    histogram
        .into_values()
        .map(|(d, count)| (d, count as f64 / n as f64))
        .collect()
}

/// Mean over boreholes of the summed response to every other borehole of the
/// field after `t_dim_years`.
pub fn field_resistance(
    boreholes: &[[f64; 2]],
    depth: f64,
    ground: &GroundColumn,
    t_dim_years: f64,
) -> Result<f64, ThermalError> {
    let t = horizon_seconds(t_dim_years)?;
    let weights = pair_distance_weights(boreholes);
    fls_weighted(&weights, depth, t, ground)
}

/// Coordinates of a `rows × cols` rectangular grid with pitch `spacing`.
pub fn rectangular_grid(spacing: f64, rows: usize, cols: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push([j as f64 * spacing, i as f64 * spacing]);
        }
    }
    out
}

/// Field interference resistance of a rectangular grid.
pub fn compute_r_field(
    spacing: f64,
    depth: f64,
    rows: usize,
    cols: usize,
    ground: &GroundColumn,
    t_dim_years: f64,
) -> Result<f64, ThermalError> {
    finite("spacing", spacing)?;
    if spacing < MIN_SPACING {
        return Err(ThermalError::SpacingTooSmall {
            spacing,
            minimum: MIN_SPACING,
        });
    }
    if rows == 0 || cols == 0 {
        return Err(ThermalError::OutOfRange {
            name: "grid size",
            requirement: "at least 1x1",
            value: (rows.min(cols)) as f64,
        });
    }
    field_resistance(&rectangular_grid(spacing, rows, cols), depth, ground, t_dim_years)
}

/// Unit-amplitude monthly sinusoid used for the seasonal resistance.
pub fn seasonal_load(month: usize) -> f64 {
    (2.0 * PI * (month as f64 + 0.5) / 12.0).sin()
}

/// Seasonal resistance: the peak borehole-wall response to a unit-amplitude
/// sinusoidal line load of one-year period, by monthly step superposition
/// over three years, maximum taken over the third year.
pub fn compute_r_seas(depth: f64, ground: &GroundColumn) -> Result<f64, ThermalError> {
    seasonal_peak(depth, ground, 1.0)
}

pub(crate) fn seasonal_peak(depth: f64, ground: &GroundColumn, amplitude: f64) -> Result<f64, ThermalError> {
    positive("depth", depth)?;
    finite("amplitude", amplitude)?;
    let step = HOURS_PER_MONTH * SECONDS_PER_HOUR;
    let responses = (1..=SEASONAL_MONTHS)
        .map(|lag| fls_step_response(ground.borehole_radius, depth, lag as f64 * step, ground))
        .collect::<Result<Vec<_>, _>>()?;
    let loads: Vec<f64> = (0..SEASONAL_MONTHS).map(|m| amplitude * seasonal_load(m)).collect();
    let mut peak = 0.0_f64;
    for m in 0..SEASONAL_MONTHS {
        let mut value = 0.0;
        let mut previous = 0.0;
        for (k, &q) in loads.iter().enumerate().take(m + 1) {
            value += (q - previous) * responses[m - k];
            previous = q;
        }
        if m >= 24 {
            peak = peak.max(value);
        }
    }
    Ok(peak)
}

/// All three resistances of a placed field.
pub fn resistances(
    boreholes: &[[f64; 2]],
    depth: f64,
    ground: &GroundColumn,
    t_dim_years: f64,
) -> Result<ResistanceSet, ThermalError> {
    Ok(ResistanceSet {
        long_term: compute_r_lt(depth, ground, t_dim_years)?,
        field: field_resistance(boreholes, depth, ground, t_dim_years)?,
        seasonal: compute_r_seas(depth, ground)?,
    })
}

/// Undisturbed ground temperature at half the borehole depth, °C.
pub fn undisturbed_ground_temperature(depth: f64, ground: &GroundColumn) -> f64 {
    ground.surface_temperature + ground.gradient * depth / 2.0
}
