//! Run manifest (TOML). Relative paths resolve against the manifest's
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocation::ThresholdRule;
use crate::error::PipelineError;
use crate::geospatial::{PixelGrid, DEFAULT_BUFFER};
use crate::sizing::HpParams;
use crate::thermal::GroundColumn;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionFiles {
    pub parcels: PathBuf,
    pub buildings: PathBuf,
    #[serde(default)]
    pub dhc: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizingConfig {
    /// Minimum distance of a borehole to the area boundary, m.
    pub buffer: f64,
    /// (altitude upper bound m, nominal heating hours h), ascending.
    pub t_nom: Vec<[f64; 2]>,
    /// Altitude of parcels without one, m.
    pub default_altitude: f64,
}

impl Default for SizingConfig {
    fn default() -> Self {
        SizingConfig {
            buffer: DEFAULT_BUFFER,
            t_nom: vec![[600.0, 1800.0], [1000.0, 1900.0], [9000.0, 2000.0]],
            default_altitude: 450.0,
        }
    }
}

impl SizingConfig {
    /// Nominal heating hours at an altitude; above the table the last entry.
    pub fn nominal_hours(&self, altitude: f64) -> f64 {
        self.t_nom
            .iter()
            .find(|e| altitude <= e[0])
            .or(self.t_nom.last())
            .map(|e| e[1])
            .unwrap_or(1900.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    /// mean ± 1.96·s/√n
    #[default]
    Normal,
    /// empirical 2.5 % and 97.5 % quantiles of the run totals
    Percentile,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub ci: CiMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub region: RegionFiles,
    pub grid: PixelGrid,
    #[serde(default)]
    pub ground: GroundColumn,
    #[serde(default)]
    pub heat_pump: HpParams,
    #[serde(default)]
    pub sizing: SizingConfig,
    #[serde(default)]
    pub allocation: ThresholdRule,
    /// Daily temperature file per climate key (`baseline`, `rcp26`, ...).
    pub climate: BTreeMap<String, PathBuf>,
    /// Cooling-demand runs per key such as `PC-4.5`.
    #[serde(default)]
    pub cooling: BTreeMap<String, Vec<PathBuf>>,
    #[serde(default)]
    pub report: ReportConfig,
    /// Scenario labels run when none is given on the command line.
    #[serde(default)]
    pub scenarios: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut m: Manifest = toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1));
            match line {
                Some(line) => PipelineError::SchemaAt {
                    path: path.to_path_buf(),
                    line,
                    message: e.message().to_string(),
                },
                None => PipelineError::schema(path, e.message()),
            }
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve(base);
        m.validate().map_err(|msg| PipelineError::schema(path, msg))?;
        Ok(m)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.region.parcels);
        fix(&mut self.region.buildings);
        if let Some(d) = self.region.dhc.as_mut() {
            fix(d);
        }
        self.climate.values_mut().for_each(fix);
        self.cooling.values_mut().flat_map(|v| v.iter_mut()).for_each(fix);
    }

    pub fn validate(&self) -> Result<(), String> {
        let g = &self.grid;
        if !(g.pitch > 0.0) || g.nx == 0 || g.ny == 0 || !g.origin.iter().all(|v| v.is_finite()) {
            return Err("grid needs a positive pitch and at least one cell".into());
        }
        self.ground.validate().map_err(|e| e.to_string())?;
        let hp = &self.heat_pump;
        if !(hp.cop_heat > 1.0 && hp.cop_cool > 1.0) {
            return Err("heat pump COPs must exceed 1".into());
        }
        if !(hp.t_mf_min < hp.t_mf_max) || !(hp.t_dim > 0.0) {
            return Err("fluid limits must satisfy t_mf_min < t_mf_max and t_dim > 0".into());
        }
        if !(self.allocation.fraction > 0.0 && self.allocation.fraction <= 1.0) {
            return Err("allocation fraction must lie in (0, 1]".into());
        }
        let s = &self.sizing;
        if s.t_nom.is_empty() || s.t_nom.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err("t_nom table must be non-empty with ascending altitudes".into());
        }
        if s.t_nom.iter().any(|e| !(e[1] > 0.0 && e[1] <= 8760.0)) {
            return Err("t_nom hours must lie in (0, 8760]".into());
        }
        if !(s.buffer >= 0.0) {
            return Err("buffer must be non-negative".into());
        }
        if !self.climate.contains_key("baseline") {
            return Err("climate.baseline is required".into());
        }
        Ok(())
    }
}
