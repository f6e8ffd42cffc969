//! Scenario labels such as `NC-ND`, `PC-ND-4.5` or `FC-D-8.5`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoolingLevel {
    /// No cooling.
    NC,
    /// Partial cooling.
    PC,
    /// Full cooling.
    FC,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Climate {
    Rcp26,
    Rcp45,
    Rcp85,
}

impl Climate {
    pub const ALL: [Climate; 3] = [Climate::Rcp26, Climate::Rcp45, Climate::Rcp85];

    pub fn suffix(&self) -> &'static str {
        match self {
            Climate::Rcp26 => "2.6",
            Climate::Rcp45 => "4.5",
            Climate::Rcp85 => "8.5",
        }
    }

    /// Key used in manifests, e.g. `rcp45`.
    pub fn key(&self) -> &'static str {
        match self {
            Climate::Rcp26 => "rcp26",
            Climate::Rcp45 => "rcp45",
            Climate::Rcp85 => "rcp85",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub cooling: CoolingLevel,
    /// `None` exactly when there is no cooling.
    pub climate: Option<Climate>,
    pub dhc: bool,
}

impl ScenarioSpec {
    pub fn new(cooling: CoolingLevel, climate: Option<Climate>, dhc: bool) -> Result<Self, String> {
        match (cooling, climate) {
            (CoolingLevel::NC, Some(_)) => Err("a no-cooling scenario carries no climate".into()),
            (CoolingLevel::PC | CoolingLevel::FC, None) => Err("a cooling scenario needs a climate".into()),
            _ => Ok(ScenarioSpec { cooling, climate, dhc }),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Key of the cooling-demand runs, e.g. `PC-4.5`; `None` without cooling.
    pub fn cooling_key(&self) -> Option<String> {
        self.climate.map(|c| format!("{:?}-{}", self.cooling, c.suffix()))
    }

    pub fn with_dhc(self, dhc: bool) -> Self {
        ScenarioSpec { dhc, ..self }
    }

    /// The seven cooling/climate combinations without district networks.
    pub fn standard() -> Vec<ScenarioSpec> {
        let mut out = vec![ScenarioSpec {
            cooling: CoolingLevel::NC,
            climate: None,
            dhc: false,
        }];
        for cooling in [CoolingLevel::PC, CoolingLevel::FC] {
            for c in Climate::ALL {
                out.push(ScenarioSpec {
                    cooling,
                    climate: Some(c),
                    dhc: false,
                });
            }
        }
        out
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}-{}", self.cooling, if self.dhc { "D" } else { "ND" })?;
        if let Some(c) = self.climate {
            write!(f, "-{}", c.suffix())?;
        }
        Ok(())
    }
}

impl FromStr for ScenarioSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split('-').collect();
        let bad = || format!("invalid scenario label '{s}'");
        if parts.len() < 2 || parts.len() > 3 {
            return Err(bad());
        }
        let cooling = match parts[0] {
            "NC" => CoolingLevel::NC,
            "PC" => CoolingLevel::PC,
            "FC" => CoolingLevel::FC,
            _ => return Err(bad()),
        };
        let dhc = match parts[1] {
            "D" => true,
            "ND" => false,
            _ => return Err(bad()),
        };
        let climate = match parts.get(2) {
            None => None,
            Some(&"2.6") => Some(Climate::Rcp26),
            Some(&"4.5") => Some(Climate::Rcp45),
            Some(&"8.5") => Some(Climate::Rcp85),
            Some(_) => return Err(bad()),
        };
        ScenarioSpec::new(cooling, climate, dhc).map_err(|e| format!("{}: {e}", bad()))
    }
}
