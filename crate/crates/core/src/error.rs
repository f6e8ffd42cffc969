use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analytic ground model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermalError {
    #[error("non-finite input: {name} = {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("{name} must be {requirement}, got {value}")]
    OutOfRange {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("borehole spacing {spacing} m is below the minimum of {minimum} m")]
    SpacingTooSmall { spacing: f64, minimum: f64 },
    #[error("no nominal extraction rate configured for depth {depth} m")]
    MissingNominalRate { depth: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClimateError {
    #[error("month {year}-{month:02} has {found} of {expected} days")]
    IncompleteMonth {
        year: i32,
        month: u32,
        found: usize,
        expected: usize,
    },
    #[error("duplicate day {0}")]
    DuplicateDay(chrono::NaiveDate),
    #[error("non-finite temperature on {0}")]
    NonFinite(chrono::NaiveDate),
    #[error("profile has no load season")]
    NoLoadSeason,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SizingError {
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error("operating time {name} = {value} h outside [0, 8760]")]
    OperatingTime { name: &'static str, value: f64 },
    #[error("net long-term resistance is negative ({0} m·K/W): R_seas exceeds R_LT + R_field")]
    NegativeNetResistance(f64),
    #[error("heat injection of {0} Wh/y requested with zero cooling operating time")]
    InjectionWithoutCoolingTime(f64),
    #[error("negative or non-finite energy: {name} = {value}")]
    InvalidEnergy { name: &'static str, value: f64 },
    #[error("no candidate designs")]
    NoDesigns,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("polygon ring needs at least 3 vertices, got {0}")]
    DegenerateRing(usize),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("negative demand {0} Wh/y")]
    NegativeDemand(f64),
    #[error("borehole spacing {0} m is below the minimum of 5 m")]
    SpacingTooSmall(f64),
    #[error("capacity list length {capacities} does not match parcel count {parcels}")]
    LengthMismatch { parcels: usize, capacities: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("capacity of {vertex} is not a finite non-negative number: {value}")]
    InvalidCapacity { vertex: String, value: f64 },
    #[error("edge references unknown vertex {0}")]
    UnknownVertex(String),
}

/// Errors surfaced by file IO and orchestration. Schema problems map to
/// exit code 2, infeasible configuration to exit code 3.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    SchemaAt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Sizing(#[from] SizingError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error(transparent)]
    Climate(#[from] ClimateError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error("{0}")]
    Other(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Schema { .. }
            | PipelineError::SchemaAt { .. }
            | PipelineError::Climate(_) => 2,
            PipelineError::InfeasibleConfig(_) => 3,
            _ => 1,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        PipelineError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }
}
