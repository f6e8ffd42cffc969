//! Regional potential of shallow ground-source heat pumps with seasonal
//! regeneration, and allocation of surplus potential to district heating.

pub mod allocation;
pub mod climate;
pub mod config;
pub mod error;
pub mod geometry;
pub mod geospatial;
pub mod io;
pub mod oracle_sim;
pub mod pipeline;
pub mod scenario;
pub mod synth;
pub mod quadrature;
pub mod sizing;
pub mod thermal;

pub use error::*;
pub use thermal::{GroundColumn, ResistanceSet};
