//! Mobility-parameter optimisation toolkit.
//!
//! A small LTE-like network snapshot is simulated under different Cell
//! Individual Offset (CIO) and Handover Margin (HOM) settings on three target
//! sectors. The resulting `config -> mean SINR` table trains regression
//! surrogates, which a real-coded genetic algorithm then maximises. A
//! brute-force lattice scan serves as the exact baseline.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`scenario`] builds the network and evaluates the mean-SINR KPI.
//! * [`datagen`] enumerates parameter grids and runs sweeps.
//! * [`surrogate`] fits and evaluates the regression models.
//! * [`genopt`] hosts the genetic algorithm and the brute-force baseline.
//! * [`pipeline`] chains all stages with artifact caching.

pub mod datagen;
pub mod error;
pub mod genopt;
pub mod pipeline;
pub mod scenario;
pub mod surrogate;

pub use error::{CopError, Result};
pub use scenario::MobilityConfig;
