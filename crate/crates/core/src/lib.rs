//! Mean-field stochastic PDE laboratory on a Galerkin sine basis.
//!
//! The crate simulates interacting-particle approximations of mean-field
//! SPDEs, measures transport distances between ensembles, and runs the
//! coupling, mixing and limit-theorem experiments exposed by the `mvlab`
//! command-line tool.

pub mod assignment;
pub mod config;
pub mod coupling;
pub mod ergodic;
pub mod error;
pub mod exec;
pub mod limit;
pub mod lyapunov;
pub mod measure;
pub mod model;
pub mod noise;
pub mod particle;
pub mod runner;
pub mod selftest;
pub mod stats;
pub mod table;

pub use error::{Error, Result};
pub use lyapunov::{LyapunovSpec, Profile};
pub use measure::EmpiricalMeasure;
pub use model::{MeasureSummary, SpectralModel};
pub use noise::NoiseStream;
