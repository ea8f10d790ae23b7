//! Deterministic simulator of host genomes, their microbiota and a host
//! phenotype across generations of selection.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod composition;
pub mod config;
pub mod error;
pub mod genome;
pub mod io;
pub mod microbiome;
pub mod orchestrator;
pub mod phenotype;
pub mod reporting;
pub mod rng;
pub mod scalar;
pub mod selection;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Composition = composition::Composition<f64>;
pub type ClrVector = composition::ClrVector<f64>;
pub type Simulation = orchestrator::Simulation<f64>;
pub type GenerationRecord = orchestrator::GenerationRecord<f64>;
pub type EffectsModel = orchestrator::EffectsModel<f64>;
pub type PhenotypeModel = phenotype::PhenotypeModel<f64>;
pub type BreedingValues = phenotype::BreedingValues<f64>;
pub type BetaMatrix = microbiome::BetaMatrix<f64>;

pub use config::ScenarioConfig;
pub use io::BaseInputs;
pub use orchestrator::{run_replicates, run_replicates_with, run_simulation};
