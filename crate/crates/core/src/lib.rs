//! Individual-based populations with phenotypic plasticity: exact stochastic
//! simulation, the deterministic limit, branching-process invasion fitness
//! and the rare-mutation jump process.

pub mod error;
pub mod branching;
pub mod cli;
pub mod fixtures;
pub mod linalg;
pub mod lvs;
pub mod micro;
pub mod mc;
pub mod model;
pub mod model_file;
pub mod output;
pub mod pesp;
pub mod phenotype_graph;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use model::{validate_model, DensityVector, ModelParams, PopulationState, Trait, TraitSpace};
