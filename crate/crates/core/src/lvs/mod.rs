//! Deterministic large-population dynamics: the mutation ODE, the plastic
//! Lotka-Volterra system on a closed support, and its equilibria.

mod dopri;
mod equilibrium;
mod field;

pub use dopri::{integrate, sample_grid, Dopri5, OdeOptions, OdeTrajectory};
pub use equilibrium::{
    check_coexistence, find_equilibrium, find_lvs_equilibrium, EquilibriumOptions, EquilibriumReport,
};
pub use field::{vector_field_full, vector_field_lvs, PlasticField, VectorField};
