use thiserror::Error;

use crate::lvs::EquilibriumReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown genotype `{0}`")]
    UnknownGenotype(String),

    #[error("unknown phenotype `{0}`")]
    UnknownPhenotype(String),

    #[error("malformed trait `{0}` (expected \"genotype,phenotype\")")]
    MalformedTrait(String),

    #[error("trait index {0} is outside the trait space")]
    TraitOutOfRange(usize),

    #[error("invalid trait space: {0}")]
    InvalidTraitSpace(String),

    #[error("model violates {count} invariant(s): {first}")]
    InvalidModel { count: usize, first: String },

    #[error("genotype `{genotype}` has a transient switch class {class:?}")]
    NonRecurrent { genotype: String, class: Vec<String> },

    #[error("support is not closed under phenotypic switching (missing {missing})")]
    SupportNotClosed { missing: String },

    #[error("mutant `{0}` shares its switch class with the resident support")]
    MutantInResidentClass(String),

    #[error("population is absorbed: every event rate is zero")]
    Absorbed,

    #[error("ODE step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("no equilibrium reached: residual {} after t = {}", .0.residual, .0.time)]
    NonConvergence(Box<EquilibriumReport>),

    #[error("target equilibrium is not strictly stable (rightmost eigenvalue real part {0:e})")]
    UnstableTarget(f64),

    #[error("generator matrix is not irreducible (min eigenvector entry {0:e})")]
    NonIrreducible(f64),

    #[error("Perron root {power} disagrees with dense eigensolver {dense}")]
    EigenMismatch { power: f64, dense: f64 },

    #[error("fixed-point iteration did not converge within {0} iterations")]
    IterationLimit(usize),

    #[error("population went extinct")]
    Extinct,

    #[error("no mutation can occur from the current state")]
    NoMutation,

    #[error("model file: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::NonConvergence(_)
                | Error::UnstableTarget(_)
                | Error::NonIrreducible(_)
                | Error::EigenMismatch { .. }
                | Error::IterationLimit(_)
                | Error::Extinct
        )
    }

    /// Violations of the model's structural assumptions.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel { .. }
                | Error::NonRecurrent { .. }
                | Error::SupportNotClosed { .. }
                | Error::MutantInResidentClass(_)
        )
    }
}
