use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{field}`: {message}")]
    Validation { field: &'static str, message: String },

    #[error("grid size {grid} is below the anti-aliasing floor 4M+1 = {minimum}; use grid >= {minimum}")]
    GridTooSmall { grid: usize, minimum: usize },

    #[error("basis mismatch: expected M = {expected}, found M = {found}")]
    BasisMismatch { expected: usize, found: usize },

    #[error("Bessel J_{order}({argument}) outside the supported range")]
    BesselRange { order: i64, argument: f64 },

    #[error("distribution has no probability mass inside the basis")]
    EmptyDistribution,

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("degenerate fit window [{first}, {last}] for a series of {len} records")]
    DegenerateWindow { first: usize, last: usize, len: usize },

    #[error("unsupported free Hamiltonian: {0}")]
    UnsupportedHamiltonian(String),

    #[error("branch budget exceeded at kick {kick}: {branches} branches > budget {budget}")]
    BranchBudget { kick: usize, branches: usize, budget: usize },

    #[error("leak budget exceeded after kick {last_valid}: leak {leak:e} > budget {budget:e}")]
    LeakBudget { last_valid: usize, leak: f64, budget: f64 },

    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),

    #[error("prerequisite violated: {0}")]
    Prerequisite(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no results to report")]
    EmptyResults,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: &'static str, message: impl Into<String>) -> Self {
        Error::Validation {
            field,
            message: message.into(),
        }
    }

    /// Process exit status for the CLI: 2 config, 3 numerical budget, 4 invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::GridTooSmall { .. } | Error::Config(_) => 2,
            Error::BranchBudget { .. } | Error::LeakBudget { .. } => 3,
            Error::Invariant(_) | Error::Prerequisite(_) => 4,
            _ => 1,
        }
    }
}
