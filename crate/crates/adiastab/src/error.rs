use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max asymmetry {max_asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { max_asymmetry: f64, tol: f64 },

    #[error("matrix is not positive semi-definite: smallest eigenvalue {min_eigenvalue:.3e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid grading: {0}")]
    InvalidGrading(String),

    #[error("block structure violated: {which} has norm {norm:.3e}, tolerance {tol:.3e}")]
    BlockStructure { which: String, norm: f64, tol: f64 },

    #[error("global ground state is degenerate (gap {gap:.3e} below cluster tolerance {tol:.3e})")]
    DegenerateGroundState { gap: f64, tol: f64 },

    #[error("Cheeger numerator has imaginary part {imag:.3e} beyond tolerance {tol:.3e}")]
    NonRealCheeger { imag: f64, tol: f64 },

    #[error("local gap collapsed: {which} = {gap:.3e}")]
    GapCollapse { which: String, gap: f64 },

    #[error("perturbation too large: eta = {eta:.3e} <= 0 (|Delta_perp| exceeds the smaller local gap)")]
    PerturbationTooLarge { eta: f64 },

    #[error("bound inapplicable: c = {c:.3e} >= 1")]
    CNotBelowOne { c: f64 },

    #[error("mu-cluster of H' collides with other eigenvalues: kernel dimension {found}, expected {expected}")]
    ClusterCollision { found: usize, expected: usize },

    #[error("integrator exceeded the step budget of {max_steps} steps; increase the tolerance or the budget")]
    StepBudget { max_steps: u64 },

    #[error("dimension {dim} exceeds the exhaustive cut-search limit {max_dim}; pass an explicit cut")]
    CutSearchTooLarge { dim: usize, max_dim: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
