//! Error types shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by model evaluation, solving and sizing.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root solver ran out of iterations. Carries the final bracket so the
    /// failure can be diagnosed (and distinguished from infeasibility).
    #[error(
        "solver failed to converge after {iterations} iterations; \
         bracket [{lo:.6e}, {hi:.6e}], residual {residual:.3e}"
    )]
    SolverFailure {
        lo: f64,
        hi: f64,
        iterations: usize,
        residual: f64,
    },

    /// The design point admits no equilibrium (the self-consistency equation
    /// has no positive solution). Reported distinctly so sweeps can prune.
    #[error("infeasible design: {0}")]
    InfeasibleDesign(String),

    /// The reverse inversion level of M1 would fall below the solver floor,
    /// i.e. M1 is effectively saturated. Distinct from solver failure.
    #[error("M1 effectively saturated: required beta below floor {floor:.1e}")]
    M1Saturated { floor: f64 },

    /// alpha - beta collapsed, so the aspect-ratio relation blows up.
    #[error("near-degenerate design: alpha - beta = {gap:.3e} too small to size")]
    DegenerateDesign { gap: f64 },

    /// A lookup-table query or target fell outside the tabulated range.
    #[error("lookup table: {0}")]
    LutRange(String),

    /// Malformed input data (CSV tables, grids, fit inputs).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
