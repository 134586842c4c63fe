use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatError {
    #[error("not a cat map: [[{0}, {1}], [{2}, {3}]] (need det 1 and |trace| > 2)")]
    NotCat(i64, i64, i64, i64),
    #[error("state spaces differ: N={0} vs N={1} or kappa mismatch")]
    MismatchedParams(usize, usize),
    #[error("polynomial degree {degree} is too large for N={n}")]
    DegreeTooLarge { degree: usize, n: usize },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("kappa ({0}, {1}) is not admissible: the intertwiner space is trivial")]
    ZeroProjection(f64, f64),
    #[error("projection produced a singular matrix after {0} attempts")]
    NonUnitaryResult(usize),
    #[error("input is not unitary (residual {0:e})")]
    NotUnitary(f64),
    #[error("eigendecomposition failed: {0}")]
    Decomposition(String),
    #[error("no integer lift of the commutant element preserves the state space")]
    NoAdmissibleLift,
    #[error("random combination failed to separate joint eigenspaces after {0} retries")]
    DegenerateCombination(usize),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, CatError>;
