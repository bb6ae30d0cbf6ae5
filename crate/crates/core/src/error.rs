use thiserror::Error;

/// Library-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("state must have at least two parties, got {0}")]
    TooFewParties(usize),

    #[error("every local dimension must be at least 2, got dims {0:?}")]
    BadDimension(Vec<usize>),

    #[error("amplitude vector has length {got}, expected product of dims = {expected}")]
    AmplitudeLength { got: usize, expected: usize },

    #[error("state has zero norm")]
    ZeroState,

    #[error("state is not normalized: |norm - 1| = {0:.3e}")]
    NotNormalized(f64),

    #[error("party index {party} out of range 1..={n}")]
    PartyOutOfRange { party: usize, n: usize },

    #[error("local vector for party {party} has {got} components, expected {expected}")]
    LocalDimension {
        party: usize,
        got: usize,
        expected: usize,
    },

    #[error("product vector has {got} factors, expected {expected}")]
    FactorCount { got: usize, expected: usize },

    #[error("conditional vector needs every party except {skip} fixed; party {missing} is missing")]
    MissingFactor { skip: usize, missing: usize },

    #[error("subset mask {mask:#b} is not a proper subset for n = {n}")]
    NotProperSubset { mask: u32, n: usize },

    #[error("closest-product search did not reach stationarity: max residual {residual:.3e} > {threshold:.3e} after {sweeps} sweeps")]
    NotStationary {
        residual: f64,
        threshold: f64,
        sweeps: usize,
    },

    #[error("entanglement verdicts disagree: overlap test says {overlap_verdict}, support scan says {support_verdict} (overlap = {overlap:.12}); the optimizer may be stuck at a non-global maximum")]
    InconsistentVerdicts {
        overlap_verdict: bool,
        support_verdict: bool,
        overlap: f64,
    },

    #[error("state is not entangled (closest-product overlap {overlap:.12})")]
    NotEntangled { overlap: f64 },

    #[error("frame does not satisfy the alignment conditions: {0:?}")]
    InvalidFrame(Vec<String>),

    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),

    #[error("rank-one fit of the pivot residual collapsed (norm {0:.3e})")]
    DegenerateRankOne(f64),

    #[error("parameter search exhausted {tried} scale candidates without an admissible root; diagnostics: {summary}")]
    SearchExhausted { tried: usize, summary: String },

    #[error("gamma search failed to reach the target value within {0} halvings")]
    GammaSearchFailed(usize),

    #[error("degeneracy repair failed after {halvings} halvings (best separation {best:.3e})")]
    DegeneracyUnrepaired { halvings: usize, best: f64 },

    #[error("invalid measurement settings: {0}")]
    InvalidSettings(String),

    #[error("party count {n} outside supported range {min}..={max}")]
    PartyCountUnsupported { n: usize, min: usize, max: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
