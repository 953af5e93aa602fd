use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("scheme {scheme} is not available in dimension {n}")]
    UnsupportedScheme { n: usize, scheme: &'static str },

    #[error("node count {requested} is below the minimum of {minimum}")]
    TooFewNodes { requested: usize, minimum: usize },

    #[error("integrand is not finite at node {index} (value {value})")]
    NonFinite { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not orthogonal (max deviation {deviation:.3e})")]
    NotOrthogonal { deviation: f64 },

    #[error("group closure not reached within {max_order} elements")]
    ClosureNotReached { max_order: usize },

    #[error("invalid group parameter: {0}")]
    InvalidGroup(String),

    #[error(
        "directions {first} and {second} are closer ({distance:.3e}) than the merge tolerance"
    )]
    MergeCollision {
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error("normals do not positively span R^n (direction {probe} has no positive denominator)")]
    NotPositivelySpanning { probe: usize },

    #[error("support number {index} is {value:.3e}, below the floor {floor:.3e}")]
    FloorViolation {
        index: usize,
        value: f64,
        floor: f64,
    },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("matrix condition number {condition:.3e} exceeds {limit:.1e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("matrix determinant {det} is not 1")]
    NotUnimodular { det: f64 },

    #[error("direction is not generic for the group: {0}")]
    NonGeneric(String),

    #[error("no admissible sample after {tries} tries")]
    TriesExhausted { tries: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
