use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("constraint {index}: {reason}")]
    InvalidConstraint { index: usize, reason: String },

    #[error("invalid relation: {0}")]
    InvalidRelation(String),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("degenerate instance: no constraints")]
    DegenerateInstance,

    #[error("{what}: size {size} exceeds cap {cap}")]
    CapExceeded { what: &'static str, size: f64, cap: f64 },

    #[error("domain mismatch: {0} vs {1}")]
    DomainMismatch(usize, usize),

    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("constraint {index} has arity {arity}; only unary and binary constraints are supported here")]
    UnsupportedArity { index: usize, arity: usize },

    #[error("constraint {index} repeats a variable in its scope")]
    RepeatedVariable { index: usize },

    #[error("language has no bounded-width witness (f1, f2); supply one in the language file")]
    MissingWitness,

    #[error("bounded-width witness rejected: {0}")]
    InvalidWitness(String),

    #[error("language is not singleton-expanded")]
    NotSingletonExpanded,

    #[error("witness search refused for domain size {0}; only |D| = 2 is searchable")]
    SearchInfeasible(usize),

    #[error("width guarantee violated: every value of variable {variable} trivializes the instance")]
    WidthGuaranteeViolated { variable: usize },

    #[error("not a weak Prague instance: {0}")]
    NotWeakPrague(String),

    #[error("malformed Prague instance: {0}")]
    MalformedPrague(String),

    #[error("pattern contains a non-step pair ({0}, {1})")]
    NotAStep(usize, usize),

    #[error("rounding pipeline: {0}")]
    Pipeline(String),

    #[error("no candidate in a pool of {pool} hyperplanes keeps the estimator from increasing at step {step}")]
    PoolExhausted { step: usize, pool: usize },

    #[error("tolerance contract violated: level {level} needs eta <= {required:.3e}, configured {configured:.3e}")]
    ToleranceContract {
        level: usize,
        required: f64,
        configured: f64,
    },

    #[error("LP extraction: {0}")]
    LpValidation(String),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
