use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("form is not positive semidefinite: eigenvalue {min_eigenvalue:.3e} below -{tolerance:.3e}")]
    FormNotPSD { min_eigenvalue: f64, tolerance: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },

    #[error("partition level {level} exceeds the maximum of {max}")]
    LevelTooFine { level: u32, max: u32 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("partitions are not nested: time {time} of partition {index} missing from its refinement")]
    PartitionNotNested { index: usize, time: f64 },

    #[error("singular system: {detail}")]
    SingularSystem { detail: String },

    #[error("implicit solve failed at t = {t}: residual {residual:.3e} after {iterations} Newton iterations; reduce dt or switch scheme")]
    ImplicitSolveFailed { t: f64, iterations: usize, residual: f64 },

    #[error("Picard iteration did not converge in {iterations} sweeps (last update {last_update:.3e})")]
    PicardDiverged { iterations: usize, last_update: f64 },

    #[error("ball radius escalated past level {level}")]
    RadiusOverflow { level: u32 },

    #[error("non-finite state at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    #[error("path {index} (seed {seed:#018x}) failed: {source}")]
    PathFailed {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported exponent p = {p} (need p >= 2)")]
    UnsupportedExponent { p: f64 },

    #[error("negative weight {value} at node {node}")]
    InvalidWeight { node: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
