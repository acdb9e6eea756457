//! Error taxonomy shared across the crate.

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Parameter or configuration values violate a documented precondition.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Geometry input that cannot support the requested operation
    /// (coincident atoms, nonpositive separations, too few atoms, ...).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// The generator's null space is not one-dimensional: independent
    /// stationary directions verified against the residual test, which
    /// signals a disconnected or undamped state space.
    #[error("steady state is not unique: {directions} independent stationary directions found")]
    NonUniqueSteadyState { directions: usize },

    /// No seed column produced a verified null vector and no diagonal of
    /// the triangular factor vanishes, so the matrix has full numerical
    /// rank and only the zero vector solves M v = 0.
    #[error("no steady state: the generator has full numerical rank")]
    NoNullSpace,

    /// A population came out more negative than roundoff can explain.
    #[error("negative population {value:.3e} exceeds the clamp threshold")]
    NegativePopulation { value: f64 },

    /// The exact joint solver is limited to small atom numbers.
    #[error("{atoms} atoms exceed the exact-solver limit of {limit}")]
    SizeLimit { atoms: usize, limit: usize },

    /// A Monte Carlo step was requested but the partition has no units.
    #[error("empty partition: no pairs or singles to select")]
    EmptyPartition,

    /// Accumulators with different layouts cannot be merged.
    #[error("accumulator mismatch: {0}")]
    AccumulatorMismatch(String),

    /// An observable is undefined for the accumulated data
    /// (no snapshots, zero mean count, ...).
    #[error("undefined observable: {0}")]
    UndefinedObservable(String),

    /// Configuration file or CLI input could not be interpreted.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical solve produced an unusable result.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
