use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Fock dimension {dim}: every mode needs at least 2 levels")]
    InvalidDimension { dim: usize },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("operator is not Hermitian (max |O - O^dagger| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("expectation value has imaginary residue {residue:.3e}")]
    ImaginaryResidue { residue: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no sign change of the root function on [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },

    #[error(
        "found only {found} of {requested} roots in the scan window kd in (0, {window:.6}] \
         ({samples} samples)"
    )]
    InsufficientScan {
        requested: usize,
        found: usize,
        window: f64,
        samples: usize,
    },

    #[error("root branch {index} lost between f0 - {step:e} and f0 + {step:e}: {detail}")]
    BranchCrossing {
        index: usize,
        step: f64,
        detail: String,
    },

    #[error("unstable flux point: cos(f0) + eps_L = {value:.6e} must be positive")]
    UnstableFluxPoint { value: f64 },

    #[error("term ({n}, {m}) violates resonance: |omega_n + omega_m - omega_f| = {mismatch:.3e} > {tolerance:.3e}")]
    ResonanceViolation {
        n: String,
        m: String,
        mismatch: f64,
        tolerance: f64,
    },

    #[error("duplicate interaction pair ({0}, {1})")]
    DuplicatePair(String, String),

    #[error("invalid interaction pair: {0}")]
    InvalidPair(String),

    #[error("ensemble would exceed {cap} members; raise epsilon_tail or lower temperatures/dims")]
    EnsembleTooLarge { cap: usize },

    #[error("propagation diverged at t = {time}: {detail}")]
    PropagationDiverged { time: f64, detail: String },

    #[error("total dimension {dim} exceeds the dense cap {cap}; use ensemble evolution instead")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("eigendecomposition needs a sector of dimension {dim} > {cap}; use the krylov method")]
    SectorTooLarge { dim: usize, cap: usize },

    #[error("ensemble member {member:?} failed: {source}")]
    Member {
        member: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("scenario `{name}`: {source}")]
    Scenario {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
