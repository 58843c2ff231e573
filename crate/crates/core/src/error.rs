use thiserror::Error;

pub type Result<T> = std::result::Result<T, AimsError>;

#[derive(Debug, Error)]
pub enum AimsError {
    #[error("degenerate weight set: every log-weight is -inf")]
    DegenerateWeights,

    #[error("non-finite log-likelihood at sample {0}")]
    NonFiniteLogLikelihood(usize),

    #[error("evaluated global proposal density on excluded set (previous-level point {0})")]
    ExcludedSet(usize),

    #[error("cannot initialize in support after {0} attempts")]
    InitFailed(usize),

    #[error("M undefined: {0}")]
    BoundUndefined(String),

    #[error("baseline screening failed: all {0} prior draws have -inf log-likelihood")]
    ScreeningFailed(usize),

    #[error("annealing did not reach beta = 1 within {0} levels")]
    TooManyLevels(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unknown model id `{0}`")]
    UnknownModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse: {0}")]
    ConfigParse(String),
}

impl AimsError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        AimsError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl AimsError {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            AimsError::DegenerateWeights => "degenerate_weights",
            AimsError::NonFiniteLogLikelihood(_) => "non_finite_log_likelihood",
            AimsError::ExcludedSet(_) => "excluded_set",
            AimsError::InitFailed(_) => "init_failed",
            AimsError::BoundUndefined(_) => "bound_undefined",
            AimsError::ScreeningFailed(_) => "screening_failed",
            AimsError::TooManyLevels(_) => "too_many_levels",
            AimsError::Dimension { .. } => "dimension",
            AimsError::UnknownModel(_) => "unknown_model",
            AimsError::InvalidConfig(_) => "invalid_config",
            AimsError::Io { .. } => "io",
            AimsError::Json(_) => "json",
            AimsError::ConfigParse(_) => "config_parse",
        }
    }
}
