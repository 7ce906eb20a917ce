use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A spectral operation needed more peaks than the profile provides.
    #[error("insufficient peaks: found {found}, need {needed}")]
    InsufficientPeaks { found: usize, needed: usize },

    /// Two profiles were compared on different spectral grids.
    #[error("spectral grids do not match")]
    GridMismatch,

    /// The requested length scan would enumerate too many candidates.
    #[error(
        "search space of {candidates} candidates exceeds the {limit} limit; \
         coarsen the step or add tie patterns"
    )]
    SearchSpaceTooLarge { candidates: u128, limit: u128 },

    /// The reflector inventory was exhausted during escalation.
    #[error("out of reflectors: escalation requested with an empty inventory")]
    OutOfReflectors,

    /// The identification least-squares system lost rank.
    #[error("rank-deficient least-squares system at iteration {iteration}")]
    RankDeficient { iteration: usize },

    /// Configuration file problem (unknown key, missing section, bad value).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed CSV input.
    #[error("csv error: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
