use fbn_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2: configuration, 3: convergence, 4: regime, 1: anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                Error::InvalidParams(_) | Error::Grading(_) | Error::GridMismatch(_) => 2,
                Error::NonConvergence(_)
                | Error::SolveFailure(_)
                | Error::EigenFailure(_)
                | Error::Fit(_)
                | Error::IllConditionedFit(_)
                | Error::FitDivergence(_)
                | Error::Bracket(_) => 3,
                Error::Regime(_)
                | Error::Coercivity(_)
                | Error::EmptySet(_)
                | Error::Pole(_)
                | Error::Domain(_)
                | Error::Singularity(_)
                | Error::GramSingular
                | Error::MultiPeak(_)
                | Error::ZeroFunction => 4,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
