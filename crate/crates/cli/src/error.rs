use nodal_lab::chain::ChainError;
use nodal_lab::eigen::EigenError;
use nodal_lab::experiments::ExperimentError;
use nodal_lab::grid::GridError;
use nodal_lab::harmonic::HarmonicError;
use nodal_lab::io::IoError;
use nodal_lab::nodal::NodalError;
use nodal_lab::poincare::PoincareError;
use thiserror::Error;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum Failure {
    #[error("bad input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("inequality falsified: {message}")]
    Falsified { message: String, finding: String },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Falsified { .. } => 3,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<GridError> for Failure {
    fn from(e: GridError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<NodalError> for Failure {
    fn from(e: NodalError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<HarmonicError> for Failure {
    fn from(e: HarmonicError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<EigenError> for Failure {
    fn from(e: EigenError) -> Self {
        match e {
            EigenError::NonConvergence { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<ChainError> for Failure {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Eigen(inner) => inner.into(),
            ChainError::EmptyHole => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<PoincareError> for Failure {
    fn from(e: PoincareError) -> Self {
        match e {
            PoincareError::NonConvergence { .. } => Failure::Numerical(e.to_string()),
            PoincareError::MaxPrincipleViolated { min, max } => {
                Failure::Falsified { message: e.to_string(), finding: format!("{{\"min_u\":{min},\"max_u\":{max}}}") }
            }
            PoincareError::Eigen(inner) => inner.into(),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidArgument(m) => Failure::Input(m),
            ExperimentError::Grid(x) => x.into(),
            ExperimentError::Eigen(x) => x.into(),
            ExperimentError::Nodal(x) => x.into(),
            ExperimentError::Chain(x) => x.into(),
            ExperimentError::Poincare(x) => x.into(),
            ExperimentError::Harmonic(x) => x.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}
