use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dipole-dipole coupling is singular at zero separation")]
    ZeroSeparation,

    #[error("secular function evaluated at the pole {pole}")]
    Pole { pole: f64 },

    #[error("all couplings vanish; the perturbative polariton energies are undefined")]
    DegenerateCoupling,

    #[error("eigensolver did not converge after {iterations} iterations (achieved residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("eigen-residual {residual:e} exceeds the requested bound {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    #[error("classification failed: {0}")]
    Classification(String),

    #[error("realization {stream}: {source}")]
    Stream {
        stream: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn file(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Error::File { path: path.to_path_buf(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
