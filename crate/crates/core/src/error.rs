use crate::clustering::ClusterError;
use crate::embedding_store::StoreError;
use crate::harness::HarnessError;
use crate::pool_manager::PoolError;
use crate::sampler::SampleError;
use crate::zeroshot::ZeroShotError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    ZeroShot(#[from] ZeroShotError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("configuration: {0}")]
    Config(String),
}

/// Coarse failure category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input data.
    Input,
    /// Invalid parameters or configuration.
    Config,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Store(StoreError::Io { .. }) | Error::Pool(PoolError::Io(_)) => ErrorKind::Io,
            Error::ZeroShot(ZeroShotError::Store(StoreError::Io { .. })) => ErrorKind::Io,
            Error::Store(_) | Error::ZeroShot(_) | Error::Pool(_) => ErrorKind::Input,
            Error::Cluster(ClusterError::NotNormalized(_) | ClusterError::EmptySet) => ErrorKind::Input,
            Error::Cluster(ClusterError::LeafCountMismatch { .. } | ClusterError::InvalidDendrogram(_)) => {
                ErrorKind::Input
            }
            Error::Cluster(_) => ErrorKind::Config,
            Error::Sample(
                SampleError::MissingScore(_)
                | SampleError::NonFiniteScore(_)
                | SampleError::UnknownSample(_)
                | SampleError::Parse(_)
                | SampleError::EmptyPool,
            ) => ErrorKind::Input,
            Error::Sample(_) => ErrorKind::Config,
            Error::Harness(HarnessError::Io(_)) => ErrorKind::Io,
            Error::Harness(_) | Error::Config(_) => ErrorKind::Config,
        }
    }
}
