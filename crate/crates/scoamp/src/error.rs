use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension error: {0}")]
    Dim(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("index {index} outside 0..{len}")]
    Index { index: usize, len: usize },
    #[error("singular filter in row section {ell}: 1 - eta_A = {gap:e}")]
    SingularFilter { ell: usize, gap: f64 },
    #[error("singular Onsager correction in row section {ell}: 1 - eta_B/|W| = {gap:e}")]
    SingularOnsager { ell: usize, gap: f64 },
    #[error("covariance message of row section {ell} is not positive definite")]
    NotPosDef { ell: usize },
    #[error("non-finite {what} at iteration {iter}")]
    NonFinite { what: &'static str, iter: usize },
}
