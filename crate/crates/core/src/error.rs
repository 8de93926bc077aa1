use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("index {index} out of range for dimension of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("matrix is not symmetric positive definite ({0})")]
    NotPositiveDefinite(String),
    #[error(
        "Nitsche matrix T is not positive definite for C_pen = {cpen}; increase the penalty constant"
    )]
    PenaltyTooSmall { cpen: f64 },
    #[error("operator is singular: eigenvalue {value:e} below tolerance relative to {max:e}")]
    SingularOperator { value: f64, max: f64 },
    #[error("quadrature with {got} points per element is not exact; at least {required} needed")]
    QuadratureTooLow { required: usize, got: usize },
    #[error("dense size guard exceeded: {size} > {limit}")]
    SizeGuard { size: usize, limit: usize },
    #[error("solver breakdown: {0}")]
    Breakdown(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}
