use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} or its stencil leaves the chart domain")]
    Domain { point: Vec<f64> },
    #[error("derivative order {order} exceeds policy maximum {max}")]
    Order { order: usize, max: usize },
    #[error("singular metric: {0}")]
    SingularMetric(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("spacetime is not static here (max |Lambda| = {0:e})")]
    NotStatic(f64),
    #[error("twist form is not closed (curl residual {0:e}); no twist potential")]
    NotClosed(f64),
    #[error("tensor valence {0} exceeds 4")]
    Valence(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("step size underflow at s = {0}")]
    StepUnderflow(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(p: &[f64]) -> Self {
        Error::Domain { point: p.to_vec() }
    }
}
