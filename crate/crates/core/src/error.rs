use thiserror::Error;

use crate::radial::RadialSolution;

#[derive(Error, Debug)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid nonlinearity table: {0}")]
    Table(String),

    #[error("step size underflow at r = {at:e} (h = {step:e})")]
    StepUnderflow {
        at: f64,
        step: f64,
        partial: Box<RadialSolution>,
    },

    #[error("non-finite state encountered at r = {at:e}")]
    NonFinite { at: f64, partial: Box<RadialSolution> },

    #[error("maximum number of steps ({0}) exceeded")]
    MaxSteps(usize),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("transformed trajectory escaped at t = {at}: {diagnosis}")]
    Escaped { at: f64, diagnosis: String },

    #[error("newton iteration did not converge from seed {seed:?}")]
    Newton { seed: [f64; 3] },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
