use alloc::string::String;
use alloc::vec::Vec;

use crate::network::InverterKind;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported inverter combination {0:?}-{1:?}")]
    UnsupportedCombination(InverterKind, InverterKind),

    #[error("degenerate fault: Thevenin impedance magnitude {0:e} below 1e-9")]
    DegenerateFault(f64),

    #[error("integration failed at t = {time}: step size underflow after {} samples", partial.len())]
    IntegrationFailed {
        time: f64,
        /// Samples accepted before the failure, as `(t, state)`.
        partial: Vec<(f64, Vec<f64>)>,
    },

    #[error("no stable equilibrium point")]
    NoSep,

    #[error("no enclosing boundary cycle around the SEP (open basin)")]
    OpenBasin,

    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
