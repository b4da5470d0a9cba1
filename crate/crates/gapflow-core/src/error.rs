// SPDX-License-Identifier: MIT

//! Error type shared by all gapflow-core modules.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced while validating input or running the numerics.
///
/// The three variants mirror the three failure classes surfaced by the CLI:
/// invalid input, an iterative solver that did not reach its tolerance, and a
/// gauge transform requested for a set on which it is not defined.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The input configuration is malformed or describes an unsupported set.
    #[error("invalid configuration: {0}")]
    Validation(String),

    /// An iterative solver exhausted its budget before reaching tolerance.
    #[error("solver failed to converge: {0}")]
    NonConvergence(String),

    /// The requested gauge transform is not defined for this spectrum.
    #[error("gauge not applicable: {0}")]
    GaugeInapplicable(String),
}

impl Error {
    /// Shorthand for a validation failure.
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Shorthand for a convergence failure.
    pub fn non_convergence(msg: impl Into<String>) -> Self {
        Error::NonConvergence(msg.into())
    }

    /// Shorthand for an inapplicable-gauge failure.
    pub fn gauge_inapplicable(msg: impl Into<String>) -> Self {
        Error::GaugeInapplicable(msg.into())
    }
}
