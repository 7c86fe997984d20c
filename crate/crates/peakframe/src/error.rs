//! Error and abort taxonomy shared across the crate.
//!
//! Three failure families matter operationally and map onto distinct CLI exit
//! codes: configuration/validation problems (exit 3), solver aborts such as a
//! characteristic-speed violation or a lost single-peak property (exit 2), and
//! diagnostic check failures (exit 1, produced by the check layer rather than
//! an `Err`).

use thiserror::Error;

/// Why a running simulation was stopped before reaching `t_final`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortKind {
    /// |xdot| reached 0.9; the moving-frame advection speeds (1 - xdot) and
    /// (1 + xdot) are about to degenerate.
    SpeedLimit,
    /// A non-finite value appeared in the state.
    BlowUp,
    /// The chemoattractant lost its single-peak structure (watchdog).
    MultiPeak,
}

impl std::fmt::Display for AbortKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AbortKind::SpeedLimit => write!(f, "speed-limit"),
            AbortKind::BlowUp => write!(f, "blow-up"),
            AbortKind::MultiPeak => write!(f, "multi-peak"),
        }
    }
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum ModelError {
    /// Invalid parameter, grid, or config input; names the offending key.
    #[error("configuration: {0}")]
    Config(String),

    /// Physically inadmissible data (negative density, amplitude too large).
    #[error("rejected input: {0}")]
    Reject(String),

    /// The time integrator stopped early; the partial trajectory is kept by
    /// the caller (`run` returns it alongside this information).
    #[error("solver abort ({kind}) at t = {t}: {detail}")]
    Abort {
        kind: AbortKind,
        t: f64,
        detail: String,
    },

    /// The integral-equation oracle failed to converge or its assumptions
    /// (|xdot| <= p < 1) were violated mid-history.
    #[error("oracle: {0}")]
    Oracle(String),

    /// A structural impossibility (singular projection system, failed banded
    /// factorization); indicates a bug, not bad user input.
    #[error("internal: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
