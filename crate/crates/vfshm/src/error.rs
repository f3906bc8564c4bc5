//! Error taxonomy shared by every module in this crate.
//!
//! The variants are deliberately coarse: callers (in particular the CLI) need
//! to distinguish *configuration* mistakes from *data* problems from *numeric*
//! breakdowns, and not much more. Structured payloads are kept only where a
//! downstream consumer acts on them (condition estimates, file positions).

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid option value or violated precondition (bad order, bad band,
    /// out-of-range index, ...). These are caller mistakes, not data issues.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Structurally valid input that fails a semantic requirement
    /// (mismatched grids, non-increasing frequencies, degenerate baseline, ...).
    #[error("invalid data: {0}")]
    Data(String),

    /// Parse failure while reading a file; carries the position for
    /// actionable messages.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// A least-squares system was too ill-conditioned to solve reliably.
    /// Carries the condition estimate so callers can report it.
    #[error("ill-conditioned least-squares system (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    /// The dynamic-stiffness matrix of a simulated structure is singular at
    /// one of the requested grid points.
    #[error("singular system matrix at {frequency_hz} Hz")]
    SingularAtFrequency { frequency_hz: f64 },

    /// A pole that is required to be strictly stable has a non-negative
    /// real part.
    #[error("unstable pole {re:e}{im:+e}i: real part must be strictly negative")]
    UnstablePole { re: f64, im: f64 },

    /// Generic numeric breakdown: eigen-solve failure, non-finite
    /// intermediate values, exhausted restarts, failed sweeps.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Underlying file-system failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_carry_context() {
        let e = Error::Parse {
            path: "meas.csv".into(),
            line: 17,
            message: "expected 3 columns, found 2".into(),
        };
        assert_eq!(e.to_string(), "meas.csv:17: expected 3 columns, found 2");

        let e = Error::IllConditioned { condition: 3.2e15 };
        assert!(e.to_string().contains("3.200e15"));

        let e = Error::SingularAtFrequency { frequency_hz: 250.0 };
        assert!(e.to_string().contains("250 Hz"));
    }

    #[test]
    fn io_errors_convert() {
        fn open() -> Result<()> {
            std::fs::read("/definitely/not/a/real/path/xyz")?;
            Ok(())
        }
        assert!(matches!(open(), Err(Error::Io(_))));
    }
}
