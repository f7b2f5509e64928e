//! Error taxonomy for the whole pipeline. Every failure is classified as
//! either malformed input or a numeric breakdown so callers (notably the CLI)
//! can map it to a stable exit status.

use thiserror::Error;

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad or inconsistent input: files, configs, dimensions, ranges.
    Input,
    /// A numeric procedure failed: non-convergence, instability, degeneracy.
    Numeric,
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("index out of range in {path}: {msg}")]
    IndexRange { path: String, msg: String },

    #[error("malformed bitstring {value:?}: {msg}")]
    Bitstring { value: String, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator on {n_qubits} qubits exceeds dense capacity of {max} qubits")]
    DenseCapacity { n_qubits: usize, max: usize },

    #[error("parameter count mismatch: circuit has {expected} blocks, got {got} angles")]
    Arity { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grid alignment failure: {0}")]
    Alignment(String),

    #[error("requested point outside the coarse-grid hull: {0}")]
    Extrapolation(String),

    #[error("field is entirely masked; nothing to interpolate")]
    EmptyField,

    #[error("masked fraction {frac:.3} exceeds limit {limit:.3}; surface data too sparse")]
    MaskedFraction { frac: f64, limit: f64 },

    #[error("energy gap {gap:.3e} below floor {floor:.3e}{}", tag.as_ref().map(|t| format!(" at {t}")).unwrap_or_default())]
    DegenerateGap {
        gap: f64,
        floor: f64,
        tag: Option<String>,
    },

    #[error("eigensolve did not converge: residual {residual:.3e} after {iterations} iterations")]
    EigenNonConvergence { residual: f64, iterations: usize },

    #[error(
        "optimizer did not converge: gradient norm {grad_norm:.3e} after {iterations} iterations"
    )]
    OptimizerNonConvergence { grad_norm: f64, iterations: usize },

    #[error("propagation unstable at step {step}: {msg}")]
    Instability { step: usize, msg: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CoreError {
    pub fn class(&self) -> ErrorClass {
        use CoreError::*;
        match self {
            Parse { .. }
            | IndexRange { .. }
            | Bitstring { .. }
            | Dimension(_)
            | DenseCapacity { .. }
            | Arity { .. }
            | Config(_)
            | Alignment(_)
            | Extrapolation(_)
            | EmptyField
            | MaskedFraction { .. }
            | Io { .. } => ErrorClass::Input,
            DegenerateGap { .. }
            | EigenNonConvergence { .. }
            | OptimizerNonConvergence { .. }
            | Instability { .. }
            | Numeric(_) => ErrorClass::Numeric,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
