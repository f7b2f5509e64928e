//! Excited-state electronic structure on a simulated quantum register,
//! coupled to nuclear wavepacket dynamics on the resulting surfaces.
//!
//! The pipeline: parse active-space integrals, map them to qubit operators,
//! solve for several adiabatic states at once with a subspace-search
//! variational eigensolver, differentiate the Hamiltonian for derivative
//! couplings, interpolate both onto a fine grid, and propagate a coupled
//! two-surface wavepacket through the de-excitation funnel.
//!
//! Everything numeric is generic over the scalar via [`scalar::Real`];
//! the `f64` aliases below are the working set for production runs.

pub mod error;
pub mod scalar;

pub mod linalg;

pub mod hamiltonian_io;

pub mod qsim;

pub mod ssvqe;

pub mod nac;

pub mod surfaces;

pub mod dynamics;

pub mod synthetic;

pub use error::{CoreError, ErrorClass, Result};
pub use scalar::{Real, C};

/// Complex amplitude at production precision.
pub type C64 = scalar::C<f64>;
