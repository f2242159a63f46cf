//! Numerics for minimal output entropy of single-mode bosonic Gaussian
//! channels: truncated Fock-space simulation, exact dilations, Lindblad
//! semigroups, attenuator cascades, and entropy-shell optimization.

// Link the BLAS backend once for the whole crate.
use blas_src as _;

pub mod cascade;
pub mod channels;
pub mod gaussian;
pub mod error;
pub mod fock;
pub mod lindblad;
pub mod multimode;
pub mod numeric;
pub mod optimizer;

pub use error::{Error, Result};
