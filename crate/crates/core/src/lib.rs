//! Discontinuous Galerkin solvers for the 1D1V Vlasov–Ampère and 1D2V
//! streaming Weibel systems, with SIAC post-processing and a time-reversal
//! benchmark harness.

pub mod bench;
pub mod dg;
pub mod diagnostics;
pub mod error;
pub mod integrator;
pub mod kinetic;
pub mod mesh;
pub mod siac;
pub mod snapshot;

pub use error::{Error, Result};
