//! Modal DG substrate: basis, quadrature and piecewise-polynomial fields.

pub mod basis;
pub mod field;
pub mod quadrature;

pub use basis::{Basis, BasisEval};
pub use field::{l2_project, l2_project_vector, l2_project_with, DGField, ModeTable};
pub use quadrature::{gauss_legendre, gauss_rule, QuadratureRule};
