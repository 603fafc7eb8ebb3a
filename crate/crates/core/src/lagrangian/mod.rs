//! Numerical checks of the free Lagrangian identities, the isoperimetric
//! inequality and the estimate chain behind the radial lower bound.

pub mod identities;
pub mod maps;
pub mod proof;

pub use identities::{
    fl_boundary_residual, fl_pullback_residual, fl_radial_residual, fl_tangential_residual, Density, FnDensity,
    IdentityResidual,
};
pub use maps::{make_test_map, Curve, TestMapKind, TestMapSpec};
pub use proof::{isoperimetric_margin, proof_step_suite, row_isoperimetric_margin, ProofStepReport, SpectralRows};
