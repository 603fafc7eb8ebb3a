//! Numerical toolkit for weighted Dirichlet energy minimization between
//! circular annuli: the radial ODE, the minimizer built from it, discrete
//! competitors on polar grids, and discrete checks of the free Lagrangian
//! identities.

pub mod error;
pub mod fields;
pub mod lagrangian;
pub mod numerics;
pub mod ode;
pub mod radial;
pub mod weights;

pub use error::{Error, Result};
pub use ode::{clamp_and_collapse, modulus_of, recover_h, solve_phi_tilde, PhiSolution, RadialProfile};
pub use weights::{Weight, WeightKind};
pub use radial::{
    build, claim1_certificate, energy_closed_form, find_initial_value, fixed_boundary_coefficients, threshold_g,
    threshold_m, AnnulusPair, CertificateReport, FixedBoundaryCoeffs, RadialCase, RadialSolution,
};
