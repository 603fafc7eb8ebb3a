//! Discrete energies of competitor maps and projected descent minimizers.

pub mod descent;
pub mod perturb;
pub mod polar;
pub mod radial;

use serde::Serialize;

pub use descent::{DescentOptions, DescentOutcome};
pub use polar::{
    minimize_polar, negative_jacobian_fraction, perturbed_radial_map, polar_energy, polar_gradient, winding_number,
    BoundaryMode, PolarGridMap, PolarInit, PolarMinimum, PolarOptions,
};
pub use radial::{minimize_radial, radial_energy, RadialMinimum, RadialVector};

/// Discrete energy split into its `|h_t|²` and `|h_θ|²` parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub total: f64,
    pub radial: f64,
    pub angular: f64,
    pub n_s: usize,
    pub n_theta: usize,
    pub scheme: &'static str,
    pub negative_jacobian_fraction: f64,
}

impl EnergyReport {
    pub(crate) fn new(radial: f64, angular: f64, n_s: usize, n_theta: usize, scheme: &'static str) -> Self {
        EnergyReport { total: radial + angular, radial, angular, n_s, n_theta, scheme, negative_jacobian_fraction: 0.0 }
    }
}
