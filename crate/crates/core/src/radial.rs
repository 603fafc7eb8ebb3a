//! The radial minimizer `h₀(se^{iθ}) = H(s)e^{iθ}` for a pair of annuli,
//! the thresholds `m_λ` and `g_λ`, closed-form minimal energies and the
//! pointwise certificates behind the lower bounds.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{derivative4, gauss_legendre};
use crate::ode::{
    clamp_and_collapse, integrate, modulus_of, recover_h, shoot_modulus, solve_phi_tilde, PhiSolution,
    RadialProfile, DEFAULT_GRID,
};
use crate::weights::{Weight, MONOTONE_TOL};

/// Absolute tolerance on the target modulus when shooting.
pub const MODULUS_TOL: f64 = 1e-10;
/// Width of the final bracket on `φ₀`.
pub const PHI0_TOL: f64 = 1e-12;
/// Slack in the predicate `Φ ≤ λ` that defines `g_λ`.
pub const THIN_SLACK: f64 = 1e-10;
/// Default tolerance for certificate margins.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// `φ₀` above `-CASE_TOL` is tagged as the homeomorphic case.
pub const CASE_TOL: f64 = 1e-9;

const MAX_DOUBLINGS: usize = 60;

/// Domain annulus `A(r, R)` and target annulus `A(r_*, R_*)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusPair {
    pub r: f64,
    pub big_r: f64,
    pub r_star: f64,
    pub big_r_star: f64,
}

impl AnnulusPair {
    pub fn new(r: f64, big_r: f64, r_star: f64, big_r_star: f64) -> Result<Self> {
        if !(r > 0.0 && big_r > r && big_r.is_finite()) {
            return Err(Error::InvalidAnnulus(format!("domain radii need 0 < r < R, got ({r}, {big_r})")));
        }
        if !(r_star > 0.0 && big_r_star > r_star && big_r_star.is_finite()) {
            return Err(Error::InvalidAnnulus(format!(
                "target radii need 0 < r_* < R_*, got ({r_star}, {big_r_star})"
            )));
        }
        Ok(AnnulusPair { r, big_r, r_star, big_r_star })
    }

    pub fn domain_modulus(&self) -> f64 {
        (self.big_r / self.r).ln()
    }

    pub fn target_modulus(&self) -> f64 {
        (self.big_r_star / self.r_star).ln()
    }
}

/// Whether the radial minimizer is a homeomorphism or collapses an inner
/// ring onto the inner target circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialCase {
    Homeomorphic,
    Collapsing,
}

impl RadialCase {
    pub fn label(self) -> &'static str {
        match self {
            RadialCase::Homeomorphic => "case1",
            RadialCase::Collapsing => "case2",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub pair: AnnulusPair,
    pub phi: PhiSolution,
    pub profile: RadialProfile,
    pub case: RadialCase,
    pub energy: f64,
}

/// Pointwise values of the radial solution at an arbitrary radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSample {
    pub lambda: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub h: f64,
    pub h_dot: f64,
}

impl RadialSolution {
    pub fn phi0(&self) -> f64 {
        self.phi.phi0
    }

    pub fn r0(&self) -> f64 {
        self.phi.r0
    }

    pub fn weight(&self) -> &Weight {
        &self.phi.weight
    }

    /// Evaluates `Φ, Φ̇, H, Ḣ` at `s` from the Hermite interpolants of `Φ̃`
    /// and its carried integral; derivatives come from the ODEs.
    pub fn sample(&self, s: f64) -> RadialSample {
        let lambda = self.phi.weight.value(s);
        let r_star = self.profile.r_star;
        let (pt, lt) = self.phi.eval_tilde(s);
        let collapsed = self.case == RadialCase::Collapsing && s <= self.phi.r0;
        let phi = if collapsed { 0.0 } else { pt.max(0.0) };
        let phi_dot = if collapsed { 0.0 } else { (lambda * lambda - phi * phi) / (s * lambda) };
        let h = if collapsed { r_star } else { r_star * (lt - self.phi.integral_at_r0).max(0.0).exp() };
        let h_dot = h * phi / (s * lambda);
        RadialSample { lambda, phi, phi_dot, h, h_dot }
    }
}

/// Grid large enough that RK4 resolves the initial transient `Φ ~ 1/t`.
fn shooting_grid(w: &Weight, r: f64, big_r: f64, phi0: f64) -> usize {
    let span = (big_r / r).ln();
    let stiff = 8.0 * phi0.abs() / w.min_value() * span;
    let n = DEFAULT_GRID.max(stiff.ceil() as usize);
    n.min(1 << 22)
}

fn check_weight_on(w: &Weight, r: f64, big_r: f64) -> Result<()> {
    let (lo, hi) = w.domain();
    for s in [r, big_r] {
        if !w.contains(s) {
            return Err(Error::Domain { s, lo, hi });
        }
    }
    Ok(())
}

/// Bisection on `φ₀` for the target modulus `log(R_*/r_*)`. The modulus is
/// nondecreasing in `φ₀`, so the bracket is expanded geometrically from
/// `[−λ(r), max λ]`.
pub fn find_initial_value(w: &Weight, pair: &AnnulusPair, tol: f64) -> Result<f64> {
    check_weight_on(w, pair.r, pair.big_r)?;
    let target = pair.target_modulus();
    let modulus = |phi0: f64| {
        let n = shooting_grid(w, pair.r, pair.big_r, phi0);
        shoot_modulus(w, pair.r, pair.big_r, phi0, n)
    };
    let (mut lo, mut hi) = (-w.value(pair.r), w.max_value());
    let mut doublings = 0;
    while modulus(hi) < target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::NoSolution { target, reason: "upper bracket did not close".into() });
        }
    }
    doublings = 0;
    while modulus(lo) > target {
        hi = lo;
        lo *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::NoSolution { target, reason: "lower bracket did not close".into() });
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let m = modulus(mid);
        if m == target {
            break;
        }
        if m < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= PHI0_TOL * mid.abs().max(1.0) {
            mid = 0.5 * (lo + hi);
            break;
        }
    }
    let n = shooting_grid(w, pair.r, pair.big_r, mid);
    let check = modulus_of(&clamp_and_collapse(integrate(w, pair.r, pair.big_r, mid, n)), w);
    if (check - target).abs() > tol.max(PHI0_TOL) {
        return Err(Error::NoSolution {
            target,
            reason: format!("best initial value {mid} gives modulus {check}"),
        });
    }
    Ok(mid)
}

/// Builds the radial minimizer end to end.
pub fn build(w: &Weight, pair: &AnnulusPair) -> Result<RadialSolution> {
    w.validate()?;
    let phi0 = find_initial_value(w, pair, MODULUS_TOL)?;
    let n = shooting_grid(w, pair.r, pair.big_r, phi0);
    let phi = clamp_and_collapse(solve_phi_tilde(w, pair.r, pair.big_r, phi0, n)?);
    let profile = recover_h(&phi, w, pair.r_star)?;
    let case = if phi0 >= -CASE_TOL { RadialCase::Homeomorphic } else { RadialCase::Collapsing };
    let mut sol = RadialSolution { pair: *pair, phi, profile, case, energy: f64::NAN };
    sol.energy = energy_closed_form(&sol, w);
    Ok(sol)
}

/// `(weight, r, R)` on which a ratio-only threshold is evaluated: the
/// weight's own lower radius, with the domain widened for weights whose
/// shape is scale invariant.
fn threshold_setup(w: &Weight, rho: f64) -> Result<(Weight, f64, f64)> {
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("ratio must exceed 1, got {rho}")));
    }
    let (lo, hi) = w.domain();
    let big_r = lo * rho;
    if big_r <= hi * (1.0 + 1e-12) {
        Ok((w.clone(), lo, big_r.min(hi)))
    } else if w.is_scale_covariant() {
        Ok((w.with_domain(lo, big_r)?, lo, big_r))
    } else {
        Err(Error::Domain { s: big_r, lo, hi })
    }
}

/// `m_λ(ρ) = exp ∫ Φ₀/(sλ)` with `Φ₀` started from zero.
pub fn threshold_m(w: &Weight, rho: f64) -> Result<f64> {
    let (w, r, big_r) = threshold_setup(w, rho)?;
    let phi = clamp_and_collapse(solve_phi_tilde(&w, r, big_r, 0.0, DEFAULT_GRID)?);
    Ok(modulus_of(&phi, &w).exp())
}

fn thin_admissible(w: &Weight, r: f64, big_r: f64, phi0: f64) -> bool {
    let p = integrate(w, r, big_r, phi0, DEFAULT_GRID);
    p.phi_tilde
        .iter()
        .zip(p.grid.iter())
        .all(|(&v, &s)| v != f64::INFINITY && v.max(0.0) - w.value(s) <= THIN_SLACK)
}

/// Largest admissible `φ₀` for which `Φ ≤ λ` everywhere, and `g_λ(ρ)`.
pub fn thin_initial_value(w: &Weight, rho: f64) -> Result<(f64, f64)> {
    let (w, r, big_r) = threshold_setup(w, rho)?;
    let mut lo = -w.value(r);
    let mut hi = w.value(r) + 10.0 * THIN_SLACK;
    let mut doublings = 0;
    while !thin_admissible(&w, r, big_r, lo) {
        hi = lo;
        lo *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::InvariantViolation("no initial value keeps Φ below λ".into()));
        }
    }
    if thin_admissible(&w, r, big_r, hi) {
        return Err(Error::InvariantViolation("Φ(r) above λ(r) reported admissible".into()));
    }
    while hi - lo > PHI0_TOL * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if thin_admissible(&w, r, big_r, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let phi = clamp_and_collapse(solve_phi_tilde(&w, r, big_r, lo, DEFAULT_GRID)?);
    Ok((lo, modulus_of(&phi, &w).exp()))
}

/// `g_λ(ρ) = exp ∫ Φ₂/(sλ)` with `Φ₂` the largest solution below `λ`.
pub fn threshold_g(w: &Weight, rho: f64) -> Result<f64> {
    thin_initial_value(w, rho).map(|(_, g)| g)
}

/// `E[h₀]`: `2π(R_*²Φ(R) − r_*²Φ(r))` in the homeomorphic case and
/// `2πR_*²Φ(R) + 2πr_*² ∫_r^{r₀} λ/s ds` in the collapsing case.
pub fn energy_closed_form(sol: &RadialSolution, w: &Weight) -> f64 {
    let p = &sol.phi;
    let pair = &sol.pair;
    let outer = 2.0 * PI * pair.big_r_star.powi(2) * p.phi[p.n()];
    match sol.case {
        RadialCase::Homeomorphic => outer - 2.0 * PI * pair.r_star.powi(2) * p.phi[0],
        RadialCase::Collapsing => {
            let (a, b) = (pair.r.ln(), p.r0.ln());
            let collapse = gauss_legendre(|t| w.value(t.exp()), a, b, 64);
            outer + 2.0 * PI * pair.r_star.powi(2) * collapse
        }
    }
}

/// Margins of the pointwise inequalities behind the lower bound, sampled on
/// the grid nodes where `Φ` solves the ODE.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub c: f64,
    pub grid: Vec<f64>,
    pub tau: Vec<f64>,
    pub tau_margin: f64,
    pub tau_dot_margin: f64,
    /// `min(λ/s − τ̇)`
    pub weight_margin: f64,
    /// `min(sλ − c/Ḣ)` over points where it is defined.
    pub radial_margin: f64,
    /// Points where `c > 0` and `Ḣ ≤ 0`, skipped in `radial_margin`.
    pub not_applicable: usize,
    pub identity_residual: f64,
    pub product_slope_residual: f64,
}

impl CertificateReport {
    pub fn min_margin(&self) -> f64 {
        self.tau_margin.min(self.tau_dot_margin).min(self.weight_margin).min(self.radial_margin)
    }
}

struct SubGrid {
    start: usize,
    s: Vec<f64>,
    lam: Vec<f64>,
}

fn active_subgrid(sol: &RadialSolution, w: &Weight) -> Result<SubGrid> {
    let p = &sol.phi;
    let start = match sol.case {
        RadialCase::Homeomorphic => 0,
        RadialCase::Collapsing => p.grid.iter().position(|&s| s >= p.r0).unwrap_or(p.n()),
    };
    if p.grid.len() - start < 5 {
        return Err(Error::InvalidArgument(
            "fewer than five grid nodes to the right of the collapse radius".into(),
        ));
    }
    let s = p.grid[start..].to_vec();
    let lam = s.iter().map(|&x| w.value(x)).collect();
    Ok(SubGrid { start, s, lam })
}

fn d_ds(values: &[f64], sub: &SubGrid, h: f64) -> Vec<f64> {
    derivative4(values, h).iter().zip(sub.s.iter()).map(|(d, s)| d / s).collect()
}

pub fn claim1_certificate(sol: &RadialSolution, w: &Weight) -> Result<CertificateReport> {
    claim1_certificate_with_tol(sol, w, CERTIFICATE_TOL)
}

/// Builds `τ = Φ − c/H` with `c = H(r)Φ(r)` (zero in the collapsing case)
/// and checks `τ, τ̇, λ/s − τ̇, sλ − c/Ḣ ≥ 0` together with the product
/// identity and the monotonicity of `HΦ`.
pub fn claim1_certificate_with_tol(sol: &RadialSolution, w: &Weight, tol: f64) -> Result<CertificateReport> {
    if !w.is_nondecreasing(MONOTONE_TOL) {
        return Err(Error::InvalidArgument("certificate requires a nondecreasing weight".into()));
    }
    let p = &sol.phi;
    let prof = &sol.profile;
    let sub = active_subgrid(sol, w)?;
    let h = p.log_step;
    let phi = &p.phi[sub.start..];
    let big_h = &prof.h[sub.start..];
    let c = match sol.case {
        RadialCase::Homeomorphic => prof.h[0] * p.phi[0],
        RadialCase::Collapsing => 0.0,
    };
    let tau: Vec<f64> = phi.iter().zip(big_h).map(|(f, hh)| f - c / hh).collect();
    let tau_dot = d_ds(&tau, &sub, h);
    let h_dot = d_ds(big_h, &sub, h);
    let product: Vec<f64> = phi.iter().zip(big_h).map(|(f, hh)| f * hh).collect();
    let product_dot = d_ds(&product, &sub, h);

    let mut report = CertificateReport {
        c,
        grid: sub.s.clone(),
        tau: tau.clone(),
        tau_margin: f64::INFINITY,
        tau_dot_margin: f64::INFINITY,
        weight_margin: f64::INFINITY,
        radial_margin: f64::INFINITY,
        not_applicable: 0,
        identity_residual: 0.0,
        product_slope_residual: 0.0,
    };
    for i in 0..sub.s.len() {
        let (s, lam) = (sub.s[i], sub.lam[i]);
        let weight_term = lam / s - tau_dot[i];
        report.tau_margin = report.tau_margin.min(tau[i]);
        report.tau_dot_margin = report.tau_dot_margin.min(tau_dot[i]);
        report.weight_margin = report.weight_margin.min(weight_term);
        report.product_slope_residual = report.product_slope_residual.max((product_dot[i] - lam * big_h[i] / s).abs());
        let radial_term = if c == 0.0 {
            s * lam
        } else if h_dot[i] > 0.0 {
            s * lam - c / h_dot[i]
        } else {
            report.not_applicable += 1;
            continue;
        };
        report.radial_margin = report.radial_margin.min(radial_term);
        report.identity_residual =
            report.identity_residual.max((weight_term * radial_term - tau[i] * tau[i]).abs());
    }
    if report.min_margin() < -tol {
        return Err(Error::InvariantViolation(format!(
            "certificate margin {} below −{tol} for a nondecreasing weight",
            report.min_margin()
        )));
    }
    Ok(report)
}

/// Coefficients of the fixed-outer-boundary estimate.
#[derive(Debug, Clone)]
pub struct FixedBoundaryCoeffs {
    pub grid: Vec<f64>,
    /// `Φ²/(Φ² + λ²)`
    pub g: Vec<f64>,
    /// `ΦH`
    pub rho1: Vec<f64>,
    /// `λH/s`
    pub rho2: Vec<f64>,
    /// `max |ρ̇₁ − ρ₂|` over nodes right of the collapse radius.
    pub residual: f64,
}

pub fn fixed_boundary_coefficients(sol: &RadialSolution, w: &Weight) -> Result<FixedBoundaryCoeffs> {
    let p = &sol.phi;
    let prof = &sol.profile;
    let grid = p.grid.clone();
    let lam: Vec<f64> = grid.iter().map(|&s| w.value(s)).collect();
    let g = p.phi.iter().zip(&lam).map(|(f, l)| f * f / (f * f + l * l)).collect();
    let rho1: Vec<f64> = p.phi.iter().zip(&prof.h).map(|(f, hh)| f * hh).collect();
    let rho2: Vec<f64> = (0..grid.len()).map(|i| lam[i] * prof.h[i] / grid[i]).collect();
    let sub = active_subgrid(sol, w)?;
    let rho1_dot = d_ds(&rho1[sub.start..], &sub, p.log_step);
    let residual = rho1_dot
        .iter()
        .zip(&rho2[sub.start..])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(FixedBoundaryCoeffs { grid, g, rho1, rho2, residual })
}
