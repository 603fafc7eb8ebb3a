//! The characteristic ODE `λ² − Φ² = sλΦ̇`, its nonnegative clamp, and the
//! recovery of the radial profile `H` from `sλḢ = HΦ`.
//!
//! Everything is integrated in the logarithmic variable `t = ln s`, where
//! the equation reads `dΦ/dt = (λ² − Φ²)/λ` and the modulus density is
//! `Φ/λ dt`. The grid is uniform in `t`. Alongside `Φ̃` the solver carries
//! `L̃(t) = ∫ Φ̃/λ dt`, which is smooth even where the clamp `max{0, Φ̃}`
//! has a corner, so `H = r_* exp(L̃ − L̃(r₀))` stays fourth-order accurate
//! on both sides of the collapse radius.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::numerics::{derivative4, gauss_legendre, hermite, hermite_slope, simpson};
use crate::weights::Weight;

/// Default number of RK4 steps.
pub const DEFAULT_GRID: usize = 4096;
/// Default tolerance on the step-halving error estimate (relative to the
/// a priori bound of the solution, floored at 1).
pub const DEFAULT_TOL: f64 = 1e-9;
/// Smallest accepted grid.
pub const MIN_GRID: usize = 16;

/// Samples of `Φ̃` (and, once clamped, `Φ`) on a log-uniform grid.
#[derive(Debug, Clone)]
pub struct PhiSolution {
    pub weight: Weight,
    /// Radii `s_0 = r < … < s_N = R`, uniform in `ln s`.
    pub grid: Vec<f64>,
    /// Step in `ln s`.
    pub log_step: f64,
    pub phi_tilde: Vec<f64>,
    /// `max{0, Φ̃}`; empty until [`clamp_and_collapse`] runs.
    pub phi: Vec<f64>,
    /// `∫_r^{s_i} Φ̃(t)/(tλ(t)) dt` at every node.
    pub tilde_integral: Vec<f64>,
    pub phi0: f64,
    /// Collapse radius; `NaN` until clamped.
    pub r0: f64,
    /// `L̃(r₀)`, the value of `tilde_integral` at the collapse radius.
    pub integral_at_r0: f64,
    /// Max defect `|dΦ̃/dt − (λ² − Φ̃²)/λ|` with fourth-order differences.
    pub residual: f64,
    /// Max change of the samples when the step is halved.
    pub error_estimate: f64,
}

impl PhiSolution {
    pub fn n(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn is_clamped(&self) -> bool {
        !self.phi.is_empty()
    }

    pub fn r(&self) -> f64 {
        self.grid[0]
    }

    pub fn big_r(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    fn t0(&self) -> f64 {
        self.grid[0].ln()
    }

    /// Cell index and fraction for radius `s`.
    fn locate(&self, s: f64) -> (usize, f64) {
        let x = (s.ln() - self.t0()) / self.log_step;
        let n = self.n();
        let k = (x.floor().max(0.0) as usize).min(n - 1);
        (k, (x - k as f64).clamp(0.0, 1.0))
    }

    fn slope_at(&self, i: usize) -> (f64, f64) {
        let lam = self.weight.value(self.grid[i]);
        let p = self.phi_tilde[i];
        ((lam * lam - p * p) / lam, p / lam)
    }

    /// Hermite evaluation of `(Φ̃, L̃)` at an arbitrary radius in `[r, R]`.
    pub fn eval_tilde(&self, s: f64) -> (f64, f64) {
        let (k, u) = self.locate(s);
        let (d0, e0) = self.slope_at(k);
        let (d1, e1) = self.slope_at(k + 1);
        let h = self.log_step;
        (
            hermite(self.phi_tilde[k], self.phi_tilde[k + 1], d0, d1, h, u),
            hermite(self.tilde_integral[k], self.tilde_integral[k + 1], e0, e1, h, u),
        )
    }

    /// `dΦ̃/dt` at an arbitrary radius (Hermite derivative).
    pub fn eval_tilde_slope(&self, s: f64) -> f64 {
        let (k, u) = self.locate(s);
        let (d0, _) = self.slope_at(k);
        let (d1, _) = self.slope_at(k + 1);
        hermite_slope(self.phi_tilde[k], self.phi_tilde[k + 1], d0, d1, self.log_step, u)
    }
}

/// Samples of `H` and `Ḣ` on the ODE grid.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub grid: Vec<f64>,
    pub log_step: f64,
    pub h: Vec<f64>,
    pub hdot: Vec<f64>,
    pub r_star: f64,
    pub r0: f64,
}

impl RadialProfile {
    /// Cubic Hermite evaluation of `H(s)`. On the cell containing the
    /// collapse radius the flat part is reproduced exactly.
    pub fn eval(&self, s: f64) -> f64 {
        let n = self.grid.len() - 1;
        let t0 = self.grid[0].ln();
        let t = s.ln();
        if s <= self.r0 {
            return self.r_star;
        }
        let x = (t - t0) / self.log_step;
        let k = (x.floor().max(0.0) as usize).min(n - 1);
        let (mut a, mut fa, mut da) = (t0 + k as f64 * self.log_step, self.h[k], self.grid[k] * self.hdot[k]);
        if self.grid[k] < self.r0 {
            a = self.r0.ln();
            fa = self.r_star;
            da = 0.0;
        }
        let b = t0 + (k + 1) as f64 * self.log_step;
        let width = b - a;
        if width <= 0.0 {
            return self.h[k + 1];
        }
        let u = ((t - a) / width).clamp(0.0, 1.0);
        hermite(fa, self.h[k + 1], da, self.grid[k + 1] * self.hdot[k + 1], width, u)
    }
}

#[inline]
fn rhs(w: &Weight, t: f64, phi: f64) -> (f64, f64) {
    let lam = w.value(t.exp());
    ((lam * lam - phi * phi) / lam, phi / lam)
}

#[inline]
fn rk4_step(w: &Weight, t: f64, phi: f64, ell: f64, h: f64) -> (f64, f64) {
    let (k1, l1) = rhs(w, t, phi);
    let (k2, l2) = rhs(w, t + 0.5 * h, phi + 0.5 * h * k1);
    let (k3, l3) = rhs(w, t + 0.5 * h, phi + 0.5 * h * k2);
    let (k4, l4) = rhs(w, t + h, phi + h * k3);
    (
        phi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
        ell + h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4),
    )
}

pub(crate) fn log_grid(r: f64, big_r: f64, n: usize) -> (Vec<f64>, f64) {
    let t0 = r.ln();
    let h = (big_r.ln() - t0) / n as f64;
    let mut grid: Vec<f64> = (0..=n).map(|i| (t0 + i as f64 * h).exp()).collect();
    grid[0] = r;
    grid[n] = big_r;
    (grid, h)
}

/// Raw fixed-step integration; no error control.
pub(crate) fn integrate(w: &Weight, r: f64, big_r: f64, phi0: f64, n: usize) -> PhiSolution {
    let (grid, h) = log_grid(r, big_r, n);
    let t0 = r.ln();
    let mut phi_tilde = Vec::with_capacity(n + 1);
    let mut tilde_integral = Vec::with_capacity(n + 1);
    let (mut p, mut l) = (phi0, 0.0);
    phi_tilde.push(p);
    tilde_integral.push(l);
    for i in 0..n {
        let (np, nl) = rk4_step(w, t0 + i as f64 * h, p, l, h);
        p = np;
        l = nl;
        phi_tilde.push(p);
        tilde_integral.push(l);
    }
    PhiSolution {
        weight: w.clone(),
        grid,
        log_step: h,
        phi_tilde,
        phi: Vec::new(),
        tilde_integral,
        phi0,
        r0: f64::NAN,
        integral_at_r0: f64::NAN,
        residual: f64::NAN,
        error_estimate: f64::NAN,
    }
}

/// Modulus of the clamped solution starting at `phi0`, computed from the
/// carried integral. This is the fast path used by the shooting loops.
pub(crate) fn shoot_modulus(w: &Weight, r: f64, big_r: f64, phi0: f64, n: usize) -> f64 {
    let p = clamp_and_collapse(integrate(w, r, big_r, phi0, n));
    let m = p.tilde_integral[p.n()] - p.integral_at_r0;
    // a negative blow-up keeps Φ ≡ 0 on the whole existence interval
    if m.is_finite() { m } else { 0.0 }
}

fn ode_defect(p: &PhiSolution) -> f64 {
    let d = derivative4(&p.phi_tilde, p.log_step);
    d.iter()
        .zip(p.grid.iter().zip(p.phi_tilde.iter()))
        .map(|(dp, (&s, &phi))| {
            let lam = p.weight.value(s);
            (dp - (lam * lam - phi * phi) / lam).abs()
        })
        .fold(0.0, f64::max)
}

fn halving_difference(coarse: &PhiSolution, fine: &PhiSolution) -> f64 {
    let mut diff: f64 = 0.0;
    for i in 0..=coarse.n() {
        diff = diff
            .max((coarse.phi_tilde[i] - fine.phi_tilde[2 * i]).abs())
            .max((coarse.tilde_integral[i] - fine.tilde_integral[2 * i]).abs());
    }
    if diff.is_finite() { diff } else { f64::INFINITY }
}

/// Integrates `Φ̃` from `Φ̃(r) = phi0` with classical RK4 on `n` log-uniform
/// steps and estimates the error by step halving.
///
/// When the estimate at `n` exceeds the tolerance the solve is repeated at
/// `2n`; the returned solution then lives on the finer grid.
pub fn solve_phi_tilde(w: &Weight, r: f64, big_r: f64, phi0: f64, n: usize) -> Result<PhiSolution> {
    solve_phi_tilde_with_tol(w, r, big_r, phi0, n, DEFAULT_TOL)
}

pub fn solve_phi_tilde_with_tol(
    w: &Weight,
    r: f64,
    big_r: f64,
    phi0: f64,
    n: usize,
    tol: f64,
) -> Result<PhiSolution> {
    if !(r > 0.0 && big_r > r) {
        return Err(Error::InvalidAnnulus(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
    }
    if n < MIN_GRID {
        return Err(Error::InvalidArgument(format!("grid size {n} below minimum {MIN_GRID}")));
    }
    if !phi0.is_finite() {
        return Err(Error::InvalidArgument(format!("initial value {phi0} is not finite")));
    }
    if !(w.contains(r) && w.contains(big_r)) {
        let s = if w.contains(r) { big_r } else { r };
        let (lo, hi) = w.domain();
        return Err(Error::Domain { s, lo, hi });
    }
    let lam_max = w.max_value();
    let bound = phi0.abs().max(lam_max);
    let scaled_tol = tol * bound.max(1.0);
    // below −max λ the solution decreases and may leave every bound
    let below_weight = phi0 < -lam_max;
    let blows_up = |p: &PhiSolution| p.phi_tilde.iter().any(|v| !v.is_finite() || v.abs() > 1e8 * bound);

    let mut m = n;
    let mut coarse = integrate(w, r, big_r, phi0, m);
    let mut fine = integrate(w, r, big_r, phi0, 2 * m);
    if below_weight && (blows_up(&coarse) || blows_up(&fine)) {
        return Err(Error::InvariantViolation(format!(
            "Φ̃ blows up from φ₀ = {phi0} below −max λ = {}", -lam_max
        )));
    }
    let mut estimate = halving_difference(&coarse, &fine);
    if estimate > scaled_tol {
        m *= 2;
        coarse = fine;
        fine = integrate(w, r, big_r, phi0, 2 * m);
        estimate = halving_difference(&coarse, &fine);
        if estimate > scaled_tol {
            return Err(Error::Accuracy { estimate, tolerance: scaled_tol, n: m });
        }
    }
    let mut sol = coarse;
    sol.error_estimate = estimate;
    sol.residual = ode_defect(&sol);

    let max_abs = sol.phi_tilde.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if !below_weight && max_abs > bound * (1.0 + 1e-12) + scaled_tol {
        return Err(Error::InvariantViolation(format!(
            "|Φ̃| reached {max_abs}, above the a priori bound {bound}"
        )));
    }
    Ok(sol)
}

/// Applies `Φ = max{0, Φ̃}` and locates the collapse radius `r₀`.
///
/// The zero of `Φ̃` is bracketed by the first sign change on the grid,
/// seeded by linear interpolation and then refined by bisection on the RK4
/// sub-step from the left end of that cell.
pub fn clamp_and_collapse(mut p: PhiSolution) -> PhiSolution {
    let n = p.n();
    p.phi = p.phi_tilde.iter().map(|v| v.max(0.0)).collect();
    let first_nonneg = p.phi_tilde.iter().position(|&v| v >= 0.0);
    match first_nonneg {
        Some(0) => {
            p.r0 = p.grid[0];
            p.integral_at_r0 = 0.0;
        }
        None => {
            p.r0 = p.grid[n];
            p.integral_at_r0 = p.tilde_integral[n];
        }
        Some(k) => {
            let t_left = p.t0() + (k - 1) as f64 * p.log_step;
            let (pl, ll) = (p.phi_tilde[k - 1], p.tilde_integral[k - 1]);
            let pr = p.phi_tilde[k];
            let guess = p.log_step * (-pl / (pr - pl)).clamp(0.0, 1.0);
            let eval = |delta: f64| rk4_step(&p.weight, t_left, pl, ll, delta);
            let (mut lo, mut hi) = (0.0, p.log_step);
            // start the bracket from the interpolation guess when it is valid
            if eval(guess).0 < 0.0 {
                lo = guess;
            } else {
                hi = guess;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if eval(mid).0 < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let delta = 0.5 * (lo + hi);
            p.r0 = (t_left + delta).exp();
            p.integral_at_r0 = eval(delta).1;
        }
    }
    p
}

fn clamped(p: &PhiSolution) -> std::borrow::Cow<'_, PhiSolution> {
    if p.is_clamped() {
        std::borrow::Cow::Borrowed(p)
    } else {
        std::borrow::Cow::Owned(clamp_and_collapse(p.clone()))
    }
}

/// `∫_r^R Φ/(sλ) ds` by composite Simpson on the nodes right of `r₀`, with
/// the partial cell at `r₀` integrated through the Hermite interpolant.
pub fn modulus_of(p: &PhiSolution, w: &Weight) -> f64 {
    let p = clamped(p);
    let n = p.n();
    if p.r0 >= p.grid[n] {
        return 0.0;
    }
    let h = p.log_step;
    let t0 = p.t0();
    let cell_integral = |k: usize, from: f64| -> f64 {
        let (d0, _) = p.slope_at(k);
        let (d1, _) = p.slope_at(k + 1);
        let a = t0 + k as f64 * h;
        gauss_legendre(
            |t| {
                let u = (t - a) / h;
                let phi = hermite(p.phi_tilde[k], p.phi_tilde[k + 1], d0, d1, h, u).max(0.0);
                phi / w.value(t.exp())
            },
            from,
            a + h,
            2,
        )
    };
    let k = p.grid.iter().position(|&s| s >= p.r0).unwrap_or(n);
    let mut total = 0.0;
    if k > 0 && p.grid[k] > p.r0 {
        total += cell_integral(k - 1, p.r0.ln());
    }
    let density: Vec<f64> = (k..=n).map(|i| p.phi[i] / w.value(p.grid[i])).collect();
    if density.len() == 2 {
        total += cell_integral(k, t0 + k as f64 * h);
    } else {
        total += simpson(&density, h);
    }
    total
}

/// Recovers `H(s) = r_* exp(∫_r^s Φ/(tλ) dt)` and `Ḣ = HΦ/(sλ)`.
pub fn recover_h(p: &PhiSolution, w: &Weight, r_star: f64) -> Result<RadialProfile> {
    if !(r_star > 0.0) {
        return Err(Error::InvalidArgument(format!("inner target radius must be positive, got {r_star}")));
    }
    let p = clamped(p);
    let h: Vec<f64> = p
        .grid
        .iter()
        .zip(p.tilde_integral.iter())
        .map(|(&s, &l)| if s <= p.r0 { r_star } else { r_star * (l - p.integral_at_r0).max(0.0).exp() })
        .collect();
    let hdot: Vec<f64> = (0..h.len())
        .map(|i| {
            let s = p.grid[i];
            h[i] * p.phi[i] / (s * w.value(s))
        })
        .collect();
    Ok(RadialProfile {
        grid: p.grid.clone(),
        log_step: p.log_step,
        h,
        hdot,
        r_star,
        r0: p.r0,
    })
}

/// Writes the columns `s, phi_tilde, phi, H, Hdot, lambda`.
pub fn write_profile_csv<W: Write>(
    out: &mut W,
    p: &PhiSolution,
    profile: &RadialProfile,
) -> io::Result<()> {
    writeln!(out, "s,phi_tilde,phi,H,Hdot,lambda")?;
    let p = clamped(p);
    for i in 0..p.grid.len() {
        let s = p.grid[i];
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s,
            p.phi_tilde[i],
            p.phi[i],
            profile.h[i],
            profile.hdot[i],
            p.weight.value(s)
        )?;
    }
    Ok(())
}
