//! Discrete free Lagrangians: integrals over the domain annulus whose value
//! depends only on the boundary data of the map.
//!
//! Every identity is evaluated cell by cell on the bilinear interpolant of
//! the grid map: `h`, `h_s` and `h_θ` are taken at the cell centre, where the
//! bilinear Jacobian equals the cell average. Integrands are written per
//! `ds dθ`, so `J dz = Im(conj(h_s) h_θ) ds dθ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::PolarGridMap;
use crate::numerics::gauss_legendre;

/// Panels of the one-dimensional quadrature used for boundary values.
const RHS_PANELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `residual / |rhs|`, or the plain residual when `rhs = 0`.
    pub relative: f64,
}

impl IdentityResidual {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let residual = (lhs - rhs).abs();
        let relative = if rhs != 0.0 { residual / rhs.abs() } else { residual };
        IdentityResidual { lhs, rhs, residual, relative }
    }
}

/// A `C¹` function `C(s, G)` with its partial derivatives.
pub trait Density {
    fn value(&self, s: f64, g: f64) -> f64;
    fn d_s(&self, s: f64, g: f64) -> f64;
    fn d_g(&self, s: f64, g: f64) -> f64;
}

/// A [`Density`] assembled from three closures.
pub struct FnDensity<C, Cs, Cg> {
    pub value: C,
    pub d_s: Cs,
    pub d_g: Cg,
}

impl<C, Cs, Cg> Density for FnDensity<C, Cs, Cg>
where
    C: Fn(f64, f64) -> f64,
    Cs: Fn(f64, f64) -> f64,
    Cg: Fn(f64, f64) -> f64,
{
    fn value(&self, s: f64, g: f64) -> f64 {
        (self.value)(s, g)
    }
    fn d_s(&self, s: f64, g: f64) -> f64 {
        (self.d_s)(s, g)
    }
    fn d_g(&self, s: f64, g: f64) -> f64 {
        (self.d_g)(s, g)
    }
}

/// Centre values of one grid cell.
#[derive(Debug, Clone, Copy)]
struct Cell {
    s: f64,
    /// `Δs Δθ`
    area: f64,
    h: Complex64,
    h_s: Complex64,
    h_theta: Complex64,
    /// `(|h|_{outer} − |h|_{inner}) / Δs`, averaged over the two columns.
    modulus_s: f64,
}

impl Cell {
    fn jacobian_ds_dtheta(&self) -> f64 {
        (self.h_s.conj() * self.h_theta).im
    }
}

fn fold_cells(m: &PolarGridMap, mut f: impl FnMut(&Cell) -> f64) -> f64 {
    let nt = m.n_theta;
    let dth = m.angle_step();
    let mut total = 0.0;
    for i in 0..m.n_s - 1 {
        let (s0, s1) = (m.radius(i), m.radius(i + 1));
        let ds = s1 - s0;
        let mut row = 0.0;
        for j in 0..nt {
            let jn = (j + 1) % nt;
            let (a, b, c, d) = (m.at(i, j), m.at(i + 1, j), m.at(i, jn), m.at(i + 1, jn));
            let cell = Cell {
                s: 0.5 * (s0 + s1),
                area: ds * dth,
                h: 0.25 * (a + b + c + d),
                h_s: ((b - a) + (d - c)) / (2.0 * ds),
                h_theta: ((c - a) + (d - b)) / (2.0 * dth),
                modulus_s: ((b.norm() - a.norm()) + (d.norm() - c.norm())) / (2.0 * ds),
            };
            row += f(&cell);
        }
        total += row;
    }
    total
}

/// `∫ N(|h|) J dz` against `2π ∫ N(G) G dG`.
pub fn fl_pullback_residual(m: &PolarGridMap, n: impl Fn(f64) -> f64) -> IdentityResidual {
    let lhs = fold_cells(m, |c| n(c.h.norm()) * c.jacobian_ds_dtheta() * c.area);
    let rhs = 2.0 * PI * gauss_legendre(|g| n(g) * g, m.pair.r_star, m.pair.big_r_star, RHS_PANELS);
    IdentityResidual::new(lhs, rhs)
}

/// `∫∫ A(|h|) ∂|h|/∂s ds dθ` against `2π ∫ A(τ) dτ`.
pub fn fl_radial_residual(m: &PolarGridMap, a: impl Fn(f64) -> f64) -> IdentityResidual {
    let lhs = fold_cells(m, |c| a(c.h.norm()) * c.modulus_s * c.area);
    let rhs = 2.0 * PI * gauss_legendre(a, m.pair.r_star, m.pair.big_r_star, RHS_PANELS);
    IdentityResidual::new(lhs, rhs)
}

/// `∫∫ B(s) Im(h_θ/h) ds dθ` against `2π ∫ B(t) dt`.
pub fn fl_tangential_residual(m: &PolarGridMap, b: impl Fn(f64) -> f64) -> Result<IdentityResidual> {
    if let Some(k) = m.values.iter().position(|h| !(h.norm_sqr() > 0.0)) {
        return Err(Error::Degeneracy(format!("zero modulus at node ({}, {})", k / m.n_theta, k % m.n_theta)));
    }
    let lhs = fold_cells(m, |c| b(c.s) * (c.h_theta / c.h).im * c.area);
    let rhs = 2.0 * PI * gauss_legendre(b, m.pair.r, m.pair.big_r, RHS_PANELS);
    Ok(IdentityResidual::new(lhs, rhs))
}

/// `∫ [(2C + G C_G) J + C_s (|h|²/s) Im(h_θ/h)] dz` against
/// `2π [R_*² C(R, R_*) − r_*² C(r, r_*)]`.
pub fn fl_boundary_residual(m: &PolarGridMap, c: &impl Density) -> IdentityResidual {
    let lhs = fold_cells(m, |cell| {
        let g = cell.h.norm();
        let area_part = (2.0 * c.value(cell.s, g) + g * c.d_g(cell.s, g)) * cell.jacobian_ds_dtheta();
        let angular_part = c.d_s(cell.s, g) * (cell.h.conj() * cell.h_theta).im;
        (area_part + angular_part) * cell.area
    });
    let p = &m.pair;
    let rhs = 2.0 * PI * (p.big_r_star.powi(2) * c.value(p.big_r, p.big_r_star) - p.r_star.powi(2) * c.value(p.r, p.r_star));
    IdentityResidual::new(lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::maps::{make_test_map, Curve, TestMapKind, TestMapSpec};
    use crate::radial::{build, AnnulusPair};
    use crate::weights::Weight;

    fn map(kind: TestMapKind, pair: AnnulusPair, n: usize) -> PolarGridMap {
        make_test_map(&TestMapSpec { kind, pair, n_s: n, n_theta: n }).unwrap()
    }

    fn identity(n: usize) -> PolarGridMap {
        map(TestMapKind::radial(Curve::new(|s| s)), AnnulusPair::new(1.0, 2.0, 1.0, 2.0).unwrap(), n)
    }

    fn twist(n: usize) -> PolarGridMap {
        let kind = TestMapKind::twist(Curve::new(|s| s), Curve::new(f64::ln));
        map(kind, AnnulusPair::new(1.0, 2.0, 1.0, 2.0).unwrap(), n)
    }

    fn nitsche(n: usize) -> (PolarGridMap, crate::radial::RadialSolution) {
        let w = Weight::constant(1.0, 1.0, 2.0).unwrap();
        let pair = AnnulusPair::new(1.0, 2.0, 1.0, 1.25).unwrap();
        let sol = build(&w, &pair).unwrap();
        (map(TestMapKind::radial(Curve::profile_of(&sol)), pair, n), sol)
    }

    #[test]
    fn pullback_examples() {
        let id = fl_pullback_residual(&identity(128), |_| 1.0);
        assert!((id.rhs - 3.0 * PI).abs() < 1e-12);
        assert!(id.relative < 2e-3, "{id:?}");
        let tw = fl_pullback_residual(&twist(128), |_| 1.0);
        assert!((tw.lhs - 3.0 * PI).abs() / (3.0 * PI) < 2e-3, "{tw:?}");
        let (m, _) = nitsche(128);
        let ni = fl_pullback_residual(&m, |g| g);
        assert!((ni.rhs - 2.0 * PI * 61.0 / 192.0).abs() < 1e-12);
        assert!(ni.relative < 5e-3, "{ni:?}");
    }

    #[test]
    fn radial_examples() {
        let id = fl_radial_residual(&identity(64), |_| 1.0);
        assert!((id.rhs - 2.0 * PI).abs() < 1e-12);
        assert!(id.relative < 2e-3);
        let (m, _) = nitsche(128);
        let ni = fl_radial_residual(&m, |t| t);
        assert!((ni.rhs - 9.0 * PI / 16.0).abs() < 1e-12);
        assert!(ni.relative < 5e-3, "{ni:?}");
        let tw = fl_radial_residual(&twist(64), |_| 1.0);
        assert!((tw.lhs - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn tangential_examples() {
        let id = fl_tangential_residual(&identity(64), |_| 1.0).unwrap();
        assert!((id.rhs - 2.0 * PI).abs() < 1e-12);
        assert!(id.relative < 2e-3, "{id:?}");
        let tw = fl_tangential_residual(&twist(128), |t| t).unwrap();
        assert!((tw.rhs - 3.0 * PI).abs() < 1e-12);
        assert!(tw.relative < 2e-3, "{tw:?}");
        let pair = AnnulusPair::new(1.0, 2.0, 1.0, 2.0).unwrap();
        let p = map(TestMapKind::perturbed(TestMapKind::radial(Curve::new(|s| s)), 0.02, 7), pair, 128);
        assert!(fl_tangential_residual(&p, |_| 1.0).unwrap().relative <= 1e-3);
    }

    #[test]
    fn tangential_rejects_zero_modulus() {
        let mut m = identity(16);
        m.values[20] = Complex64::new(0.0, 0.0);
        assert!(matches!(fl_tangential_residual(&m, |_| 1.0), Err(Error::Degeneracy(_))));
    }

    #[test]
    fn boundary_examples() {
        let one = FnDensity { value: |_, _| 1.0, d_s: |_, _| 0.0, d_g: |_, _| 0.0 };
        let id = fl_boundary_residual(&identity(128), &one);
        assert!((id.rhs - 6.0 * PI).abs() < 1e-12);
        assert!(id.relative < 2e-3, "{id:?}");

        let (m, sol) = nitsche(128);
        let phi = FnDensity {
            value: |s: f64, _| sol.sample(s).phi,
            d_s: |s: f64, _| sol.sample(s).phi_dot,
            d_g: |_, _| 0.0,
        };
        let ni = fl_boundary_residual(&m, &phi);
        assert!((ni.rhs - 15.0 * PI / 8.0).abs() < 1e-7, "{ni:?}");
        assert!(ni.relative < 5e-3, "{ni:?}");

        let lin = FnDensity { value: |s, _| s, d_s: |_, _| 1.0, d_g: |_, _| 0.0 };
        let tw = fl_boundary_residual(&twist(128), &lin);
        assert!(tw.relative < 5e-3, "{tw:?}");
    }
}
