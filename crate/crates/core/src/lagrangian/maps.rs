//! Generators for admissible test maps on polar grids.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::perturb::Perturbation;
use crate::fields::{negative_jacobian_fraction, BoundaryMode, PolarGridMap};
use crate::radial::{AnnulusPair, RadialSolution};

/// A shared scalar function of one variable.
#[derive(Clone)]
pub struct Curve(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl Curve {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Curve(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Curve::new(move |_| c)
    }

    /// The profile `H` of a radial solution.
    pub fn profile_of(sol: &RadialSolution) -> Self {
        let sol = sol.clone();
        Curve::new(move |s| sol.sample(s).h)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Curve(..)")
    }
}

#[derive(Debug, Clone)]
pub enum TestMapKind {
    /// `H(s) e^{iθ}`
    Radial { profile: Curve },
    /// `H(s) e^{i(θ + φ(s))}`
    Twist { profile: Curve, shift: Curve },
    /// `base(s̃, θ + ψ)` for a seeded perturbation `(s̃, ψ)` that fixes
    /// both boundary circles pointwise.
    Perturbed { base: Box<TestMapKind>, amplitude: f64, seed: u64 },
}

impl TestMapKind {
    pub fn radial(profile: Curve) -> Self {
        TestMapKind::Radial { profile }
    }

    pub fn twist(profile: Curve, shift: Curve) -> Self {
        TestMapKind::Twist { profile, shift }
    }

    pub fn perturbed(base: TestMapKind, amplitude: f64, seed: u64) -> Self {
        TestMapKind::Perturbed { base: Box::new(base), amplitude, seed }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TestMapKind::Radial { .. } => "radial",
            TestMapKind::Twist { .. } => "twist",
            TestMapKind::Perturbed { .. } => "perturbed",
        }
    }

    fn sampler(&self, pair: &AnnulusPair) -> Box<dyn Fn(f64, f64) -> Complex64 + '_> {
        match self {
            TestMapKind::Radial { profile } => Box::new(move |s, t| Complex64::from_polar(profile.eval(s), t)),
            TestMapKind::Twist { profile, shift } => {
                Box::new(move |s, t| Complex64::from_polar(profile.eval(s), t + shift.eval(s)))
            }
            TestMapKind::Perturbed { base, amplitude, seed } => {
                let p = Perturbation::new(*seed, *amplitude, pair.r, pair.big_r, false);
                let inner = base.sampler(pair);
                Box::new(move |s, t| inner(p.radius(s, t), t + p.angle(s, t)))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestMapSpec {
    pub kind: TestMapKind,
    pub pair: AnnulusPair,
    pub n_s: usize,
    pub n_theta: usize,
}

/// Samples the map, pulls moduli back into `[r_*, R_*]` (exactly onto the
/// target circles on the boundary rows), and rejects results that are not
/// admissible or fold some grid cell.
pub fn make_test_map(spec: &TestMapSpec) -> Result<PolarGridMap> {
    let pair = spec.pair;
    let f = spec.kind.sampler(&pair);
    let mut m = PolarGridMap::from_fn(pair, BoundaryMode::Free, spec.n_s, spec.n_theta, f)?;
    let last = m.n_s - 1;
    for i in 0..m.n_s {
        for j in 0..m.n_theta {
            let h = &mut m.values[i * spec.n_theta + j];
            let g = h.norm();
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Generation(format!("node ({i}, {j}) maps to {h}")));
            }
            let target = match i {
                0 => pair.r_star,
                _ if i == last => pair.big_r_star,
                _ => g.clamp(pair.r_star, pair.big_r_star),
            };
            *h *= target / g;
        }
    }
    m.check_admissible().map_err(|e| Error::Generation(format!("{} map: {e}", spec.kind.label())))?;
    let folded = negative_jacobian_fraction(&m);
    if folded > 0.0 {
        return Err(Error::Generation(format!(
            "{} map folds {:.3}% of the grid cells",
            spec.kind.label(),
            100.0 * folded
        )));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::winding_number;
    use crate::radial::build;
    use crate::weights::Weight;

    fn spec(kind: TestMapKind, pair: AnnulusPair, n: usize) -> TestMapSpec {
        TestMapSpec { kind, pair, n_s: n, n_theta: n }
    }

    #[test]
    fn radial_nitsche_map_is_admissible() {
        let w = Weight::constant(1.0, 1.0, 2.0).unwrap();
        let pair = AnnulusPair::new(1.0, 2.0, 1.0, 1.25).unwrap();
        let sol = build(&w, &pair).unwrap();
        let m = make_test_map(&spec(TestMapKind::radial(Curve::profile_of(&sol)), pair, 32)).unwrap();
        for i in 0..m.n_s {
            assert_eq!(winding_number(&m, i).unwrap(), 1);
        }
        assert!((m.at(16, 3).norm() - 0.5 * (m.radius(16) + 1.0 / m.radius(16))).abs() < 1e-9);
    }

    #[test]
    fn twist_has_unit_cell_jacobians() {
        let pair = AnnulusPair::new(1.0, 2.0, 1.0, 2.0).unwrap();
        let kind = TestMapKind::twist(Curve::new(|s| s), Curve::new(f64::ln));
        let m = make_test_map(&spec(kind, pair, 64)).unwrap();
        let (dth, nt) = (m.angle_step(), m.n_theta);
        for i in 0..m.n_s - 1 {
            let (s0, s1) = (m.radius(i), m.radius(i + 1));
            for j in 0..nt {
                let jn = (j + 1) % nt;
                let (a, b, c, d) = (m.at(i, j), m.at(i + 1, j), m.at(i, jn), m.at(i + 1, jn));
                let hs = ((b - a) + (d - c)) / (2.0 * (s1 - s0));
                let ht = ((c - a) + (d - b)) / (2.0 * dth);
                let jac = (hs.conj() * ht).im / (0.5 * (s0 + s1));
                assert!((jac - 1.0).abs() < 2e-3, "cell ({i}, {j}): {jac}");
            }
        }
    }

    #[test]
    fn perturbed_identity_is_admissible_and_seeded() {
        let pair = AnnulusPair::new(1.0, 2.0, 1.0, 2.0).unwrap();
        let kind = |seed| TestMapKind::perturbed(TestMapKind::radial(Curve::new(|s| s)), 0.02, seed);
        let a = make_test_map(&spec(kind(1), pair, 48)).unwrap();
        let b = make_test_map(&spec(kind(1), pair, 48)).unwrap();
        let c = make_test_map(&spec(kind(2), pair, 48)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn violent_perturbation_is_a_generation_error() {
        let pair = AnnulusPair::new(1.0, 2.0, 1.0, 2.0).unwrap();
        let kind = TestMapKind::perturbed(TestMapKind::radial(Curve::new(|s| s)), 60.0, 4);
        assert!(matches!(make_test_map(&spec(kind, pair, 48)), Err(Error::Generation(_))));
    }
}
