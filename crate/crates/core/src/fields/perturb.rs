//! Seeded smooth perturbations of radial maps.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Highest angular frequency in a perturbation.
pub const MODES: usize = 3;

/// Random trigonometric polynomial `Σ_{k=1}^{MODES} a_k cos kθ + b_k sin kθ`
/// normalized so that `Σ |a_k| + |b_k| = 1`, hence `|q| ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    cos: [f64; MODES],
    sin: [f64; MODES],
}

impl TrigPolynomial {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut cos = [0.0; MODES];
        let mut sin = [0.0; MODES];
        for k in 0..MODES {
            cos[k] = rng.gen_range(-1.0..1.0) / (k + 1) as f64;
            sin[k] = rng.gen_range(-1.0..1.0) / (k + 1) as f64;
        }
        let total: f64 = cos.iter().chain(sin.iter()).map(|c| c.abs()).sum::<f64>().max(1e-12);
        for k in 0..MODES {
            cos[k] /= total;
            sin[k] /= total;
        }
        TrigPolynomial { cos, sin }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        (0..MODES)
            .map(|k| {
                let f = (k + 1) as f64 * theta;
                self.cos[k] * f.cos() + self.sin[k] * f.sin()
            })
            .sum()
    }
}

/// A perturbation `(s, θ) ↦ (s̃, ψ)` of the radius fed to the profile and of
/// the angle. Both vanish on the boundary circles except for the angular
/// slip, which is only switched on when the outer boundary is free.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub amplitude: f64,
    r: f64,
    big_r: f64,
    radial: [TrigPolynomial; 2],
    angular: [TrigPolynomial; 2],
    slip: Option<TrigPolynomial>,
}

impl Perturbation {
    pub fn new(seed: u64, amplitude: f64, r: f64, big_r: f64, boundary_slip: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radial = [TrigPolynomial::random(&mut rng), TrigPolynomial::random(&mut rng)];
        let angular = [TrigPolynomial::random(&mut rng), TrigPolynomial::random(&mut rng)];
        let slip = TrigPolynomial::random(&mut rng);
        Perturbation { amplitude, r, big_r, radial, angular, slip: boundary_slip.then_some(slip) }
    }

    /// Bump `4(s − r)(R − s)/(R − r)²` with values in `[0, 1]`, and the
    /// affine coordinate `2u − 1` with `u = (s − r)/(R − r)`.
    fn shapes(&self, s: f64) -> (f64, f64) {
        let u = ((s - self.r) / (self.big_r - self.r)).clamp(0.0, 1.0);
        (4.0 * u * (1.0 - u), 2.0 * u - 1.0)
    }

    /// Perturbed radius, kept inside `[r, R]`.
    pub fn radius(&self, s: f64, theta: f64) -> f64 {
        let (bump, lin) = self.shapes(s);
        let q = 0.5 * (self.radial[0].eval(theta) + lin * self.radial[1].eval(theta));
        (s + self.amplitude * 0.25 * (self.big_r - self.r) * bump * q).clamp(self.r, self.big_r)
    }

    pub fn angle(&self, s: f64, theta: f64) -> f64 {
        let (bump, lin) = self.shapes(s);
        let mut psi = 0.5 * bump * (self.angular[0].eval(theta) + lin * self.angular[1].eval(theta));
        if let Some(slip) = &self.slip {
            psi += slip.eval(theta);
        }
        self.amplitude * psi
    }
}

/// `θ_j = 2πj/n`.
pub fn angles(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_bounded() {
        let a = Perturbation::new(7, 0.05, 1.0, 2.0, true);
        let b = Perturbation::new(7, 0.05, 1.0, 2.0, true);
        let c = Perturbation::new(8, 0.05, 1.0, 2.0, true);
        assert_eq!(a.radius(1.3, 0.4), b.radius(1.3, 0.4));
        assert_ne!(a.radius(1.3, 0.4), c.radius(1.3, 0.4));
        for th in angles(64) {
            assert_eq!(a.radius(1.0, th), 1.0);
            assert_eq!(a.radius(2.0, th), 2.0);
            assert!(a.angle(1.5, th).abs() <= 0.1);
        }
        let fixed = Perturbation::new(7, 0.05, 1.0, 2.0, false);
        assert_eq!(fixed.angle(2.0, 1.0), 0.0);
    }
}
