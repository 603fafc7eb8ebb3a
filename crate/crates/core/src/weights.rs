//! Radial weights `λ(s)` on a closed interval `[lo, hi]` of radii.
//!
//! A [`Weight`] is an immutable value (tabulated samples live behind an
//! `Arc`), so clones are cheap and sharing across threads is free.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Number of log-uniform samples used by [`Weight::validate`] and the
/// monotonicity check.
pub const VALIDATION_SAMPLES: usize = 4096;

/// Default slack for [`Weight::is_nondecreasing`].
pub const MONOTONE_TOL: f64 = 1e-12;

/// Relative slack when deciding whether a radius lies in the domain.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub enum WeightKind {
    /// `λ(s) = value`
    Constant { value: f64 },
    /// `λ(s) = coeff · s^exponent`
    Power { coeff: f64, exponent: f64 },
    /// `λ(s) = coeff · exp(rate · s)`
    Exponential { coeff: f64, rate: f64 },
    /// `λ(s) = offset + amplitude · sin(frequency · s)`
    Sinusoidal { offset: f64, amplitude: f64, frequency: f64 },
    /// Piecewise-linear interpolation of `(abscissae[i], values[i])`.
    Tabulated { abscissae: Arc<[f64]>, values: Arc<[f64]> },
}

impl fmt::Debug for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightKind::Constant { value } => write!(f, "Constant({value})"),
            WeightKind::Power { coeff, exponent } => write!(f, "Power({coeff}·s^{exponent})"),
            WeightKind::Exponential { coeff, rate } => write!(f, "Exponential({coeff}·e^({rate}s))"),
            WeightKind::Sinusoidal { offset, amplitude, frequency } => {
                write!(f, "Sinusoidal({offset} + {amplitude}·sin({frequency}s))")
            }
            WeightKind::Tabulated { abscissae, .. } => write!(f, "Tabulated({} samples)", abscissae.len()),
        }
    }
}

/// A weight function together with the interval on which it is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    kind: WeightKind,
    lo: f64,
    hi: f64,
}

fn check_domain(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "weight domain must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl Weight {
    pub fn new(kind: WeightKind, lo: f64, hi: f64) -> Result<Self> {
        if let WeightKind::Tabulated { abscissae, values } = &kind {
            if abscissae.len() < 2 || abscissae.len() != values.len() {
                return Err(Error::InvalidArgument(
                    "tabulated weight needs at least two (s, λ) samples".into(),
                ));
            }
        }
        check_domain(lo, hi)?;
        Ok(Weight { kind, lo, hi })
    }

    pub fn constant(value: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(WeightKind::Constant { value }, lo, hi)
    }

    pub fn power(coeff: f64, exponent: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(WeightKind::Power { coeff, exponent }, lo, hi)
    }

    pub fn exponential(coeff: f64, rate: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(WeightKind::Exponential { coeff, rate }, lo, hi)
    }

    pub fn sinusoidal(offset: f64, amplitude: f64, frequency: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(WeightKind::Sinusoidal { offset, amplitude, frequency }, lo, hi)
    }

    /// Piecewise-linear weight through `samples`; the domain is
    /// `[samples[0].0, samples[last].0]`.
    pub fn tabulated(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument(
                "tabulated weight needs at least two (s, λ) samples".into(),
            ));
        }
        let abscissae: Arc<[f64]> = samples.iter().map(|p| p.0).collect();
        let values: Arc<[f64]> = samples.iter().map(|p| p.1).collect();
        let lo = abscissae[0];
        let hi = abscissae[abscissae.len() - 1];
        Self::new(WeightKind::Tabulated { abscissae, values }, lo, hi)
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn contains(&self, s: f64) -> bool {
        let slack = DOMAIN_SLACK * self.hi;
        s >= self.lo - slack && s <= self.hi + slack
    }

    /// Evaluates `λ(s)`, rejecting radii outside the domain.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !self.contains(s) {
            return Err(Error::Domain { s, lo: self.lo, hi: self.hi });
        }
        Ok(self.value(s))
    }

    /// Unchecked evaluation; `s` is clamped into the domain.
    #[inline]
    pub(crate) fn value(&self, s: f64) -> f64 {
        let s = s.clamp(self.lo, self.hi);
        match &self.kind {
            WeightKind::Constant { value } => *value,
            WeightKind::Power { coeff, exponent } => coeff * s.powf(*exponent),
            WeightKind::Exponential { coeff, rate } => coeff * (rate * s).exp(),
            WeightKind::Sinusoidal { offset, amplitude, frequency } => {
                offset + amplitude * (frequency * s).sin()
            }
            WeightKind::Tabulated { abscissae, values } => interpolate(abscissae, values, s),
        }
    }

    /// Log-uniform validation grid over the domain.
    pub fn sample_grid(&self, n: usize) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let mut grid: Vec<f64> = (0..n)
            .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
            .collect();
        grid[0] = self.lo;
        grid[n - 1] = self.hi;
        if let WeightKind::Tabulated { abscissae, .. } = &self.kind {
            grid.extend(abscissae.iter().copied());
            grid.sort_by(f64::total_cmp);
            grid.dedup();
        }
        grid
    }

    /// Checks positivity, finiteness and (for tabulated weights) that the
    /// abscissae increase strictly. Reports the first violation found.
    pub fn validate(&self) -> Result<()> {
        if let WeightKind::Tabulated { abscissae, values } = &self.kind {
            for k in 1..abscissae.len() {
                if !(abscissae[k] > abscissae[k - 1]) {
                    return Err(Error::InvalidWeight {
                        s: abscissae[k],
                        reason: format!("tabulated abscissae not strictly increasing at index {k}"),
                    });
                }
            }
            if !(values[0] > 0.0) || !values[0].is_finite() {
                return Err(Error::InvalidWeight {
                    s: abscissae[0],
                    reason: format!("non-positive value {}", values[0]),
                });
            }
            for k in 1..values.len() {
                let (va, vb) = (values[k - 1], values[k]);
                if !vb.is_finite() {
                    return Err(Error::InvalidWeight {
                        s: abscissae[k],
                        reason: "non-finite value".into(),
                    });
                }
                if vb <= 0.0 {
                    let (a, b) = (abscissae[k - 1], abscissae[k]);
                    let zero = a + va / (va - vb) * (b - a);
                    return Err(Error::InvalidWeight {
                        s: zero,
                        reason: "interpolated weight reaches zero".into(),
                    });
                }
            }
        }
        for s in self.sample_grid(VALIDATION_SAMPLES) {
            let v = self.value(s);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidWeight { s, reason: format!("non-positive value {v}") });
            }
        }
        Ok(())
    }

    /// True when `λ(s₂) ≥ λ(s₁) − tol` for all sampled `s₁ < s₂`.
    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        let mut running_max = f64::NEG_INFINITY;
        for s in self.sample_grid(VALIDATION_SAMPLES) {
            let v = self.value(s);
            if v < running_max - tol {
                return false;
            }
            running_max = running_max.max(v);
        }
        true
    }

    pub fn max_value(&self) -> f64 {
        self.sample_grid(VALIDATION_SAMPLES)
            .into_iter()
            .map(|s| self.value(s))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.sample_grid(VALIDATION_SAMPLES)
            .into_iter()
            .map(|s| self.value(s))
            .fold(f64::INFINITY, f64::min)
    }

    /// Interior breakpoints where a tabulated weight is not differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.kind {
            WeightKind::Tabulated { abscissae, .. } if abscissae.len() > 2 => {
                abscissae[1..abscissae.len() - 1].to_vec()
            }
            _ => Vec::new(),
        }
    }

    /// The weight `c · λ` on the same domain.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor must be positive, got {c}")));
        }
        let kind = match &self.kind {
            WeightKind::Constant { value } => WeightKind::Constant { value: c * value },
            WeightKind::Power { coeff, exponent } => {
                WeightKind::Power { coeff: c * coeff, exponent: *exponent }
            }
            WeightKind::Exponential { coeff, rate } => {
                WeightKind::Exponential { coeff: c * coeff, rate: *rate }
            }
            WeightKind::Sinusoidal { offset, amplitude, frequency } => WeightKind::Sinusoidal {
                offset: c * offset,
                amplitude: c * amplitude,
                frequency: *frequency,
            },
            WeightKind::Tabulated { abscissae, values } => WeightKind::Tabulated {
                abscissae: abscissae.clone(),
                values: values.iter().map(|v| c * v).collect(),
            },
        };
        Self::new(kind, self.lo, self.hi)
    }

    /// The transported weight `s ↦ λ(s / k)` on `[k·lo, k·hi]`.
    pub fn transported(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("scaling factor must be positive, got {k}")));
        }
        let kind = match &self.kind {
            WeightKind::Constant { value } => WeightKind::Constant { value: *value },
            WeightKind::Power { coeff, exponent } => WeightKind::Power {
                coeff: coeff * k.powf(-exponent),
                exponent: *exponent,
            },
            WeightKind::Exponential { coeff, rate } => {
                WeightKind::Exponential { coeff: *coeff, rate: rate / k }
            }
            WeightKind::Sinusoidal { offset, amplitude, frequency } => WeightKind::Sinusoidal {
                offset: *offset,
                amplitude: *amplitude,
                frequency: frequency / k,
            },
            WeightKind::Tabulated { abscissae, values } => WeightKind::Tabulated {
                abscissae: abscissae.iter().map(|a| a * k).collect(),
                values: values.clone(),
            },
        };
        Self::new(kind, self.lo * k, self.hi * k)
    }

    /// Same formula on a different interval. Tabulated weights can only be
    /// restricted to sub-intervals of their samples.
    pub fn with_domain(&self, lo: f64, hi: f64) -> Result<Self> {
        if let WeightKind::Tabulated { .. } = self.kind {
            if !(self.contains(lo) && self.contains(hi)) {
                return Err(Error::Domain { s: if self.contains(lo) { hi } else { lo }, lo: self.lo, hi: self.hi });
            }
        }
        Self::new(self.kind.clone(), lo, hi)
    }

    /// True when `λ(ks)` is a constant multiple of `λ(s)`, so that any
    /// domain may be substituted without changing ratio-only quantities.
    pub fn is_scale_covariant(&self) -> bool {
        matches!(self.kind, WeightKind::Constant { .. } | WeightKind::Power { .. })
    }

    /// Short human-readable description used in output headers.
    pub fn describe(&self) -> String {
        format!("{:?} on [{}, {}]", self.kind, self.lo, self.hi)
    }
}

fn interpolate(abscissae: &[f64], values: &[f64], s: f64) -> f64 {
    let n = abscissae.len();
    let k = abscissae.partition_point(|&a| a <= s).clamp(1, n - 1);
    let (a, b) = (abscissae[k - 1], abscissae[k]);
    let (va, vb) = (values[k - 1], values[k]);
    if b == a {
        return va;
    }
    let u = (s - a) / (b - a);
    va + u * (vb - va)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let c = Weight::constant(1.0, 1.0, 2.0).unwrap();
        assert_eq!(c.eval(1.5).unwrap(), 1.0);
        let p = Weight::power(1.0, 1.0, 1.0, 2.0).unwrap();
        assert!((p.eval(1.5).unwrap() - 1.5).abs() < 1e-15);
        let t = Weight::tabulated(&[(1.0, 1.0), (2.0, 3.0)]).unwrap();
        assert!((t.eval(1.5).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn eval_outside_domain_is_an_error() {
        let c = Weight::constant(1.0, 1.0, 2.0).unwrap();
        assert!(matches!(c.eval(2.5), Err(Error::Domain { .. })));
        assert!(matches!(c.eval(0.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn validate_examples() {
        assert!(Weight::constant(1.0, 1.0, 2.0).unwrap().validate().is_ok());
        assert!(Weight::power(1.0, -1.0, 1.0, 2.0).unwrap().validate().is_ok());
        let bad = Weight::tabulated(&[(1.0, 1.0), (2.0, -1.0)]).unwrap();
        match bad.validate() {
            Err(Error::InvalidWeight { s, .. }) => assert!((s - 1.5).abs() < 1e-12),
            other => panic!("expected violation, got {other:?}"),
        }
        let unordered = Weight::tabulated(&[(1.0, 1.0), (1.8, 2.0), (1.5, 2.0), (2.0, 1.0)]);
        // the domain check passes (1 < 2) but validation rejects the ordering
        assert!(unordered.unwrap().validate().is_err());
        let sine_zero = Weight::sinusoidal(0.5, 1.0, 4.0, 1.0, 2.0).unwrap();
        assert!(sine_zero.validate().is_err());
    }

    #[test]
    fn monotonicity_examples() {
        assert!(Weight::constant(1.0, 1.0, 2.0).unwrap().is_nondecreasing(MONOTONE_TOL));
        assert!(Weight::power(1.0, 1.0, 1.0, 2.0).unwrap().is_nondecreasing(MONOTONE_TOL));
        assert!(!Weight::power(1.0, -1.0, 1.0, 2.0).unwrap().is_nondecreasing(MONOTONE_TOL));
        assert!(Weight::exponential(1.0, 1.0, 1.0, 2.0).unwrap().is_nondecreasing(MONOTONE_TOL));
        assert!(!Weight::sinusoidal(2.0, 1.0, 4.0, 1.0, 2.0).unwrap().is_nondecreasing(MONOTONE_TOL));
    }

    #[test]
    fn scaling_is_exact() {
        let ws = [
            Weight::constant(1.3, 1.0, 2.0).unwrap(),
            Weight::power(2.0, 1.5, 1.0, 2.0).unwrap(),
            Weight::exponential(1.0, 1.0, 1.0, 2.0).unwrap(),
            Weight::sinusoidal(2.0, 1.0, 4.0, 1.0, 2.0).unwrap(),
            Weight::tabulated(&[(1.0, 1.0), (1.4, 2.5), (2.0, 3.0)]).unwrap(),
        ];
        for w in &ws {
            for c in [0.1, 7.0] {
                let sw = w.scaled(c).unwrap();
                for s in [1.0, 1.17, 1.5, 1.99, 2.0] {
                    let lhs = sw.eval(s).unwrap();
                    let rhs = c * w.eval(s).unwrap();
                    assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs(), "{w:?} c={c} s={s}");
                }
            }
        }
    }

    #[test]
    fn transport_moves_the_argument() {
        let w = Weight::power(1.0, 1.0, 1.0, 2.0).unwrap();
        let t = w.transported(3.0).unwrap();
        assert_eq!(t.domain(), (3.0, 6.0));
        assert!((t.eval(4.5).unwrap() - w.eval(1.5).unwrap()).abs() < 1e-14);
        let tab = Weight::tabulated(&[(1.0, 1.0), (2.0, 3.0)]).unwrap().transported(2.0).unwrap();
        assert!((tab.eval(3.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tabulated_is_continuous_under_refinement() {
        let w = Weight::tabulated(&[(1.0, 1.0), (1.3, 2.0), (1.7, 1.5), (2.0, 1.8)]).unwrap();
        for &s in &[1.3, 1.7] {
            let mut prev = f64::INFINITY;
            for k in 1..12 {
                let eps = 0.1 / f64::powi(2.0, k);
                let jump = (w.value(s + eps) - w.value(s)).abs().max((w.value(s - eps) - w.value(s)).abs());
                assert!(jump <= prev + 1e-15);
                prev = jump;
            }
            assert!(prev < 1e-3);
        }
        assert_eq!(w.kinks(), vec![1.3, 1.7]);
    }
}
