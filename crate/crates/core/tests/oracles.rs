use std::f64::consts::PI;

use annular_core::fields::{minimize_polar, minimize_radial, BoundaryMode, PolarOptions};
use annular_core::numerics::observed_order;
use annular_core::{build, fixed_boundary_coefficients, threshold_g, threshold_m, AnnulusPair, RadialCase, Weight};
use rayon::prelude::*;

fn weights() -> Vec<(&'static str, Weight)> {
    vec![
        ("1", Weight::constant(1.0, 1.0, 2.0).unwrap()),
        ("s", Weight::power(1.0, 1.0, 1.0, 2.0).unwrap()),
        ("e^s", Weight::exponential(1.0, 1.0, 1.0, 2.0).unwrap()),
    ]
}

/// A case-1 and a case-2 target for `A(1, 2)`, on either side of `m_λ(2)`.
fn targets(w: &Weight) -> [(RadialCase, f64); 2] {
    let m = threshold_m(w, 2.0).unwrap();
    [(RadialCase::Homeomorphic, m + 0.3), (RadialCase::Collapsing, 1.0 + 0.5 * (m - 1.0))]
}

fn min_polar_energy(w: &Weight, pair: &AnnulusPair, mode: BoundaryMode, n: usize, seeds: u64) -> f64 {
    (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let opts = PolarOptions { n_s: n, n_theta: n, mode, seed, ..Default::default() };
            minimize_polar(w, pair, &opts).unwrap().report.total
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn one_dimensional_minimizer_converges_to_the_ode_profile() {
    for (name, w) in weights() {
        for (case, target) in targets(&w) {
            let pair = AnnulusPair::new(1.0, 2.0, 1.0, target).unwrap();
            let sol = build(&w, &pair).unwrap();
            assert_eq!(sol.case, case);
            let sizes = [512.0, 1024.0, 2048.0];
            let mut gaps = Vec::new();
            for &n in &sizes {
                let min = minimize_radial(&w, &pair, n as usize).unwrap();
                let v = &min.profile;
                let worst = v.grid.iter().zip(&v.values).map(|(&s, h)| (h - sol.sample(s).h).abs()).fold(0.0, f64::max);
                assert!(worst <= 1.0 / (n * n), "λ = {name}, {case:?}, n = {n}: profile error {worst}");
                gaps.push((min.report.total - sol.energy).abs());
            }
            let order = observed_order(&sizes, &gaps, 1e-12).unwrap();
            assert!(order >= 1.5, "λ = {name}, {case:?}: energy gaps {gaps:?}, order {order}");
        }
    }
}

#[test]
fn no_polar_competitor_beats_the_radial_minimum() {
    for (name, w) in weights() {
        for (case, target) in targets(&w) {
            let pair = AnnulusPair::new(1.0, 2.0, 1.0, target).unwrap();
            let exact = build(&w, &pair).unwrap().energy;
            let best = min_polar_energy(&w, &pair, BoundaryMode::Free, 64, 20);
            assert!(best >= exact * (1.0 - 5e-3), "λ = {name}, {case:?}: {best} < {exact}");
        }
    }
}

#[test]
fn thin_targets_admit_no_competitor_for_an_oscillating_weight() {
    let w = Weight::sinusoidal(2.0, 1.0, 4.0, 1.0, 2.0).unwrap();
    let g = threshold_g(&w, 2.0).unwrap();
    for frac in [0.5, 1.0] {
        let pair = AnnulusPair::new(1.0, 2.0, 1.0, (frac * g.ln()).exp()).unwrap();
        let exact = build(&w, &pair).unwrap().energy;
        let best = min_polar_energy(&w, &pair, BoundaryMode::Free, 64, 20);
        assert!(best >= exact * (1.0 - 5e-3), "fraction {frac}: {best} < {exact}");
    }
}

#[test]
fn fixed_outer_boundary_with_a_decreasing_weight() {
    let w = Weight::power(1.0, -1.0, 1.0, 2.0).unwrap();
    let pair = AnnulusPair::new(1.0, 2.0, 1.0, 1.1).unwrap();
    let sol = build(&w, &pair).unwrap();
    let coeffs = fixed_boundary_coefficients(&sol, &w).unwrap();
    assert!(coeffs.residual <= 1e-6, "residual {}", coeffs.residual);
    let best = min_polar_energy(&w, &pair, BoundaryMode::FixedOuter, 64, 20);
    assert!(best >= sol.energy * (1.0 - 5e-3), "{best} < {}", sol.energy);
}

#[test]
fn closed_forms_of_the_unit_family() {
    let w = Weight::constant(1.0, 1.0, 2.0).unwrap();
    let nitsche = build(&w, &AnnulusPair::new(1.0, 2.0, 1.0, 1.25).unwrap()).unwrap();
    assert!((nitsche.energy - 15.0 * PI / 8.0).abs() < 1e-6);
    let conformal = build(&w, &AnnulusPair::new(1.0, 2.0, 1.0, 2.0).unwrap()).unwrap();
    assert!((conformal.energy - 6.0 * PI).abs() < 1e-6);
    let collapsing = build(&w, &AnnulusPair::new(1.0, 2.0, 1.0, 3.0 / (2.0 * 2f64.sqrt())).unwrap()).unwrap();
    assert!((collapsing.r0() - 2f64.sqrt()).abs() < 1e-6);
    assert!((collapsing.energy - 2.0 * PI * (0.375 + 0.5 * 2f64.ln())).abs() < 1e-5);
}
