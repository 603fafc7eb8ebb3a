use annular_core::fields::{minimize_polar, polar_energy, BoundaryMode, DescentOptions, PolarInit, PolarOptions};
use annular_core::lagrangian::{
    fl_boundary_residual, fl_pullback_residual, fl_radial_residual, fl_tangential_residual, isoperimetric_margin,
    make_test_map, Curve, FnDensity, TestMapKind, TestMapSpec,
};
use annular_core::ode::solve_phi_tilde_with_tol;
use annular_core::{
    build, clamp_and_collapse, energy_closed_form, modulus_of, solve_phi_tilde, threshold_g,
    threshold_m, AnnulusPair, Weight,
};
use proptest::prelude::*;

fn weight_strategy() -> impl Strategy<Value = Weight> {
    prop_oneof![
        (0.3f64..3.0).prop_map(|v| Weight::constant(v, 1.0, 3.0).unwrap()),
        (0.3f64..3.0, -1.5f64..2.0).prop_map(|(c, e)| Weight::power(c, e, 1.0, 3.0).unwrap()),
        (0.3f64..3.0, -1.0f64..1.0).prop_map(|(c, a)| Weight::exponential(c, a, 1.0, 3.0).unwrap()),
        (1.5f64..3.0, 0.0f64..1.0, 0.5f64..5.0).prop_map(|(o, a, f)| Weight::sinusoidal(o, a, f, 1.0, 3.0).unwrap()),
    ]
}

fn nondecreasing_strategy() -> impl Strategy<Value = Weight> {
    prop_oneof![
        (0.3f64..3.0).prop_map(|v| Weight::constant(v, 1.0, 3.0).unwrap()),
        (0.3f64..3.0, 0.0f64..2.0).prop_map(|(c, e)| Weight::power(c, e, 1.0, 3.0).unwrap()),
        (0.3f64..3.0, 0.0f64..1.0).prop_map(|(c, a)| Weight::exponential(c, a, 1.0, 3.0).unwrap()),
    ]
}

fn lambda(w: &Weight, s: f64) -> f64 {
    w.eval(s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn weight_scaling_is_exact(w in weight_strategy(), c in 0.05f64..20.0, u in 0.0f64..1.0) {
        let s = 1.0 + 2.0 * u;
        let sw = w.scaled(c).unwrap();
        let rhs = c * lambda(&w, s);
        prop_assert!((lambda(&sw, s) - rhs).abs() <= 1e-14 * rhs.abs());
    }

    #[test]
    fn phi_moves_toward_the_weight(w in weight_strategy(), phi0 in -0.25f64..3.0, big_r in 1.5f64..3.0) {
        let p = solve_phi_tilde(&w, 1.0, big_r, phi0 * w.min_value(), 1024).unwrap();
        for i in 1..p.n() {
            let (s, phi) = (p.grid[i], p.phi_tilde[i]);
            let lam = lambda(&w, s);
            let drift = lam * lam - phi * phi;
            if drift.abs() > 1e-4 {
                let delta = p.phi_tilde[i + 1] - p.phi_tilde[i - 1];
                prop_assert_eq!(delta > 0.0, drift > 0.0, "s = {}, Φ̃ = {}, λ = {}", s, phi, lam);
            }
        }
    }

    #[test]
    fn solutions_never_cross(w in weight_strategy(), frac in -0.9f64..2.0, gap in 1e-6f64..1.0) {
        let a = frac * w.min_value();
        let lo = solve_phi_tilde(&w, 1.0, 2.5, a, 1024).unwrap();
        let hi = solve_phi_tilde(&w, 1.0, 2.5, a + gap, 1024).unwrap();
        for &s in &lo.grid {
            prop_assert!(lo.eval_tilde(s).0 < hi.eval_tilde(s).0, "crossing at s = {}", s);
        }
    }

    #[test]
    fn scaling_the_domain_transports_the_solution(w in weight_strategy(), frac in -0.9f64..2.0, k in 0.2f64..5.0) {
        let phi0 = frac * w.min_value();
        let base = clamp_and_collapse(solve_phi_tilde(&w, 1.0, 2.0, phi0, 2048).unwrap());
        let wk = w.transported(k).unwrap();
        let moved = clamp_and_collapse(solve_phi_tilde(&wk, k, 2.0 * k, phi0, 2048).unwrap());
        for i in (0..base.grid.len()).step_by(64) {
            let s = base.grid[i];
            prop_assert!((moved.eval_tilde(k * s).0 - base.phi_tilde[i]).abs() < 1e-8);
        }
        prop_assert!((modulus_of(&base, &w) - modulus_of(&moved, &wk)).abs() < 1e-8);
    }

    #[test]
    fn halving_the_step_cuts_the_defect_eightfold(w in weight_strategy(), phi0 in 0.0f64..1.5) {
        let coarse = solve_phi_tilde_with_tol(&w, 1.0, 2.0, phi0, 32, 1e3).unwrap();
        let fine = solve_phi_tilde_with_tol(&w, 1.0, 2.0, phi0, 64, 1e3).unwrap();
        prop_assert!(coarse.n() == 32 && fine.n() == 64);
        prop_assume!(coarse.residual > 1e-11);
        prop_assert!(coarse.residual / fine.residual >= 8.0, "{} -> {}", coarse.residual, fine.residual);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn building_at_the_threshold_gives_zero_initial_value(w in nondecreasing_strategy(), rho in 1.2f64..2.5) {
        let m = threshold_m(&w, rho).unwrap();
        let sol = build(&w, &AnnulusPair::new(1.0, rho, 1.0, m).unwrap()).unwrap();
        prop_assert!(sol.phi0().abs() <= 1e-7, "φ₀ = {}", sol.phi0());
    }

    #[test]
    fn thin_targets_keep_phi_below_the_weight(w in weight_strategy(), rho in 1.2f64..2.5, frac in 0.05f64..1.0) {
        let g = threshold_g(&w, rho).unwrap();
        let target = (frac * g.ln()).exp();
        let sol = build(&w, &AnnulusPair::new(1.0, rho, 1.0, target).unwrap()).unwrap();
        let p = &sol.phi;
        let excess = p.grid.iter().zip(&p.phi).map(|(&s, f)| f - lambda(&w, s)).fold(f64::MIN, f64::max);
        prop_assert!(excess <= 1e-8, "max(Φ − λ) = {}", excess);
    }

    #[test]
    fn energy_is_homogeneous_in_the_weight(w in weight_strategy(), c in 0.1f64..10.0, target in 1.05f64..2.5) {
        let pair = AnnulusPair::new(1.0, 2.0, 1.0, target).unwrap();
        let a = build(&w, &pair).unwrap();
        let wc = w.scaled(c).unwrap();
        let b = build(&wc, &pair).unwrap();
        let (ea, eb) = (energy_closed_form(&a, &w), energy_closed_form(&b, &wc));
        prop_assert!((eb - c * ea).abs() <= 1e-7 * c * ea, "{} vs {}", eb, c * ea);
        prop_assert_eq!(a.profile.h.len(), b.profile.h.len());
        for (x, y) in a.profile.h.iter().zip(&b.profile.h) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn thresholds_increase_along_a_ladder(w in nondecreasing_strategy(), start in 1.1f64..1.5) {
        let ladder: Vec<f64> = (0..5).map(|k| start + 0.3 * k as f64).collect();
        let ms: Vec<f64> = ladder.iter().map(|&r| threshold_m(&w, r).unwrap()).collect();
        let gs: Vec<f64> = ladder.iter().map(|&r| threshold_g(&w, r).unwrap()).collect();
        for k in 1..ladder.len() {
            prop_assert!(ms[k] > ms[k - 1], "m: {:?}", ms);
            prop_assert!(gs[k] > gs[k - 1], "g: {:?}", gs);
        }
    }

    #[test]
    fn phi_stays_below_a_nondecreasing_weight(w in nondecreasing_strategy(), target in 1.05f64..3.0) {
        let sol = build(&w, &AnnulusPair::new(1.0, 2.0, 1.0, target).unwrap()).unwrap();
        let p = &sol.phi;
        let first = p.grid.iter().zip(&p.phi).position(|(&s, &f)| f <= lambda(&w, s));
        if let Some(i0) = first {
            for i in i0..p.grid.len() {
                prop_assert!(p.phi[i] <= lambda(&w, p.grid[i]) + 1e-9, "s = {}", p.grid[i]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn polar_energy_scales_with_the_weight(c in 0.1f64..10.0, seed in 0u64..1000) {
        let w = Weight::exponential(1.0, 1.0, 1.0, 2.0).unwrap();
        let pair = AnnulusPair::new(1.0, 2.0, 1.0, 1.6).unwrap();
        let opts = PolarOptions {
            n_s: 16,
            n_theta: 16,
            mode: BoundaryMode::Free,
            init: PolarInit::Perturbed { amplitude: 0.05 },
            seed,
            descent: DescentOptions { max_iter: 200, ..Default::default() },
        };
        let wc = w.scaled(c).unwrap();
        let a = minimize_polar(&w, &pair, &opts).unwrap();
        let b = minimize_polar(&wc, &pair, &opts).unwrap();
        let ea = polar_energy(&w, &a.map).unwrap().total;
        let eb = polar_energy(&wc, &a.map).unwrap().total;
        prop_assert!((eb - c * ea).abs() <= 1e-13 * c * ea);
        for (x, y) in a.map.values.iter().zip(&b.map.values) {
            prop_assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn free_lagrangians_do_not_see_the_map(seed_a in 0u64..500, seed_b in 500u64..1000, amp in 0.005f64..0.03) {
        let pair = AnnulusPair::new(1.0, 2.0, 1.0, 1.5).unwrap();
        let base = || TestMapKind::radial(Curve::new(|s| 1.0 + 0.5 * (s - 1.0)));
        let map = |seed| {
            make_test_map(&TestMapSpec { kind: TestMapKind::perturbed(base(), amp, seed), pair, n_s: 128, n_theta: 128 })
                .unwrap()
        };
        let (a, b) = (map(seed_a), map(seed_b));
        let tol = 1e-3;
        let close = |x: f64, y: f64, rhs: f64| (x - y).abs() <= 2.0 * tol * rhs.abs();
        let (pa, pb) = (fl_pullback_residual(&a, |g| g * g), fl_pullback_residual(&b, |g| g * g));
        prop_assert!(close(pa.lhs, pb.lhs, pa.rhs));
        let (ra, rb) = (fl_radial_residual(&a, f64::exp), fl_radial_residual(&b, f64::exp));
        prop_assert!(close(ra.lhs, rb.lhs, ra.rhs));
        let ta = fl_tangential_residual(&a, f64::sqrt).unwrap();
        let tb = fl_tangential_residual(&b, f64::sqrt).unwrap();
        prop_assert!(close(ta.lhs, tb.lhs, ta.rhs));
        let density = FnDensity { value: |s: f64, g: f64| s * g, d_s: |_, g| g, d_g: |s, _| s };
        let (ba, bb) = (fl_boundary_residual(&a, &density), fl_boundary_residual(&b, &density));
        prop_assert!(close(ba.lhs, bb.lhs, ba.rhs));
    }

    #[test]
    fn rows_satisfy_the_isoperimetric_inequality(seed in 0u64..1000, amp in 0.0f64..0.05, twist in -1.0f64..1.0) {
        let pair = AnnulusPair::new(1.0, 2.0, 1.0, 1.5).unwrap();
        let base = TestMapKind::twist(Curve::new(|s| 1.0 + 0.5 * (s - 1.0)), Curve::new(move |s| twist * s.ln()));
        let m = make_test_map(&TestMapSpec { kind: TestMapKind::perturbed(base, amp, seed), pair, n_s: 32, n_theta: 64 })
            .unwrap();
        for i in 0..m.n_s {
            let scale = m.row(i).iter().map(|h| h.norm_sqr()).fold(0.0, f64::max);
            prop_assert!(isoperimetric_margin(&m, i) >= -1e-9 * scale, "row {}", i);
        }
    }
}
