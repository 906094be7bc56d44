//! Structural invariants checked over random inputs.

use proptest::prelude::*;

use spreadlab_core::coefficients::{check_h2, compute_envelopes, h2_constant_reduction};
use spreadlab_core::periodic_orbits::logistic_periodic;
use spreadlab_core::semitrivial::{compute_semitrivial, SemitrivialOptions, Species};
use spreadlab_core::simulator::{
    invariant_bounds, make_front_data, FrontLevel, FrontObserver, FrontSpec, SchemeConfig, Simulator, StepMode,
};
use spreadlab_core::spectrum::{principal_spectrum_point, LinearProblem, SpectrumOptions};
use spreadlab_core::spreading::{empirical_front_speed, minimize_speed, DispersionOptions, FitOptions, SpeedKind};
use spreadlab_core::verify::{monotone_coexistence, random_ensemble, CoexistenceOptions};
use spreadlab_core::{
    Coef, CoefficientField, CoefficientSet, Dispersal, Grid, Kernel, KernelShape, PeriodicScalar, SpatialBump,
};

fn harmonic(period: f64, mean: f64, amp: f64, phase: f64) -> PeriodicScalar {
    PeriodicScalar::harmonic(period, mean, amp, phase).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fields_are_periodic_and_local(
        period in 0.3f64..3.0,
        mean in -1.0f64..1.0,
        amp in 0.0f64..1.0,
        phase in 0.0f64..6.3,
        bump_amp in -1.0f64..1.0,
        width in 0.5f64..8.0,
        t in 0.0f64..10.0,
        x in -30.0f64..30.0,
    ) {
        let base = harmonic(period, mean, amp, phase);
        let f = CoefficientField::with_bump(base.clone(), SpatialBump::smoothed(bump_amp, width).unwrap());
        prop_assert!((f.value(t + period, x) - f.value(t, x)).abs() < 1e-12);
        let far = f.support() + x.abs();
        prop_assert_eq!(f.value(t, far), base.value(t));
        prop_assert_eq!(f.value(t, -far), base.value(t));
    }

    #[test]
    fn envelopes_settle_under_refinement(
        means in prop::array::uniform6(1.0f64..2.0),
        amps in prop::array::uniform6(0.0f64..0.9),
        phase in 0.0f64..6.3,
    ) {
        let b: Vec<PeriodicScalar> =
            (0..6).map(|i| harmonic(1.0, means[i], amps[i], phase + i as f64)).collect();
        let set = CoefficientSet::from_baselines(b.try_into().unwrap()).unwrap();
        let coarse = compute_envelopes(&set, 500).unwrap();
        let fine = compute_envelopes(&set, 1000).unwrap();
        for c in Coef::ALL {
            let (l0, m0) = coarse.get(c);
            let (l1, m1) = fine.get(c);
            prop_assert!((l0 - l1).abs() < 1e-3 && (m0 - m1).abs() < 1e-3, "{:?}", c);
        }
    }

    #[test]
    fn tilt_zero_reproduces_the_operator(u in prop::collection::vec(0.0f64..5.0, 41), shape in 0usize..3) {
        let grid = Grid::new(-2.0, 2.0, 41).unwrap();
        prop_assert_eq!(Dispersal::Random.apply_tilted(&u, &grid, 0.0).unwrap(), Dispersal::Random.apply(&u, &grid).unwrap());
        let shape = [KernelShape::Uniform, KernelShape::Triangle, KernelShape::RaisedCosine][shape];
        let d = Dispersal::Nonlocal(Kernel::new(shape, 0.5, grid.h()).unwrap());
        prop_assert_eq!(d.apply_tilted(&u, &grid, 0.0).unwrap(), d.apply(&u, &grid).unwrap());
    }

    #[test]
    fn nonlocal_minimum_matches_brute_force(radius in 0.3f64..3.0, alpha in 0.05f64..2.0, shape in 0usize..3) {
        let shape = [KernelShape::Uniform, KernelShape::Triangle, KernelShape::RaisedCosine][shape];
        let d = Dispersal::Nonlocal(Kernel::new(shape, radius, 0.01).unwrap());
        let (_, c, warning) = minimize_speed(&d, alpha, &DispersionOptions::default()).unwrap();
        prop_assert!(!warning);
        let f = |mu: f64| (shape.exact_moment(mu, radius) - 1.0 + alpha) / mu;
        let brute = (0..=999_900).map(|k| f(1e-3 + k as f64 * 1e-5)).fold(f64::INFINITY, f64::min);
        prop_assert!(c <= brute + 1e-12 && brute - c < 1e-8, "{} vs {}", c, brute);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn sampled_determinacy_matches_constant_form(v in prop::array::uniform6(0.1f64..2.0)) {
        let reduced = h2_constant_reduction(v);
        prop_assume!(reduced.iter().all(|m| m.abs() > 1e-9));
        let set = CoefficientSet::constants(1.0, v).unwrap();
        let env = compute_envelopes(&set, 64).unwrap();
        let sampled = check_h2(&set, &env, 64).unwrap();
        prop_assert_eq!(sampled.holds, reduced.iter().all(|&m| m > 0.0));
        for (s, r) in sampled.margins.iter().zip(reduced) {
            prop_assert!((s - r).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn logistic_orbit_has_zero_mean_growth(
        period in 0.5f64..3.0,
        mean in 0.2f64..1.5,
        amp in 0.0f64..1.5,
        b_mean in 0.5f64..2.0,
        b_amp in 0.0f64..0.4,
    ) {
        let a0 = harmonic(period, mean, amp, 0.3);
        let b0 = harmonic(period, b_mean, b_amp, 1.1);
        let w = logistic_periodic(&a0, &b0).unwrap();
        prop_assert!(w.min() > 0.0);
        let n = 4096;
        let avg = (0..n)
            .map(|k| {
                let t = k as f64 * period / n as f64;
                a0.value(t) - b0.value(t) * w.value(t)
            })
            .sum::<f64>()
            / n as f64;
        prop_assert!(avg.abs() < 1e-6, "{}", avg);
    }

    #[test]
    fn box_is_invariant(seed in 0u64..1000, amp in 0.0f64..0.9) {
        let set = CoefficientSet::constants(1.0, [1.0, 1.0, 0.5, 0.4, 0.5, 1.0])
            .unwrap()
            .with_bump(Coef::A1, Some(SpatialBump::smoothed(amp, 4.0).unwrap()))
            .unwrap();
        let grid = Grid::new(-20.0, 20.0, 201).unwrap();
        let mut sim = Simulator::new(&set, &grid, &Dispersal::Random, &SchemeConfig::new(0.01, StepMode::Implicit)).unwrap();
        let (bu, bv) = invariant_bounds(&set);
        for mut state in random_ensemble(&set, &grid, 2, seed) {
            sim.run_periods(&mut state, 3, &mut []).unwrap();
            prop_assert!(state.u.iter().all(|&u| (0.0..=bu * (1.0 + 1e-12)).contains(&u)));
            prop_assert!(state.v.iter().all(|&v| (0.0..=bv * (1.0 + 1e-12)).contains(&v)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn nonnegative_bump_never_lowers_the_exponent(
        mean in -0.5f64..0.5,
        amp in 0.0f64..0.8,
        bump in 0.0f64..0.8,
        width in 0.5f64..6.0,
    ) {
        let grid = Grid::new(-20.0, 20.0, 201).unwrap();
        let base = harmonic(1.0, mean, amp, 0.0);
        let field = CoefficientField::with_bump(base, SpatialBump::smoothed(bump, width).unwrap());
        let p = LinearProblem::with_field(0.0, field, Dispersal::Random, grid, SchemeConfig::new(0.01, StepMode::Implicit)).unwrap();
        let r = principal_spectrum_point(&p, &SpectrumOptions::default()).unwrap();
        prop_assert!(r.lambda >= mean - 1e-5, "{} < {}", r.lambda, mean);
        prop_assert!(r.profile.iter().all(|&v| v > 0.0));
    }
}

#[test]
fn exponent_is_resolution_independent() {
    let field = CoefficientField::with_bump(harmonic(1.0, -0.2, 0.5, 0.0), SpatialBump::smoothed(0.5, 4.0).unwrap());
    let lambda = |n: usize, dt: f64| {
        let grid = Grid::new(-20.0, 20.0, n).unwrap();
        let p = LinearProblem::with_field(0.0, field.clone(), Dispersal::Random, grid, SchemeConfig::new(dt, StepMode::Implicit)).unwrap();
        principal_spectrum_point(&p, &SpectrumOptions::default()).unwrap().lambda
    };
    let (coarse, fine) = (lambda(401, 0.005), lambda(801, 0.0025));
    assert!((coarse - fine).abs() < 1e-4, "{coarse} vs {fine}");
}

#[test]
fn semitrivial_state_does_not_depend_on_the_seed() {
    let set = CoefficientSet::from_baselines([
        harmonic(1.0, 1.0, 0.5, 0.0),
        PeriodicScalar::constant(1.0, 1.0).unwrap(),
        PeriodicScalar::constant(1.0, 0.5).unwrap(),
        PeriodicScalar::constant(1.0, 0.4).unwrap(),
        PeriodicScalar::constant(1.0, 0.5).unwrap(),
        PeriodicScalar::constant(1.0, 1.0).unwrap(),
    ])
    .unwrap()
    .with_bump(Coef::A1, Some(SpatialBump::smoothed(0.4, 4.0).unwrap()))
    .unwrap();
    let grid = Grid::new(-25.0, 25.0, 251).unwrap();
    let scheme = SchemeConfig::new(0.01, StepMode::Implicit);
    let run = |scale: f64| {
        let o = SemitrivialOptions { tol: 1e-11, seed_scale: scale, ..SemitrivialOptions::default() };
        compute_semitrivial(Species::U, &set, &grid, &Dispersal::Random, &scheme, &o).unwrap()
    };
    let (a, b) = (run(1.0), run(5.0));
    let diff = a
        .samples()
        .iter()
        .zip(b.samples())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn coexistence_limits_are_periodic() {
    let set = CoefficientSet::from_baselines([
        harmonic(1.0, 1.0, 0.4, 0.0),
        PeriodicScalar::constant(1.0, 1.0).unwrap(),
        PeriodicScalar::constant(1.0, 0.5).unwrap(),
        harmonic(1.0, 1.0, 0.3, 1.0),
        PeriodicScalar::constant(1.0, 0.5).unwrap(),
        PeriodicScalar::constant(1.0, 1.0).unwrap(),
    ])
    .unwrap()
    .with_bump(Coef::A1, Some(SpatialBump::smoothed(0.3, 4.0).unwrap()))
    .unwrap();
    let grid = Grid::new(-20.0, 20.0, 201).unwrap();
    let scheme = SchemeConfig::new(0.01, StepMode::Implicit);
    let r = monotone_coexistence(&set, &grid, &Dispersal::Random, &scheme, &CoexistenceOptions::default()).unwrap();
    for s in [&r.upper, &r.lower] {
        assert!(s.u.residual < 1e-6 && s.v.residual < 1e-6, "{} {}", s.u.residual, s.v.residual);
        assert_eq!(s.worst_violation, 0.0);
    }
}

#[test]
fn front_slopes_agree_across_levels() {
    let set = CoefficientSet::constants(1.0, [1.0, 1.0, 0.5, 0.4, 0.5, 1.0]).unwrap();
    let grid = Grid::new(-40.0, 260.0, 3001).unwrap();
    let scheme = SchemeConfig::new(0.01, StepMode::Implicit);
    let v_star = compute_semitrivial(Species::V, &set, &grid, &Dispersal::Random, &scheme, &SemitrivialOptions::default()).unwrap();
    let margin = FrontObserver::default_margin(&grid, &Dispersal::Random);
    let front = FrontSpec { x0: -20.0, ramp: 4.0, u_level: 1.0, v_level: 0.4 };
    let (u, v) = make_front_data(&grid, &front, v_star.at_step(0), margin).unwrap();
    let mut state = spreadlab_core::SystemState::new(0.0, u, v).unwrap();
    let mut sim = Simulator::new(&set, &grid, &Dispersal::Random, &scheme).unwrap();
    let mut obs: Vec<FrontObserver> = [0.1, 0.5, 0.9]
        .iter()
        .map(|&th| FrontObserver::new(FrontLevel::Both { theta_u: th, theta_v: 0.4 * th }, margin))
        .collect();
    {
        let mut refs: Vec<&mut dyn spreadlab_core::simulator::Observer> =
            obs.iter_mut().map(|o| o as &mut dyn spreadlab_core::simulator::Observer).collect();
        sim.run_transformed(&mut state, 110, &v_star, &mut refs).unwrap();
    }
    let fit = FitOptions { min_position: Some(20.0), ..FitOptions::default() };
    let slopes: Vec<f64> = obs
        .iter()
        .map(|o| empirical_front_speed(&o.records, 1.0, SpeedKind::EmpiricalLower, &fit).unwrap().value)
        .collect();
    for s in &slopes {
        assert!((s - slopes[1]).abs() / slopes[1] < 0.02, "{slopes:?}");
    }
    for o in &obs {
        let tail = &o.records[20..];
        assert!(tail.windows(2).all(|w| w[1].1 >= w[0].1), "front moved backwards");
    }
}
