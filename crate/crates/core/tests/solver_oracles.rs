use plap_core::model::sample_profile;
use plap_core::{
    comparison_run, run, BarenblattSolution, Geometry, Grid, InitialProfile, ProblemParams, RegularizedCoefficients,
    RunConfig, State, Stepper,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn barenblatt_state(h: f64, absorption: bool) -> State {
    let pp = ProblemParams::new(3.0, 2.0, 1, 1e-3).unwrap();
    let grid = Grid::new(Geometry::Line, h, 3.0).unwrap();
    let profile = InitialProfile::BarenblattAt { t0: 1.0, scale: 1.0 };
    let vals = sample_profile(&profile, 3.0, 1, &grid).unwrap();
    State::new(pp, grid, &vals, 1.0, absorption).unwrap()
}

#[test]
fn dt_matches_independent_scan_on_barenblatt() {
    let s = barenblatt_state(0.01, false);
    let c = RegularizedCoefficients::new(3.0, 2.0, 1e-3);
    let h = s.grid.h;
    let d_max = s
        .values
        .windows(2)
        .map(|w| c.effective_diffusivity(((w[1] - w[0]) / h).powi(2)))
        .fold(0.0, f64::max);
    let expected = 0.5 * h * h / (2.0 * d_max);
    let dt = Stepper::new(&s.params, &s.grid).stable_dt(&s, 0.5);
    assert!((dt / expected - 1.0).abs() < 1e-12, "{dt} vs {expected}");
}

#[test]
fn one_step_follows_barenblatt_time_derivative() {
    let b = BarenblattSolution::new(3.0, 1).unwrap();
    let mut s = barenblatt_state(0.005, false);
    let before = s.values.clone();
    let mut stepper = Stepper::new(&s.params, &s.grid);
    let dt = stepper.stable_dt(&s, 0.4);
    stepper.step(&mut s, dt).unwrap();
    let edge = b.support_radius(1.0).unwrap();
    let mut worst: f64 = 0.0;
    for (i, (after, prev)) in s.values.iter().zip(&before).enumerate() {
        let r = s.grid.center(i).abs();
        if r < 0.1 || r > 0.8 * edge {
            continue;
        }
        let rate = (after - prev) / dt;
        worst = worst.max((rate - b.time_derivative(1.0, r)).abs());
    }
    let scale = b.time_derivative(1.0, 0.0).abs();
    assert!(worst / scale < 1e-2, "relative rate error {}", worst / scale);
}

#[test]
fn monotone_radial_data_stay_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pp = ProblemParams::new(3.0, 1.5, 1, 1e-3).unwrap();
    let grid = Grid::new(Geometry::Radial(1), 1.0 / 32.0, 1.0).unwrap();
    for _ in 0..50 {
        let mut vals: Vec<f64> = (0..grid.n).map(|_| rng.gen_range(0.0..1.0)).collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        let mut s = State::new(pp, grid.clone(), &vals, 0.0, true).unwrap();
        let mut stepper = Stepper::new(&pp, &grid);
        let dt = stepper.stable_dt(&s, 0.4);
        stepper.step(&mut s, dt).unwrap();
        assert!(s.values.windows(2).all(|w| w[1] <= w[0]));
    }
}

fn bump_config(absorption: bool, t_end: f64) -> RunConfig {
    let pp = ProblemParams::new(3.0, 2.0, 1, 1e-3).unwrap();
    let mut cfg = RunConfig::new(pp, Geometry::Line, InitialProfile::bump(1.0, 1.0), t_end);
    cfg.h = Some(0.02);
    cfg.absorption = absorption;
    cfg
}

#[test]
fn pure_diffusion_conserves_mass() {
    let mut cfg = bump_config(false, 8.0);
    cfg.profile = InitialProfile::BarenblattAt { t0: 1.0, scale: 1.0 };
    let (state, series) = run(&cfg).unwrap();
    let m0 = series.records[0].l1_excess;
    assert!((state.excess_mass() - m0).abs() / m0 <= 1e-6);
    assert_eq!(state.absorbed_mass, 0.0);
}

#[test]
fn absorption_makes_l1_non_increasing() {
    let (_, series) = run(&bump_config(true, 8.0)).unwrap();
    let l1 = series.column(|o| o.l1_excess);
    assert!(l1.windows(2).all(|w| w[1] <= w[0]));
    assert!(l1.last().unwrap() < &l1[0]);
}

#[test]
fn identical_profiles_never_separate() {
    let cfg = bump_config(true, 2.0);
    let r = comparison_run(&cfg, &cfg).unwrap();
    assert_eq!(r.max_violation, 0.0);
}

#[test]
fn runs_are_bit_reproducible() {
    let cfg = bump_config(true, 2.0);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.0.values, b.0.values);
    assert_eq!(a.1, b.1);
}
