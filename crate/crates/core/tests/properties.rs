use plap_core::exponents::{alpha_p, beta_pq, q_star};
use plap_core::{compute_exponents, BarenblattSolution, Geometry, Grid, ProblemParams, RegularizedCoefficients, State, Stepper};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn exponent_bounds(p in 2.05f64..6.0, q_frac in 0.01f64..3.0, n in 1u32..6) {
        let q = 1.0 + q_frac;
        let e = compute_exponents(p, q, n).unwrap();
        prop_assert!(e.alpha_p > 0.0 && e.alpha_p < 1.0);
        prop_assert!(e.beta_pq >= e.alpha_p && e.beta_pq >= (q - 1.0) / q && e.beta_pq < 1.0);
        prop_assert!(e.q_star > p - 1.0 && e.q_star < p);
        if let (Some(a), Some(b)) = (e.a_support, e.b_l1) {
            let nf = f64::from(n);
            let lhs = a + q * e.xi * (p - 2.0) * b / p;
            prop_assert!((lhs - (1.0 - nf * e.xi * (p - 2.0)) / p).abs() <= 1e-12);
            prop_assert!((1.0 - a / e.xi - (q - 1.0) * b).abs() <= 1e-12);
        }
    }

    #[test]
    fn alpha_increases_with_p(p in 2.1f64..5.9, dp in 0.01f64..0.1, n in 1u32..6) {
        prop_assert!(alpha_p(p + dp, n) > alpha_p(p, n));
        prop_assert!(beta_pq(p, 1.5, n) >= alpha_p(p, n));
        prop_assert!(q_star(p, n) < p);
    }

    #[test]
    fn coefficients_monotone(p in 2.1f64..5.0, q in 1.05f64..4.0, eps in 1e-6f64..0.5, s in 0.0f64..10.0, ds in 1e-6f64..1.0) {
        let c = RegularizedCoefficients::new(p, q, eps);
        prop_assert!(c.a_eps(s) > 0.0);
        prop_assert!(c.a_eps(s + ds) >= c.a_eps(s));
        prop_assert!(c.b_eps(s + ds) > c.b_eps(s));
        prop_assert!(c.b_eps(0.0) == 0.0);
        let g = s.sqrt();
        prop_assert!(c.flux(g + ds) > c.flux(g));
        prop_assert!(c.absorption_slope(g + ds) >= c.absorption_slope(g));
    }
}

fn random_state(rng: &mut ChaCha8Rng, q: f64, geometry: Geometry, absorption: bool) -> State {
    let pp = ProblemParams::new(3.0, q, 1, 1e-3).unwrap();
    let grid = Grid::new(geometry, 0.05, 4.0).unwrap();
    let vals: Vec<f64> = (0..grid.n)
        .map(|i| if grid.radius(i) < 2.0 { rng.gen_range(0.0..1.0) } else { 0.0 })
        .collect();
    State::new(pp, grid, &vals, 0.0, absorption).unwrap()
}

#[test]
fn steps_keep_floor_maximum_and_mass_balance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..12 {
        let q = [1.5, 2.0, 3.0][trial % 3];
        let geometry = if trial % 2 == 0 { Geometry::Line } else { Geometry::Radial(1) };
        let mut s = random_state(&mut rng, q, geometry, true);
        let m0 = s.excess_mass();
        let max0 = s.max_value();
        let mut stepper = Stepper::new(&s.params, &s.grid);
        for _ in 0..200 {
            let dt = stepper.stable_dt(&s, 0.4);
            stepper.step(&mut s, dt).unwrap();
            assert!(s.min_value() >= s.floor * (1.0 - 1e-14), "trial {trial}");
            assert!(s.max_value() <= max0 * (1.0 + 1e-14), "trial {trial}");
        }
        let residual = (s.excess_mass() + s.absorbed_mass + s.boundary_out - m0).abs() / m0;
        assert!(residual <= 1e-12, "trial {trial}: residual {residual:e}");
        assert!(s.absorbed_mass > 0.0);
    }
}

#[test]
fn ordered_data_stay_ordered() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..6 {
        let mut lo = random_state(&mut rng, 2.0, Geometry::Line, true);
        let bump: Vec<f64> = lo.values.iter().map(|v| v - lo.floor).collect();
        let raised: Vec<f64> = bump.iter().map(|v| v + rng.gen_range(0.0..0.3) * v).collect();
        let mut hi = State::new(lo.params, lo.grid.clone(), &raised, 0.0, trial % 2 == 0).unwrap();
        let mut stepper = Stepper::new(&lo.params, &lo.grid);
        for _ in 0..200 {
            let dt = stepper.stable_dt(&lo, 0.4).min(stepper.stable_dt(&hi, 0.4));
            stepper.step(&mut lo, dt).unwrap();
            stepper.step(&mut hi, dt).unwrap();
            let worst = lo.values.iter().zip(&hi.values).map(|(a, b)| a - b).fold(0.0, f64::max);
            assert!(worst <= 1e-12, "trial {trial}: violation {worst:e}");
        }
    }
}

#[test]
fn barenblatt_mass_is_constant_and_support_grows() {
    for n in 1..=3 {
        let b = BarenblattSolution::new(3.0, n).unwrap();
        let mass = |t: f64| {
            let r_max = b.support_radius(t).unwrap();
            let k = 20_000;
            let dr = r_max / k as f64;
            (0..k)
                .map(|i| {
                    let r = (i as f64 + 0.5) * dr;
                    b.value(t, r).unwrap() * r.powi(n as i32 - 1) * dr
                })
                .sum::<f64>()
        };
        let m1 = mass(1.0);
        for t in [2.0, 5.0, 40.0] {
            assert!((mass(t) / m1 - 1.0).abs() < 1e-6, "N = {n}, t = {t}");
            assert!(b.support_radius(t).unwrap() > b.support_radius(1.0).unwrap());
        }
        assert!(b.validation_residual() <= 1e-6);
    }
}
