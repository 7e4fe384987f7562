//! Properties of the Euler solver and its energy currents.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relkin::eos;
use relkin::euler::*;
use relkin::PhysicalConstants;

const K: PhysicalConstants = PhysicalConstants::UNIT;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constant_states_are_stationary(
        ln_n in (-1.0f64..1.0),
        ln_z in (-1.0f64..2.0),
        u in prop::array::uniform3(-0.8f64..0.8),
    ) {
        let mut w = background_state(ln_n.exp(), ln_z.exp(), &K).unwrap();
        w[2..].copy_from_slice(&u);
        let s = EulerState::constant(PeriodicBox::line(16, 1.0), w).unwrap();
        let mut sol = Solver::new(s.clone(), EulerConfig::default()).unwrap();
        for _ in 0..10 {
            let dt = sol.default_dt();
            sol.step(dt).unwrap();
        }
        prop_assert_eq!(&sol.state.fields, &s.fields);
    }

    #[test]
    fn energy_density_is_positive(
        ln_z in (-1.0f64..2.5),
        u in prop::array::uniform3(-3.0f64..3.0),
        var in prop::array::uniform5(-1.0f64..1.0),
    ) {
        let z = ln_z.exp();
        let t = eos::thermo_from_nz(1.0, z, &K).unwrap();
        let s2 = eos::sound_speed_sq(z).unwrap();
        let h = t.rho + t.p;
        let j = energy_current_cell(u, h, h * s2, var, 1.0);
        let norm2: f64 = var.iter().map(|v| v * v).sum();
        prop_assert!(j[0] > 0.0 || norm2 == 0.0);
        // Sound speed below light speed: the current is future timelike.
        let spatial = (j[1] * j[1] + j[2] * j[2] + j[3] * j[3]).sqrt();
        prop_assert!(j[0] >= spatial * (1.0 - 1e-12), "{} < {}", j[0], spatial);
    }

    #[test]
    fn time_component_of_momentum_equation_is_redundant(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = PeriodicBox::line(16, 1.0);
        let base = initial_state(grid, 1.0, 1.5, InitialData::SimpleWave { amplitude: 0.1, mode: 2 }, &K).unwrap();
        let mut s = base.clone();
        for i in 0..grid.len() {
            for d in 0..3 {
                s.fields.u[d][i] += rng.random_range(-0.5..0.5);
            }
        }
        let th = s.thermo(&K).unwrap();
        let mut dt = Fields::zeros(grid.len());
        for i in 0..grid.len() {
            dt.p[i] = rng.random_range(-1.0..1.0);
            for d in 0..3 {
                dt.u[d][i] = rng.random_range(-1.0..1.0);
            }
        }
        let r = momentum_residuals(&s, &th, &dt, &EulerConfig::default());
        prop_assert!(redundancy_defect(&r, &s, &th) < 1e-13);
    }
}

#[test]
fn solver_time_derivative_satisfies_momentum_equations() {
    let grid = PeriodicBox::line(32, 1.0);
    let mut s = initial_state(grid, 1.0, 1.0, InitialData::SimpleWave { amplitude: 0.2, mode: 1 }, &K).unwrap();
    for i in 0..grid.len() {
        s.fields.u[1][i] = 0.3;
        s.fields.u[2][i] = -0.1 * (std::f64::consts::TAU * grid.coords(i)[0]).cos();
    }
    let cfg = EulerConfig::default();
    let th = s.thermo(&K).unwrap();
    let rhs = euler_rhs(&s, &th, &cfg);
    let r = momentum_residuals(&s, &th, &rhs, &cfg);
    let worst = r.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn small_waves_travel_at_the_sound_speed() {
    let z = 2.0;
    let grid = PeriodicBox::line(128, 1.0);
    let s = initial_state(grid, 1.0, z, InitialData::SimpleWave { amplitude: 1e-6, mode: 1 }, &K).unwrap();
    let mut sol = Solver::new(s.clone(), EulerConfig::default()).unwrap();
    sol.advance_to(0.2).unwrap();
    let measured = measured_phase_speed(&s, &sol.state, 1, sol.time);
    let expect = eos::sound_speed_sq(z).unwrap().sqrt();
    assert!((measured / expect - 1.0).abs() < 1e-5, "{measured} vs {expect}");
}

#[test]
fn sound_speed_scales_with_c() {
    let k = PhysicalConstants::new(1.0, 3.0, 1.0, 1.0).unwrap();
    let z = 1.0;
    let grid = PeriodicBox::line(64, 1.0);
    let s = initial_state(grid, 1.0, z, InitialData::SimpleWave { amplitude: 1e-6, mode: 1 }, &k).unwrap();
    let cfg = EulerConfig { constants: k, ..EulerConfig::default() };
    let mut sol = Solver::new(s.clone(), cfg).unwrap();
    sol.advance_to(0.05).unwrap();
    let measured = measured_phase_speed(&s, &sol.state, 1, sol.time);
    let expect = 3.0 * eos::sound_speed_sq(z).unwrap().sqrt();
    assert!((measured / expect - 1.0).abs() < 1e-4, "{measured} vs {expect}");
}

#[test]
fn energy_vanishes_only_at_the_reference() {
    let grid = PeriodicBox::line(32, 1.0);
    let s = initial_state(grid, 1.0, 1.0, InitialData::Constant, &K).unwrap();
    let th = s.thermo(&K).unwrap();
    let w = background_state(1.0, 1.0, &K).unwrap();
    assert_eq!(energy_n(&s, &th, &w, FdOrder::Sixth, 2, &K).unwrap(), 0.0);
    let wave = initial_state(grid, 1.0, 1.0, InitialData::SimpleWave { amplitude: 0.01, mode: 1 }, &K).unwrap();
    let th = wave.thermo(&K).unwrap();
    let e0 = energy_n(&wave, &th, &w, FdOrder::Sixth, 0, &K).unwrap();
    let e2 = energy_n(&wave, &th, &w, FdOrder::Sixth, 2, &K).unwrap();
    assert!(e0 > 0.0 && e2 > e0);
}
