//! Bessel functions against an integral representation, and properties of
//! the kinetic equation of state.

use proptest::prelude::*;
use relkin::{bessel, eos, PhysicalConstants};

const K: PhysicalConstants = PhysicalConstants::UNIT;

/// `K_j(z) = ∫₀^∞ exp(-z cosh t) cosh(j t) dt` by the trapezoidal rule,
/// which converges geometrically for this analytic, rapidly decaying
/// integrand.
fn k_integral(j: u32, z: f64) -> f64 {
    let h = 0.01;
    let t_max = ((800.0 / z) + 1.0).acosh() + 1.0;
    let n = (t_max / h).ceil() as usize;
    let f = |t: f64| (-z * t.cosh()).exp() * (j as f64 * t).cosh();
    let mut s = 0.5 * f(0.0);
    for i in 1..=n {
        s += f(i as f64 * h);
    }
    s * h
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn k_j_matches_integral_representation(j in 0u32..6, z in log_uniform(0.01, 200.0)) {
        let v = bessel::k_j(j, z).unwrap();
        let oracle = k_integral(j, z);
        prop_assert!((v - oracle).abs() <= 1e-10 * oracle, "K_{}({}) = {} vs {}", j, z, v, oracle);
    }

    #[test]
    fn three_term_recurrence(j in 1u32..5, z in log_uniform(0.01, 200.0)) {
        let (a, b, c) = (bessel::k_j(j - 1, z).unwrap(), bessel::k_j(j, z).unwrap(), bessel::k_j(j + 1, z).unwrap());
        prop_assert!((c - a - 2.0 * j as f64 / z * b).abs() <= 1e-12 * c);
    }

    #[test]
    fn ratio_is_increasing_in_unit_interval(z in log_uniform(0.01, 500.0)) {
        let r = bessel::bessel_ratio(z).unwrap();
        let r2 = bessel::bessel_ratio(z * 1.01).unwrap();
        prop_assert!(r > 0.0 && r < 1.0);
        prop_assert!(r2 > r);
    }

    #[test]
    fn eos_round_trip(n in log_uniform(1e-2, 1e2), z in log_uniform(1e-2, 1e2)) {
        let t = eos::thermo_from_nz(n, z, &K).unwrap();
        let inv = eos::invert_eos(t.eta, t.p, &K, None).unwrap();
        prop_assert!((inv.n / n - 1.0).abs() < 1e-10);
        prop_assert!((inv.z / z - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pressure_falls_along_isentropes_and_sound_is_subluminal(z in log_uniform(0.1, 70.0)) {
        prop_assert!(eos::dp_dz_over_p(z).unwrap() < 0.0);
        let cs2 = eos::sound_speed_sq(z).unwrap();
        prop_assert!(cs2 > 0.0 && cs2 < 1.0 / 3.0);
    }

    #[test]
    fn sound_speed_matches_isentropic_difference(z in log_uniform(0.05, 50.0)) {
        // dp/dρ along η = const, with ρ(z), p(z) from n on the isentrope.
        let eta = eos::entropy_map(1.0, z, &K).unwrap();
        let at = |zz: f64| {
            let n = eos::n_on_isentrope(eta, zz, &K).unwrap();
            let t = eos::thermo_from_nz(n, zz, &K).unwrap();
            (t.p, t.rho)
        };
        let h = 1e-5 * z;
        let (p1, r1) = at(z - h);
        let (p2, r2) = at(z + h);
        let fd = (p2 - p1) / (r2 - r1);
        prop_assert!((fd / eos::sound_speed_sq(z).unwrap() - 1.0).abs() < 1e-7);
    }
}

#[test]
fn eos_with_dimensional_constants() {
    let k = PhysicalConstants::new(2.0, 3.0, 0.5, 1.5).unwrap();
    let t = eos::thermo_from_nz(0.7, 4.0, &k).unwrap();
    assert!((t.p - k.rest_energy() * 0.7 / 4.0).abs() < 1e-14 * t.p);
    let inv = eos::invert_eos(t.eta, t.p, &k, None).unwrap();
    assert!((inv.n / 0.7 - 1.0).abs() < 1e-10 && (inv.z / 4.0 - 1.0).abs() < 1e-10);
}
