//! First-order Hilbert expansion: transport term, solvability and the
//! solution of the linearized equation.

use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relkin::collision::{frequency_on_grid, CollisionKernel, NULL_DIM};
use relkin::euler::*;
use relkin::grid::{GridSpec, MomentumGrid};
use relkin::hilbert::*;
use relkin::maxwellian::{FourVelocity, MaxwellianParams};
use relkin::{Error, PhysicalConstants};

const K: PhysicalConstants = PhysicalConstants::UNIT;

fn background() -> MaxwellianParams {
    MaxwellianParams::new(1.0, 2.0, FourVelocity::from_spatial([0.1, -0.05, 0.0], 1.0), K).unwrap()
}

struct Fixture {
    grid: MomentumGrid,
    cache: Mutex<OperatorCache>,
    index: usize,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cfg = HilbertConfig::default();
        let m = background();
        let grid = MomentumGrid::new(cfg.grid, m.cutoff_radius_for(cfg.cutoff_decades), &K).unwrap();
        let mut cache = OperatorCache::new(cfg.cache_tol);
        let index = cache.get(&m, &grid, &cfg).unwrap();
        Fixture {
            grid,
            cache: Mutex::new(cache),
            index,
        }
    })
}

fn wave_rates() -> (EulerState, Vec<ParameterRates>) {
    let grid = PeriodicBox::line(32, 1.0);
    let mut s = initial_state(grid, 1.0, 2.0, InitialData::SimpleWave { amplitude: 0.05, mode: 1 }, &K).unwrap();
    for i in 0..grid.len() {
        s.fields.u[1][i] = 0.05 * (std::f64::consts::TAU * grid.coords(i)[0]).cos();
    }
    let th = s.thermo(&K).unwrap();
    let rates = parameter_rates(&s, &th, &EulerConfig::default()).unwrap();
    (s, rates)
}

#[test]
fn manufactured_solution_is_recovered() {
    let fx = fixture();
    let cache = fx.cache.lock().unwrap();
    let op = cache.operator(fx.index);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut c: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    c[..NULL_DIM].fill(0.0);
    let h = op.synthesize(&c);
    let lh = op.apply(&h);
    let transport: Vec<f64> = lh.iter().zip(&op.m).map(|(v, m)| -m.sqrt() * v).collect();
    let term = solve_f1(&transport, op, None, 1e-8, 0.9, 0).unwrap();
    let err = term.coefficients.iter().zip(&c).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(err < 1e-9, "{err}");
    assert!(term.solve_residual < 1e-12);
}

#[test]
fn density_gradient_transport() {
    // A pure ln n gradient at rest: T = (c P¹/P⁰) ∂₁M.
    let m = MaxwellianParams::rest(1.3, 1.5, K).unwrap();
    let mut rates = ParameterRates::frozen(m);
    let a = 0.7;
    rates.dx[0][0] = a;
    let h = 1e-5;
    let ratio = relkin::bessel::bessel_ratio(m.z).unwrap();
    for p in [[0.3, 0.1, -0.2], [-1.5, 0.4, 0.9], [2.0, 0.0, 0.0]] {
        let plus = MaxwellianParams::rest(m.n * (a * h).exp(), m.z, K).unwrap().eval(&p);
        let minus = MaxwellianParams::rest(m.n * (-a * h).exp(), m.z, K).unwrap().eval(&p);
        let oracle = p[0] / K.p0(&p) * (plus - minus) / (2.0 * h);
        let t = transport_at(&rates, ratio, &p);
        assert!((t / oracle - 1.0).abs() < 1e-8, "{t} vs {oracle}");
    }
}

#[test]
fn transport_times_energy_is_a_quadratic_polynomial() {
    let (_, rates) = wave_rates();
    let r = rates[7];
    let ratio = relkin::bessel::bessel_ratio(r.params.z).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mono = |p: &[f64; 3]| -> Vec<f64> {
        let v = [p[0], p[1], p[2], K.p0(p)];
        let mut out = vec![1.0];
        out.extend_from_slice(&v);
        for i in 0..4 {
            for j in i..4 {
                if !(i == 3 && j == 3) {
                    out.push(v[i] * v[j]);
                }
            }
        }
        out
    };
    let pts: Vec<[f64; 3]> = (0..60)
        .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    let a = DMatrix::from_fn(pts.len(), 14, |i, j| mono(&pts[i])[j]);
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| K.p0(p) * transport_at(&r, ratio, p) / r.params.eval(p)));
    let fit = a.clone().svd(true, true).solve(&y, 1e-14).unwrap();
    let resid = (&a * fit - &y).amax();
    assert!(resid < 1e-10 * y.amax(), "{resid}");
}

#[test]
fn euler_rates_are_solvable_and_arbitrary_rates_are_not() {
    let fx = fixture();
    let (_, rates) = wave_rates();
    let cfg = HilbertConfig::default();
    let r = rates[3];
    let grid = MomentumGrid::new(cfg.grid, r.params.cutoff_radius_for(cfg.cutoff_decades), &K).unwrap();
    let t = transport_term(&r, &grid).unwrap();
    assert!(solvability_check(&t, &grid, &K).relative() < cfg.solvability_tol);

    // Negative control: the same rates with the pressure held fixed in time.
    let mut bad = r;
    bad.dt[0] = 0.0;
    bad.dt[1] = 0.0;
    bad.params = background();
    let t = transport_term(&bad, &fx.grid).unwrap();
    let cache = fx.cache.lock().unwrap();
    let res = solve_f1(&t, cache.operator(fx.index), None, cfg.solvability_tol, cfg.decay_q, 4);
    assert!(matches!(res, Err(Error::NotOrthogonal { cell: 4, .. })), "{res:?}");
}

#[test]
fn f0_reproduces_the_fluid_state() {
    let (s, _) = wave_rates();
    let th = s.thermo(&K).unwrap();
    for cell in [0, 9, 20] {
        let m = f0_from_euler(&s, &th, cell, &K).unwrap();
        let t = m.thermo().unwrap();
        assert!((t.p / s.fields.p[cell] - 1.0).abs() < 1e-12);
        assert!((t.eta - s.fields.eta[cell]).abs() < 1e-10 * s.fields.eta[cell].abs().max(1.0));
        assert!((m.u.0[1] - s.fields.u[0][cell]).abs() < 1e-15);
    }
}

fn solved_term(phi1: Option<[f64; NULL_DIM]>) -> (Vec<f64>, Vec<f64>) {
    let fx = fixture();
    let cache = fx.cache.lock().unwrap();
    let op = cache.operator(fx.index);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut c: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    c[..NULL_DIM].fill(0.0);
    let lh = op.apply(&op.synthesize(&c));
    let t: Vec<f64> = lh.iter().zip(&op.m).map(|(v, m)| -m.sqrt() * v).collect();
    let term = solve_f1(&t, op, phi1, 1e-8, 0.9, 0).unwrap();
    (term.values, op.m.clone())
}

#[test]
fn f1_is_orthogonal_to_the_invariants() {
    let fx = fixture();
    let (f1, _) = solved_term(None);
    let s = solvability_check(&f1, &fx.grid, &K);
    assert!(s.relative() < 1e-12, "{:?}", s);
}

#[test]
fn prescribed_invariant_part_is_added() {
    let fx = fixture();
    let a = [0.3, -0.1, 0.2, 0.05, -0.4];
    let (plain, m) = solved_term(None);
    let (with, _) = solved_term(Some(a));
    for i in 0..fx.grid.len() {
        let p = &fx.grid.nodes[i];
        let expect = m[i] * (a[0] + a[1] * p[0] + a[2] * p[1] + a[3] * p[2] + a[4] * fx.grid.p0[i]);
        assert!((with[i] - plain[i] - expect).abs() < 1e-12 * (1.0 + plain[i].abs()), "{i}");
    }
}

#[test]
fn zero_transport_gives_zero_correction() {
    let fx = fixture();
    let cache = fx.cache.lock().unwrap();
    let op = cache.operator(fx.index);
    let term = solve_f1(&vec![0.0; fx.grid.len()], op, None, 1e-8, 0.9, 0).unwrap();
    assert!(term.values.iter().all(|v| *v == 0.0));
    assert_eq!(term.certificate.c, 0.0);
}

#[test]
fn operator_cache_reuses_matching_backgrounds() {
    let fx = fixture();
    let cfg = HilbertConfig::default();
    let mut cache = fx.cache.lock().unwrap();
    let before = cache.assemblies;
    let again = cache.get(&background(), &fx.grid, &cfg).unwrap();
    assert_eq!(again, fx.index);
    assert_eq!(cache.assemblies, before);
}

#[test]
fn weighted_sup_norm_grows_with_ell() {
    let fx = fixture();
    let (f1, _) = solved_term(None);
    let nu = vec![1.0; fx.grid.len()];
    let mut last = 0.0;
    for ell in [0.0, 1.0, 2.0, 4.0] {
        let n = weighted_norms(&f1, &fx.grid, ell, &nu, &K).unwrap();
        assert!(n.sup >= last);
        last = n.sup;
    }
    assert!(weighted_norms(&f1, &fx.grid, -1.0, &nu, &K).is_err());
}

#[test]
fn nu_norm_of_root_maxwellian() {
    // ‖√M‖²_ν = ∫ ν M dP̄ for a rest Maxwellian, against a radial Simpson rule.
    let m = MaxwellianParams::rest(1.0, 1.0, K).unwrap();
    let kern = CollisionKernel::hard();
    let theta = K.theta_from_z(m.z);
    let cutoff = m.cutoff_radius_for(14.0);
    let grid = MomentumGrid::new(GridSpec::new(48, 4, 4), cutoff, &K).unwrap();
    let nu = frequency_on_grid(&grid, &kern, theta, &K);
    let root: Vec<f64> = grid.sample(&m).iter().map(|v| v.sqrt()).collect();
    let norms = weighted_norms(&root, &grid, 0.0, &nu, &K).unwrap();

    let n = 400;
    let h = cutoff / n as f64;
    let g = |r: f64| r * r * relkin::collision::collision_frequency(&[0.0, 0.0, r], &kern, theta, &K) * m.eval(&[0.0, 0.0, r]);
    let mut acc = g(0.0) + g(cutoff);
    for i in 1..n {
        acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let oracle = 4.0 * std::f64::consts::PI * acc * h / 3.0;
    assert!((norms.nu * norms.nu / oracle - 1.0).abs() < 1e-6, "{} vs {oracle}", norms.nu * norms.nu);
    assert!(weight(&[0.0; 3], 3.0, &K) == 1.0);
}
