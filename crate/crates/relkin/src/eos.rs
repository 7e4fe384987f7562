//! The kinetic equation of state.
//!
//! State is parametrized by the proper number density `n` and the inverse
//! temperature `z = m0 c^2 / (k_B θ)`. With `R = K_1/K_2` and `D = 1 - R`:
//!
//! ```text
//! p = m0 c^2 n / z
//! ρ = p (z R + 3)
//! η = k_B ln{ 4π e^4 m0^3 c^3 h^-3 n^-1 K_2(z)/z · exp(z R) }
//! ```
//!
//! so `p e^{η/k_B}` depends on `z` alone. Large-`z` expressions are written in
//! terms of `D`, which [`bessel::ratio_and_complement`] returns without
//! cancellation.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::bessel::{self, ratio_and_complement};
use crate::{par, Error, PhysicalConstants, Result};

/// Lowest `z` the inversion will return.
pub const Z_FLOOR: f64 = 1e-3;
const Z_CEIL: f64 = 1e8;

/// A consistent set of fluid variables at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoPoint {
    pub n: f64,
    pub z: f64,
    pub theta: f64,
    pub eta: f64,
    pub p: f64,
    pub rho: f64,
}

impl ThermoPoint {
    /// `ρ + p`.
    pub fn enthalpy_density(&self) -> f64 {
        self.rho + self.p
    }
}

fn positive(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what, value: v })
    }
}

/// `ln(4π e^4 m0^3 c^3 h^-3)`.
fn entropy_constant(k: &PhysicalConstants) -> f64 {
    (4.0 * PI).ln() + 4.0 + 3.0 * k.mc().ln() - 3.0 * k.h.ln()
}

/// `ln(e^z K_2(z)) - ln z - z D(z)`, the `n`-free part of `η/k_B`.
fn entropy_z_part(z: f64) -> Result<f64> {
    let (_, d) = ratio_and_complement(z)?;
    let k2s = bessel::k_j_scaled(2, z)?;
    Ok(k2s.ln() - z.ln() - z * d)
}

/// `𝔥(n, z)`.
pub fn entropy_map(n: f64, z: f64, k: &PhysicalConstants) -> Result<f64> {
    positive("n", n)?;
    positive("z", z)?;
    Ok(k.k_b * (entropy_constant(k) - n.ln() + entropy_z_part(z)?))
}

/// `𝔓(n, z) = m0 c^2 n / z`.
pub fn pressure_map(n: f64, z: f64, k: &PhysicalConstants) -> Result<f64> {
    positive("n", n)?;
    positive("z", z)?;
    Ok(k.rest_energy() * n / z)
}

pub fn thermo_from_nz(n: f64, z: f64, k: &PhysicalConstants) -> Result<ThermoPoint> {
    positive("n", n)?;
    positive("z", z)?;
    let (r, _) = ratio_and_complement(z)?;
    let p = k.rest_energy() * n / z;
    Ok(ThermoPoint {
        n,
        z,
        theta: k.theta_from_z(z),
        eta: entropy_map(n, z, k)?,
        p,
        rho: p * (z * r + 3.0),
    })
}

/// `ln(p e^{η/k_B})` as a function of `z`.
pub fn log_p_exp_eta(z: f64, k: &PhysicalConstants) -> Result<f64> {
    positive("z", z)?;
    Ok(entropy_constant(k) + k.rest_energy().ln() + entropy_z_part(z)? - z.ln())
}

/// Number density on the isentrope `η` at inverse temperature `z`; explicit
/// because `n` enters `𝔥` only through `ln n`.
pub fn n_on_isentrope(eta: f64, z: f64, k: &PhysicalConstants) -> Result<f64> {
    positive("z", z)?;
    let ln_n = entropy_constant(k) - eta / k.k_b + entropy_z_part(z)?;
    let n = ln_n.exp();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Range {
            what: "n on isentrope",
            value: z,
        });
    }
    Ok(n)
}

/// `(∂p/∂z)|_η / p = 3R + zR² - z - 4/z`.
pub fn dp_dz_over_p(z: f64) -> Result<f64> {
    positive("z", z)?;
    let (_, d) = ratio_and_complement(z)?;
    Ok(3.0 - 3.0 * d - z * d * (2.0 - d) - 4.0 / z)
}

/// `(∂ρ/∂p)|_η = 3 + zR + (4R + zR² - z) / ((∂p/∂z)|_η / p)`.
pub fn drho_dp(z: f64) -> Result<f64> {
    positive("z", z)?;
    let (r, d) = ratio_and_complement(z)?;
    let den = 3.0 - 3.0 * d - z * d * (2.0 - d) - 4.0 / z;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Singular {
            what: "(∂p/∂z)|η in ∂ρ/∂p",
            z,
        });
    }
    let num = 4.0 - 4.0 * d - z * d * (2.0 - d);
    Ok(3.0 + z * r + num / den)
}

/// `c_s^2 / c^2 = (∂p/∂ρ)|_η`.
pub fn sound_speed_sq(z: f64) -> Result<f64> {
    Ok(1.0 / drho_dp(z)?)
}

/// Result of Newton inversion of `(η, p) -> (n, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub n: f64,
    pub z: f64,
    /// `|ln(p e^{η/k_B}) - Φ(z)|` at the returned `z`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `𝔥(n, z) = η`, `𝔓(n, z) = p` for `(n, z)`.
///
/// Newton runs in `u = ln z` on the scalar equation `Φ(z) = ln p + η/k_B`,
/// where `Φ = ln(p e^{η/k_B})` and `dΦ/du = z (∂p/∂z)|_η / p`. Without an
/// initial guess the root is first bracketed among `z ∈ {1e-3, 1, 1e3}` (and
/// upward decades if needed) and narrowed by bisection.
pub fn invert_eos(eta: f64, p: f64, k: &PhysicalConstants, z_init: Option<f64>) -> Result<Inversion> {
    positive("p", p)?;
    if !eta.is_finite() {
        return Err(Error::Domain { what: "eta", value: eta });
    }
    if let Some(z0) = z_init {
        positive("z_init", z0)?;
    }
    let target = p.ln() + eta / k.k_b;
    let g = |u: f64| -> Result<f64> { Ok(log_p_exp_eta(u.exp(), k)? - target) };

    let (mut lo, mut hi, mut u) = match z_init {
        Some(z0) => (Z_FLOOR.ln(), Z_CEIL.ln(), z0.ln().clamp(Z_FLOOR.ln(), Z_CEIL.ln())),
        None => {
            let (lo, hi) = bracket(&g)?;
            (lo, hi, 0.5 * (lo + hi))
        }
    };

    const MAX_ITER: usize = 100;
    for it in 1..=MAX_ITER {
        let z = u.exp();
        let gu = g(u)?;
        let slope = z * dp_dz_over_p(z)?;
        if !(slope < -1e-12) {
            return Err(Error::MonotonicityViolation { z, slope });
        }
        // Φ is decreasing, so g > 0 means the root lies at larger z.
        if gu > 0.0 {
            lo = lo.max(u);
        } else {
            hi = hi.min(u);
        }
        let mut step = -gu / slope;
        step = step.clamp(-2.0, 2.0);
        let mut next = u + step;
        if next <= lo || next >= hi {
            if u <= Z_FLOOR.ln() && gu < 0.0 {
                return Err(Error::Domain {
                    what: "z below the inversion floor for (eta, p)",
                    value: Z_FLOOR,
                });
            }
            next = 0.5 * (lo.max(Z_FLOOR.ln()) + hi.min(Z_CEIL.ln()));
        }
        let du = next - u;
        u = next;
        if du.abs() < 1e-13 {
            let z = u.exp();
            let residual = g(u)?.abs();
            return Ok(Inversion {
                n: p * z / k.rest_energy(),
                z,
                residual,
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "EOS inversion",
        iterations: MAX_ITER,
        last: u.exp(),
        residual: g(u)?.abs(),
    })
}

fn bracket(g: &impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let floor = Z_FLOOR.ln();
    let g_floor = g(floor)?;
    if g_floor < 0.0 {
        return Err(Error::Domain {
            what: "z below the inversion floor for (eta, p)",
            value: Z_FLOOR,
        });
    }
    let mut prev = (floor, g_floor);
    let mut probes: Vec<f64> = alloc::vec![0.0, 1e3f64.ln()];
    let mut z = 1e3;
    while z < Z_CEIL {
        z *= 10.0;
        probes.push(z.ln());
    }
    for u in probes {
        let gu = g(u)?;
        if gu <= 0.0 {
            let (mut a, mut b) = (prev.0, u);
            while b - a > 0.25 {
                let m = 0.5 * (a + b);
                if g(m)? > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok((a, b));
        }
        prev = (u, gu);
    }
    Err(Error::Domain {
        what: "z above the inversion ceiling for (eta, p)",
        value: Z_CEIL,
    })
}

/// One grid point of a conjecture scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjectureSample {
    pub z: f64,
    pub dp_dz_over_p: f64,
    pub drho_dp: f64,
    pub sound_speed_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjectureReport {
    pub samples: Vec<ConjectureSample>,
    /// Points where `(∂p/∂z)|_η >= 0`.
    pub pressure_violations: Vec<f64>,
    /// Points where `c_s^2/c^2` leaves `(0, 1/3)`.
    pub sound_speed_violations: Vec<f64>,
    /// Points with `z >= 70` where `|∂ρ/∂p - 3z/5| > 41`.
    pub large_z_violations: Vec<f64>,
    /// Points where evaluation failed (singular or non-finite).
    pub evaluation_failures: Vec<f64>,
}

impl ConjectureReport {
    pub fn violation_count(&self) -> usize {
        self.pressure_violations.len()
            + self.sound_speed_violations.len()
            + self.large_z_violations.len()
            + self.evaluation_failures.len()
    }

    /// CSV with header `z,dp_dz_over_p,drho_dp,sound_speed_sq` and 17
    /// significant digits per value.
    pub fn write_csv<W: fmt::Write>(&self, w: &mut W) -> fmt::Result {
        writeln!(w, "z,dp_dz_over_p,drho_dp,sound_speed_sq")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                s.z, s.dp_dz_over_p, s.drho_dp, s.sound_speed_sq
            )?;
        }
        Ok(())
    }
}

/// Log-spaced grid `z_min .. z_max` with `samples` points, both ends included.
pub fn log_grid(z_min: f64, z_max: f64, samples: usize) -> Vec<f64> {
    let (a, b) = (z_min.ln(), z_max.ln());
    (0..samples)
        .map(|i| {
            if i == 0 {
                z_min
            } else if i + 1 == samples {
                z_max
            } else {
                (a + (b - a) * i as f64 / (samples - 1) as f64).exp()
            }
        })
        .collect()
}

/// Sign scan of `(∂p/∂z)|_η` and range scan of the sound speed on a log grid.
pub fn scan_conjectures(z_min: f64, z_max: f64, samples: usize) -> Result<ConjectureReport> {
    positive("z_min", z_min)?;
    positive("z_max", z_max)?;
    if !(z_min < z_max) || samples < 2 {
        return Err(Error::Validation(alloc::format!(
            "scan needs z_min < z_max and at least 2 samples, got [{z_min}, {z_max}] with {samples}"
        )));
    }
    let grid = log_grid(z_min, z_max, samples);
    let evals = par::map(grid.len(), |i| {
        let z = grid[i];
        let a = dp_dz_over_p(z);
        let b = drho_dp(z);
        match (a, b) {
            (Ok(a), Ok(b)) => Some(ConjectureSample {
                z,
                dp_dz_over_p: a,
                drho_dp: b,
                sound_speed_sq: 1.0 / b,
            }),
            _ => None,
        }
    });
    let mut report = ConjectureReport {
        samples: Vec::with_capacity(samples),
        pressure_violations: Vec::new(),
        sound_speed_violations: Vec::new(),
        large_z_violations: Vec::new(),
        evaluation_failures: Vec::new(),
    };
    for (z, e) in grid.iter().zip(evals) {
        let Some(s) = e else {
            report.evaluation_failures.push(*z);
            continue;
        };
        if !(s.dp_dz_over_p < 0.0) {
            report.pressure_violations.push(s.z);
        }
        if !(s.sound_speed_sq > 0.0 && s.sound_speed_sq < 1.0 / 3.0) {
            report.sound_speed_violations.push(s.z);
        }
        if s.z >= 70.0 && !((s.drho_dp - 0.6 * s.z).abs() <= 41.0) {
            report.large_z_violations.push(s.z);
        }
        report.samples.push(s);
    }
    Ok(report)
}

/// Relative residuals of the two Maxwell relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellResiduals {
    /// `|∂ρ/∂η|_n - nθ| / (nθ)`.
    pub temperature: f64,
    /// `|n ∂ρ/∂n|_η - (ρ + p)| / (ρ + p)`.
    pub enthalpy: f64,
}

/// Checks `nθ = ∂ρ/∂η|_n` and `ρ + p = n ∂ρ/∂n|_η` by centered differences
/// in `z` with relative step `step`. Both residuals are `O(step^2)`.
pub fn maxwell_relations_check(n: f64, z: f64, k: &PhysicalConstants, step: f64) -> Result<MaxwellResiduals> {
    positive("n", n)?;
    positive("z", z)?;
    positive("step", step)?;
    let h = step * z;
    let (zp, zm) = (z + h, z - h);
    positive("z - step", zm)?;
    let here = thermo_from_nz(n, z, k)?;

    // At fixed n.
    let a = thermo_from_nz(n, zp, k)?;
    let b = thermo_from_nz(n, zm, k)?;
    let drho_deta = (a.rho - b.rho) / (a.eta - b.eta);
    let n_theta = n * here.theta;
    let temperature = (drho_deta - n_theta).abs() / n_theta.abs();

    // Along the isentrope through (n, z).
    let np = n_on_isentrope(here.eta, zp, k)?;
    let nm = n_on_isentrope(here.eta, zm, k)?;
    let a = thermo_from_nz(np, zp, k)?;
    let b = thermo_from_nz(nm, zm, k)?;
    let drho_dn = (a.rho - b.rho) / (np - nm);
    let w = here.enthalpy_density();
    let enthalpy = (n * drho_dn - w).abs() / w;

    Ok(MaxwellResiduals { temperature, enthalpy })
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: PhysicalConstants = PhysicalConstants::UNIT;

    #[test]
    fn pressure_is_n_over_z() {
        assert_eq!(thermo_from_nz(1.0, 1.0, &K).unwrap().p, 1.0);
        assert_eq!(pressure_map(1.0, 2.0, &K).unwrap(), 0.5);
    }

    #[test]
    fn small_z_energy_density() {
        let z = 0.05;
        let t = thermo_from_nz(1.0, z, &K).unwrap();
        let ratio = t.rho / t.p;
        assert!(ratio >= 3.0 + z * (z / 2.0 - 2.0 * z * z));
        assert!(ratio <= 3.0 + z * (z / 2.0 + 2.0 * z * z));
    }

    #[test]
    fn entropy_halving_density() {
        for (n, z) in [(1.0, 0.3), (5.0, 7.0), (0.01, 100.0)] {
            let a = entropy_map(n, z, &K).unwrap();
            let b = entropy_map(2.0 * n, z, &K).unwrap();
            assert!((a - b - 2f64.ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn isentrope_density_matches_entropy_map() {
        let eta = entropy_map(3.0, 2.5, &K).unwrap();
        assert!((n_on_isentrope(eta, 2.5, &K).unwrap() - 3.0).abs() < 1e-13);
    }

    #[test]
    fn pressure_slopes_at_extreme_z() {
        assert!(0.05 * dp_dz_over_p(0.05).unwrap() < -3.0);
        assert!(100.0 * dp_dz_over_p(100.0).unwrap() < -1.0);
    }

    #[test]
    fn sound_speed_near_both_limits() {
        assert!((sound_speed_sq(0.05).unwrap() - 1.0 / 3.0).abs() <= 0.0025);
        assert!((drho_dp(100.0).unwrap() - 60.0).abs() <= 41.0);
    }

    #[test]
    fn round_trips() {
        for (n, z) in [(1.0, 0.05), (1.0, 100.0), (3.0, 5.0), (0.01, 0.01), (100.0, 100.0)] {
            let eta = entropy_map(n, z, &K).unwrap();
            let p = pressure_map(n, z, &K).unwrap();
            for init in [None, Some(1.0), Some(z)] {
                let inv = invert_eos(eta, p, &K, init).unwrap();
                assert!((inv.z - z).abs() / z < 1e-10, "z {z} init {init:?}: {inv:?}");
                assert!((inv.n - n).abs() / n < 1e-10);
            }
        }
    }

    #[test]
    fn entropy_shift_halves_density() {
        let (n, z) = (2.0, 3.0);
        let eta = entropy_map(n, z, &K).unwrap();
        let p = pressure_map(n, z, &K).unwrap();
        // η + k_B ln 2 with p halved: same z, half the density.
        let inv = invert_eos(eta + 2f64.ln(), 0.5 * p, &K, None).unwrap();
        assert!((inv.z - z).abs() / z < 1e-12);
        assert!((inv.n - 0.5 * n).abs() < 1e-12);
        // At fixed p the shift moves z along Φ(z) = ln p + η/k_B instead.
        let moved = invert_eos(eta + 2f64.ln(), p, &K, None).unwrap();
        let phi = log_p_exp_eta(moved.z, &K).unwrap();
        assert!((phi - (p.ln() + eta + 2f64.ln())).abs() < 1e-12);
        assert!(moved.z < z);
    }

    #[test]
    fn inversion_floor_is_reported() {
        // η far above anything reachable for z >= 1e-3 at this pressure.
        let eta = entropy_map(1e-12, 1e-5, &K).unwrap();
        let p = pressure_map(1e-12, 1e-5, &K).unwrap();
        assert!(matches!(invert_eos(eta, p, &K, None), Err(Error::Domain { .. })));
    }

    #[test]
    fn dimensional_constants_round_trip() {
        let k = PhysicalConstants::new(9.1e-31, 3.0e8, 1.38e-23, 6.6e-34).unwrap();
        let (n, z) = (1e20, 4.0);
        let eta = entropy_map(n, z, &k).unwrap();
        let p = pressure_map(n, z, &k).unwrap();
        let inv = invert_eos(eta, p, &k, None).unwrap();
        assert!((inv.n - n).abs() / n < 1e-10);
        let r = maxwell_relations_check(n, z, &k, 1e-4).unwrap();
        assert!(r.temperature < 1e-6 && r.enthalpy < 1e-6, "{r:?}");
    }

    #[test]
    fn maxwell_relations_second_order() {
        for z in [0.05, 1.0, 5.0, 100.0] {
            let a = maxwell_relations_check(1.0, z, &K, 1e-2).unwrap();
            let b = maxwell_relations_check(1.0, z, &K, 5e-3).unwrap();
            for (x, y) in [(a.temperature, b.temperature), (a.enthalpy, b.enthalpy)] {
                if x > 1e-11 {
                    let order = (x / y).log2();
                    assert!((order - 2.0).abs() < 0.2, "z={z} order={order} {a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn scan_is_clean_and_csv_shaped() {
        let r = scan_conjectures(0.1, 70.0, 500).unwrap();
        assert_eq!(r.violation_count(), 0);
        let mut s = alloc::string::String::new();
        r.write_csv(&mut s).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("z,dp_dz_over_p,drho_dp,sound_speed_sq"));
        assert_eq!(s.lines().count(), 501);
        let first: Vec<&str> = s.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(first.len(), 4);
        assert_eq!(first[0].parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn scan_rejects_bad_range() {
        assert!(scan_conjectures(2.0, 1.0, 10).is_err());
        assert!(scan_conjectures(1.0, 2.0, 1).is_err());
    }
}
