//! Modified Bessel functions of the second kind `K_j(z)` for integer orders.
//!
//! Two evaluation paths are provided:
//!
//! * the production path ([`k_j`], [`k_j_scaled`], [`bessel_ratio`]) uses
//!   Temme's series for `K_0, K_1` when `z <= 2`, Steed's continued fraction
//!   above, and upward recursion in the order;
//! * the reference path ([`k_j_reference`]) evaluates the defining integral
//!   (or its integrated-by-parts form) by exp-sinh quadrature and switches to
//!   the asymptotic series with a certified remainder for `z >= 30`.
//!
//! Scaled values `e^z K_j(z)` stay representable far beyond the underflow of
//! `K_j` itself and are what the equation of state consumes.

use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::vec::Vec;

use crate::quadrature::exp_sinh;
use crate::{Error, Result};

/// Highest order the toolkit evaluates.
pub const MAX_ORDER: u32 = 8;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exp-sinh quadrature of `∫ e^{-t} (t(2z+t))^{j-1/2} dt`.
    Integral,
    /// Exp-sinh quadrature of the form with `λ e^{-λ} (λ² - z²)^{j-3/2}`.
    AlternateIntegral,
    /// Asymptotic series truncated where the certified bound is smallest.
    Asymptotic,
    /// Temme series for orders 0 and 1.
    Series,
    /// Steed continued fraction for orders 0 and 1.
    ContinuedFraction,
    /// Upward three-term recursion from orders 0 and 1.
    Recursion,
}

/// A single evaluation of `K_j(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub order: u32,
    pub z: f64,
    /// `K_j(z)`; zero when it underflows (see `scaled`).
    pub value: f64,
    /// `e^z K_j(z)`.
    pub scaled: f64,
    pub method: Method,
    /// Estimated absolute error of `value`.
    pub abs_error: f64,
}

/// Coefficients of the large-`z` expansion and the remainder bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCoeffs {
    pub order: u32,
    /// `A_{j,0..n-1}`.
    pub coeffs: Vec<f64>,
    /// Bound on `|γ_{j,n}(z)|`: `2 exp((j² - 1/4)/z) |A_{j,n}|`.
    pub remainder_bound: f64,
}

fn check_args(j: u32, z: f64) -> Result<()> {
    if !(z > 0.0) || z.is_nan() {
        return Err(Error::Domain { what: "Bessel argument z", value: z });
    }
    if j > MAX_ORDER {
        return Err(Error::Domain {
            what: "Bessel order j",
            value: j as f64,
        });
    }
    Ok(())
}

/// `A_{j,m} = (4j²-1)(4j²-3²)…(4j²-(2m-1)²) / (m! 8^m)`.
pub fn asymptotic_coefficient(j: u32, m: u32) -> f64 {
    let mu = 4.0 * (j as f64) * (j as f64);
    let mut a = 1.0;
    for k in 1..=m {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (8.0 * k as f64);
    }
    a
}

/// The first `n` coefficients and the bound on `|γ_{j,n}(z)|`.
pub fn asymptotic_coeffs(j: u32, n: u32, z: f64) -> AsymptoticCoeffs {
    let coeffs = (0..n).map(|m| asymptotic_coefficient(j, m)).collect();
    let jf = j as f64;
    let remainder_bound = 2.0 * ((jf * jf - 0.25) / z).exp() * asymptotic_coefficient(j, n).abs();
    AsymptoticCoeffs {
        order: j,
        coeffs,
        remainder_bound,
    }
}

/// Scaled partial sum `Σ_{m<n} A_{j,m} z^{-m}` and its certified bound, both
/// without the `sqrt(π/2z) e^{-z}` prefactor. Terms are built incrementally
/// so that large `n` cannot overflow `A_{j,n}`.
fn asymptotic_series(j: u32, z: f64, n: u32) -> (f64, f64) {
    let jf = j as f64;
    let mu = 4.0 * jf * jf;
    let mut sum = 0.0;
    let mut term = 1.0;
    for m in 0..n {
        sum += term;
        let odd = (2 * m + 1) as f64;
        term *= (mu - odd * odd) / (8.0 * (m + 1) as f64 * z);
    }
    (sum, 2.0 * ((jf * jf - 0.25) / z).exp() * term.abs())
}

/// Partial sum `sqrt(π/2z) e^{-z} Σ_{m<n} A_{j,m} z^{-m}` and the certified
/// bound on `|K_j(z) - partial sum|`.
pub fn k_j_asymptotic(j: u32, z: f64, n: u32) -> Result<(f64, f64)> {
    check_args(j, z)?;
    if n == 0 {
        return Err(Error::Domain {
            what: "asymptotic truncation n",
            value: 0.0,
        });
    }
    let (s, bound) = asymptotic_series(j, z, n);
    let pre = (PI / (2.0 * z)).sqrt() * (-z).exp();
    Ok((pre * s, pre * bound))
}

/// Truncation that minimizes the certified bound, searched up to `n = 2z + 2`
/// and stopped early once the first neglected term is below rounding.
fn optimal_truncation(j: u32, z: f64) -> u32 {
    let nmax = ((2.0 * z) as u32 + 2).min(400);
    let mu = 4.0 * (j as f64) * (j as f64);
    let mut best_n = 1;
    let mut term = 1.0;
    let mut best = f64::INFINITY;
    for n in 1..=nmax {
        let odd = (2 * n - 1) as f64;
        term *= (mu - odd * odd) / (8.0 * n as f64 * z);
        let t = term.abs();
        if t < best {
            best = t;
            best_n = n;
        }
        if t < 1e-18 {
            break;
        }
    }
    best_n
}

fn reference_scaled(j: u32, z: f64) -> Result<(f64, f64, Method)> {
    if z >= 30.0 {
        let n = optimal_truncation(j, z);
        let (s, bound) = asymptotic_series(j, z, n);
        let pre = (PI / (2.0 * z)).sqrt();
        return Ok((pre * s, pre * bound, Method::Asymptotic));
    }
    let jf = j as f64;
    let (pref, integral, method) = if z <= 2.0 || j == 0 {
        // c_j = 2^j j! / (2j)!
        let mut c = 1.0;
        for k in 1..=j {
            c *= 2.0 * k as f64 / ((2 * k - 1) as f64 * (2 * k) as f64);
        }
        let e = jf - 0.5;
        let r = exp_sinh(|t| (-t + e * (t * (2.0 * z + t)).ln()).exp(), 1e-14);
        (c, r, Method::Integral)
    } else {
        // d_j = 2^{j-1} (j-1)! / (2j-2)!
        let mut d = 1.0;
        for k in 1..j {
            d *= 2.0 * k as f64 / ((2 * k - 1) as f64 * (2 * k) as f64);
        }
        let e = jf - 1.5;
        let r = exp_sinh(|t| (z + t) * (-t + e * (t * (2.0 * z + t)).ln()).exp(), 1e-14);
        (d, r, Method::AlternateIntegral)
    };
    if !integral.converged {
        return Err(Error::NoConvergence {
            what: "Bessel integral quadrature",
            iterations: integral.levels as usize,
            last: integral.value,
            residual: integral.abs_error,
        });
    }
    let zj = z.powi(j as i32);
    let value = pref * integral.value / zj;
    let err = pref * integral.abs_error / zj + 4.0 * f64::EPSILON * value;
    Ok((value, err, method))
}

/// Reference evaluation from the defining integral (`z < 30`) or the
/// asymptotic series with the smallest certified bound (`z >= 30`).
pub fn k_j_reference(j: u32, z: f64) -> Result<BesselEval> {
    check_args(j, z)?;
    let (scaled, scaled_err, method) = reference_scaled(j, z)?;
    finish(j, z, scaled, scaled_err, method)
}

fn finish(j: u32, z: f64, scaled: f64, scaled_err: f64, method: Method) -> Result<BesselEval> {
    if !(scaled.is_finite() && scaled > 0.0) {
        return Err(Error::Range {
            what: "scaled Bessel K_j",
            value: z,
        });
    }
    let damp = (-z).exp();
    Ok(BesselEval {
        order: j,
        z,
        value: scaled * damp,
        scaled,
        method,
        abs_error: scaled_err * damp,
    })
}

/// `K_0, K_1` for `0 < z <= 2` by Temme's series (order ν = 0 specialization).
fn k01_temme(z: f64) -> (f64, f64) {
    let half = 0.5 * z;
    let d = half * half;
    let mut ff = -EULER_GAMMA - half.ln();
    let mut p = 0.5;
    let mut q = 0.5;
    let mut c = 1.0;
    let mut sum = ff;
    let mut sum1 = p;
    for i in 1..200 {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi);
        c *= d / fi;
        p /= fi;
        q /= fi;
        let del = c * ff;
        let del1 = c * (p - fi * ff);
        sum += del;
        sum1 += del1;
        if del.abs() < sum.abs() * f64::EPSILON * 0.5 && del1.abs() < sum1.abs() * f64::EPSILON * 0.5 {
            break;
        }
    }
    (sum, sum1 * 2.0 / z)
}

/// Scaled `e^z K_0, e^z K_1` and the scaled difference `e^z (K_1 - K_0)` for
/// `z > 2` by Steed's continued fraction.
fn k01_steed_scaled(z: f64) -> (f64, f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 0.5 * f64::EPSILON {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * z)).sqrt() / s;
    let diff = k0 * (0.5 - h) / z;
    (k0, k0 + diff, diff)
}

/// Scaled `(e^z K_0, e^z K_1, e^z (K_1 - K_0))`.
fn k01_scaled(z: f64) -> (f64, f64, f64) {
    if z <= 2.0 {
        let (k0, k1) = k01_temme(z);
        let e = z.exp();
        (k0 * e, k1 * e, (k1 - k0) * e)
    } else {
        k01_steed_scaled(z)
    }
}

/// Scaled values `e^z K_i(z)` for `i = 0..=j` (production path).
pub fn scaled_orders(j: u32, z: f64) -> Result<Vec<f64>> {
    check_args(j, z)?;
    let (k0, k1, _) = k01_scaled(z);
    let mut out = Vec::with_capacity(j as usize + 1);
    out.push(k0);
    if j >= 1 {
        out.push(k1);
    }
    for i in 1..j {
        let next = out[i as usize - 1] + 2.0 * i as f64 / z * out[i as usize];
        out.push(next);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Range {
            what: "scaled Bessel K_j",
            value: z,
        });
    }
    Ok(out)
}

/// Production evaluation with method tag and error estimate.
pub fn k_j_eval(j: u32, z: f64) -> Result<BesselEval> {
    let s = scaled_orders(j, z)?;
    let scaled = s[j as usize];
    let method = if j >= 2 {
        Method::Recursion
    } else if z <= 2.0 {
        Method::Series
    } else {
        Method::ContinuedFraction
    };
    let err = (8.0 + 2.0 * j as f64) * f64::EPSILON * scaled;
    finish(j, z, scaled, err, method)
}

/// `K_j(z)`.
///
/// Fails with a range error when the value overflows (tiny `z`) or underflows
/// to zero (large `z`); [`k_j_scaled`] covers the latter.
pub fn k_j(j: u32, z: f64) -> Result<f64> {
    let e = k_j_eval(j, z)?;
    if !(e.value > 0.0 && e.value.is_finite()) {
        return Err(Error::Range {
            what: "Bessel K_j",
            value: z,
        });
    }
    Ok(e.value)
}

/// `e^z K_j(z)`.
pub fn k_j_scaled(j: u32, z: f64) -> Result<f64> {
    Ok(k_j_eval(j, z)?.scaled)
}

/// Below this `K_1/K_2 = z/2` to double precision.
const RATIO_SMALL_Z: f64 = 1e-9;

/// `R(z) = K_1(z)/K_2(z)`, in `(0, 1)` for every `z > 0`.
pub fn bessel_ratio(z: f64) -> Result<f64> {
    Ok(ratio_and_complement(z)?.0)
}

/// `(R, 1 - R)` with `R = K_1/K_2`; the complement is computed without
/// cancellation at large `z`, where `1 - R ≈ 3/(2z)`.
pub fn ratio_and_complement(z: f64) -> Result<(f64, f64)> {
    check_args(0, z)?;
    if z < RATIO_SMALL_Z {
        let r = 0.5 * z;
        return Ok((r, 1.0 - r));
    }
    let (k0, k1, diff) = k01_scaled(z);
    let k2 = k0 + 2.0 * k1 / z;
    if !(k2.is_finite() && k1.is_finite()) {
        return Err(Error::Range {
            what: "Bessel ratio K_1/K_2",
            value: z,
        });
    }
    // K_2 - K_1 = (2 K_1 - z (K_1 - K_0)) / z
    let comp = (2.0 * k1 - z * diff) / (z * k2);
    Ok((k1 / k2, comp))
}

/// `K_2(z)` scaled together with `R(z)`: `(e^z K_2, K_1/K_2, 1 - K_1/K_2)`.
pub fn k2_scaled_and_ratio(z: f64) -> Result<(f64, f64, f64)> {
    let (r, d) = ratio_and_complement(z)?;
    let k2 = k_j_scaled(2, z)?;
    Ok((k2, r, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    // Values to 16 digits from the standard tables of K_0, K_1 and K_2.
    const K0_1: f64 = 0.421_024_438_240_708_3;
    const K1_1: f64 = 0.601_907_230_197_234_6;
    const K2_1: f64 = 1.624_838_898_635_177_4;

    #[test]
    fn unit_argument_values() {
        assert!(rel(k_j(0, 1.0).unwrap(), K0_1) < 1e-15);
        assert!(rel(k_j(1, 1.0).unwrap(), K1_1) < 1e-15);
        assert!(rel(k_j(2, 1.0).unwrap(), K2_1) < 1e-15);
        for j in 0..=2 {
            let r = k_j_reference(j, 1.0).unwrap();
            assert_eq!(r.method, Method::Integral);
            assert!(rel(r.value, [K0_1, K1_1, K2_1][j as usize]) < 1e-13);
        }
    }

    #[test]
    fn production_agrees_with_reference() {
        let mut z = 0.01;
        while z < 200.0 {
            for j in 0..=MAX_ORDER {
                let a = k_j_scaled(j, z).unwrap();
                let b = k_j_reference(j, z).unwrap().scaled;
                assert!(rel(a, b) < 1e-12, "j={j} z={z} fast={a} ref={b}");
            }
            z *= 1.37;
        }
    }

    #[test]
    fn thresholds_are_consistent() {
        for j in 0..=MAX_ORDER {
            for z in [1.999, 2.0, 2.001, 29.99, 30.0, 30.01] {
                let r = k_j_reference(j, z).unwrap();
                let expect = if z >= 30.0 {
                    Method::Asymptotic
                } else if z <= 2.0 || j == 0 {
                    Method::Integral
                } else {
                    Method::AlternateIntegral
                };
                assert_eq!(r.method, expect);
                assert!(rel(r.scaled, k_j_scaled(j, z).unwrap()) < 1e-12);
            }
        }
    }

    #[test]
    fn small_argument_bounds() {
        let z = 0.05;
        assert!((k_j(2, z).unwrap() - 2.0 / (z * z)).abs() <= 1.0 + z / 3.0);
        assert!((k_j(1, z).unwrap() - 1.0 / z).abs() <= 1.0 + z / 2.0);
    }

    #[test]
    fn coefficients() {
        assert_eq!(asymptotic_coefficient(3, 0), 1.0);
        assert_eq!(asymptotic_coefficient(1, 1), 3.0 / 8.0);
        assert_eq!(asymptotic_coefficient(2, 1), 15.0 / 8.0);
        let c = asymptotic_coeffs(2, 3, 50.0);
        assert_eq!(c.coeffs.len(), 3);
        assert_eq!(c.coeffs[0], 1.0);
    }

    #[test]
    fn single_term_asymptotic() {
        for z in [0.5, 3.0, 40.0] {
            let (v, _) = k_j_asymptotic(0, z, 1).unwrap();
            assert_eq!(v, (PI / (2.0 * z)).sqrt() * (-z).exp());
        }
    }

    #[test]
    fn asymptotic_bound_holds() {
        let (v, bound) = k_j_asymptotic(2, 50.0, 3).unwrap();
        let exact = k_j_reference(2, 50.0).unwrap().value;
        assert!((v - exact).abs() <= bound);
        assert!(bound > 0.0 && bound.is_finite());
    }

    #[test]
    fn domain_and_range_errors() {
        assert!(matches!(k_j(1, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(k_j(1, -1.0), Err(Error::Domain { .. })));
        assert!(matches!(k_j(1, f64::NAN), Err(Error::Domain { .. })));
        assert!(matches!(k_j(9, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(k_j(2, 1e4), Err(Error::Range { .. })));
        assert!(matches!(k_j(8, 1e-300), Err(Error::Range { .. })));
        assert!(k_j_scaled(2, 1e4).unwrap() > 0.0);
    }

    #[test]
    fn ratio_and_complement_consistent() {
        for z in [1e-12, 1e-6, 0.05, 1.0, 2.0, 5.0, 100.0, 1e4] {
            let (r, d) = ratio_and_complement(z).unwrap();
            assert!(r > 0.0 && r < 1.0);
            assert!(rel(1.0 - r, d) < 1e-12 || z > 50.0);
            if z >= 50.0 {
                // 1 - R = 3/(2z) - 15/(8 z^2) + O(z^-3)
                let approx = 1.5 / z - 15.0 / (8.0 * z * z);
                assert!((d - approx).abs() < 20.0 / (z * z * z));
            }
        }
    }
}
