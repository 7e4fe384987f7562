//! Quadrature rules: Gauss-Legendre, exp-sinh on the half line, a product
//! Gauss rule on the unit sphere, and pairwise summation.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() <= 1e-16 * t.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, t);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| half * wi).collect(),
    )
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Difference between the last two refinement levels.
    pub abs_error: f64,
    pub levels: u32,
    pub converged: bool,
}

/// Exp-sinh (double exponential) rule for `∫_0^∞ f(x) dx`.
///
/// Uses `x = exp(π/2 sinh t)` on `t ∈ [-6.5, 3.5]` and halves the step until
/// two successive levels agree to `rel_tol`. Integrands must decay at least
/// like `exp(-x)` and may have integrable power singularities at 0.
pub fn exp_sinh<F: FnMut(f64) -> f64>(mut f: F, rel_tol: f64) -> Integral {
    const T_LO: f64 = -6.5;
    const T_HI: f64 = 3.5;
    const MAX_LEVEL: u32 = 9;

    let mut term = |t: f64| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        let x = s.exp();
        if x == 0.0 || !x.is_finite() {
            return 0.0;
        }
        let v = f(x) * x * FRAC_PI_2 * t.cosh();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };

    let mut h = 1.0;
    let mut sum = 0.0;
    let mut t = T_LO;
    while t <= T_HI {
        sum += term(t);
        t += h;
    }
    let mut value = sum * h;
    let mut abs_error = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut add = 0.0;
        let mut t = T_LO + h;
        while t <= T_HI {
            add += term(t);
            t += 2.0 * h;
        }
        sum += add;
        let next = sum * h;
        abs_error = (next - value).abs();
        value = next;
        if level >= 3 && abs_error <= rel_tol * value.abs() {
            return Integral {
                value,
                abs_error,
                levels: level,
                converged: true,
            };
        }
    }
    Integral {
        value,
        abs_error,
        levels: MAX_LEVEL,
        converged: false,
    }
}

/// Adds the values pairwise; the rounding error grows like `log n`.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if v.len() <= BLOCK {
        let mut s = 0.0;
        for x in v {
            s += x;
        }
        return s;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Product quadrature on the unit sphere: Gauss-Legendre in `cos θ` times the
/// uniform rule in `φ`.
///
/// With `n_polar` Gauss points and `n_azimuth` azimuthal points it integrates
/// spherical polynomials exactly up to degree `min(2 n_polar - 1, n_azimuth - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    pub n_polar: usize,
    pub n_azimuth: usize,
    pub directions: Vec<[f64; 3]>,
    /// Weights sum to `4π`.
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn product(n_polar: usize, n_azimuth: usize) -> Self {
        assert!(n_polar >= 1 && n_azimuth >= 1);
        let (mu, wmu) = gauss_legendre(n_polar);
        let dphi = 2.0 * PI / n_azimuth as f64;
        let mut directions = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        for (m, wm) in mu.iter().zip(&wmu) {
            let s = (1.0 - m * m).max(0.0).sqrt();
            for a in 0..n_azimuth {
                let phi = (a as f64 + 0.5) * dphi;
                directions.push([s * phi.cos(), s * phi.sin(), *m]);
                weights.push(wm * dphi);
            }
        }
        Self {
            n_polar,
            n_azimuth,
            directions,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        (2 * self.n_polar - 1).min(self.n_azimuth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((got - exact).abs() < 1e-13, "n={n} k={k} got={got}");
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn gauss_legendre_large_order_weights_sum_to_two() {
        let (_, w) = gauss_legendre(128);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn exp_sinh_gamma_function() {
        // ∫ x^{-1/2} e^{-x} = Γ(1/2) = √π
        let r = exp_sinh(|x| x.powf(-0.5) * (-x).exp(), 1e-14);
        assert!(r.converged);
        assert!((r.value - PI.sqrt()).abs() < 1e-14);
        // ∫ x^5 e^{-x} = 120
        let r = exp_sinh(|x| x.powi(5) * (-x).exp(), 1e-14);
        assert!((r.value - 120.0).abs() < 1e-11);
    }

    #[test]
    fn sphere_rule_moments() {
        let s = SphereRule::product(4, 8);
        assert_eq!(s.degree(), 7);
        let area: f64 = s.weights.iter().sum();
        assert!((area - 4.0 * PI).abs() < 1e-13);
        // ∫ x^2 dΩ = 4π/3, ∫ x^2 y^2 z^2 dΩ = 4π/105
        let m2: f64 = s.directions.iter().zip(&s.weights).map(|(d, w)| w * d[0] * d[0]).sum();
        assert!((m2 - 4.0 * PI / 3.0).abs() < 1e-13);
        let m6: f64 = s
            .directions
            .iter()
            .zip(&s.weights)
            .map(|(d, w)| w * (d[0] * d[1] * d[2]).powi(2))
            .sum();
        assert!((m6 - 4.0 * PI / 105.0).abs() < 1e-13);
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-12);
    }
}
