//! The relativistic collision operator in center-of-momentum variables.
//!
//! ```text
//! Q(F, G)(P̄) = ∫ dQ̄ ∫ dω v_ø σ(ϱ, ϑ) [F(P̄') G(Q̄') - F(P̄) G(Q̄)]
//! ```
//!
//! with relative momentum `ϱ`, `s = ϱ² + 4 m0² c²` and
//! `v_ø = (c/4) ϱ √s / (P⁰ Q⁰)`.
//!
//! The linearized operator is represented by its Galerkin matrix on a
//! polynomial space (see [`LinearizedOperator`]); the bilinear parts (`Q`
//! itself, `Γ`) are evaluated pointwise in strong form.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use nalgebra::{DMatrix, DVector};

use crate::grid::{GridField, GridSpec, MomentumGrid, PhaseFn};
use crate::maxwellian::{global_maxwellian, MaxwellianParams};
use crate::quadrature::{gauss_legendre_on, pairwise_sum, SphereRule};
use crate::{par, Error, PhysicalConstants, Result};

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Relative kinematics of a pair of on-shell momenta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionKinematics {
    /// `ϱ = sqrt((P - Q)_κ (P - Q)^κ)`.
    pub rho: f64,
    /// `s = ϱ² + 4 m0² c²`.
    pub s: f64,
    /// `v_ø = (c/4) ϱ √s / (P⁰ Q⁰)`.
    pub v_moller: f64,
    /// `(P⁰ + Q⁰)/√s`.
    pub gamma_boost: f64,
}

/// `ϱ`, `s`, `v_ø` and the boost factor for `P̄`, `Q̄`.
///
/// `ϱ² = |P̄-Q̄|² - (P⁰-Q⁰)²` with `P⁰ - Q⁰ = (P̄-Q̄)·(P̄+Q̄)/(P⁰+Q⁰)`,
/// which avoids cancellation for nearby momenta.
pub fn kinematics(p: &[f64; 3], q: &[f64; 3], k: &PhysicalConstants) -> CollisionKinematics {
    let (p0, q0) = (k.p0(p), k.p0(q));
    kinematics_with_energies(p, p0, q, q0, k)
}

fn kinematics_with_energies(p: &[f64; 3], p0: f64, q: &[f64; 3], q0: f64, k: &PhysicalConstants) -> CollisionKinematics {
    let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    let sum = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
    let e = p0 + q0;
    let de = dot(&d, &sum) / e;
    let rho = (dot(&d, &d) - de * de).max(0.0).sqrt();
    let mc = k.mc();
    let s = rho * rho + 4.0 * mc * mc;
    let sqrt_s = s.sqrt();
    CollisionKinematics {
        rho,
        s,
        v_moller: 0.25 * k.c * rho * sqrt_s / (p0 * q0),
        gamma_boost: e / sqrt_s,
    }
}

/// `v_ø` from the three-velocity form
/// `(c/2) sqrt(|P̄/P⁰ - Q̄/Q⁰|² - |P̄/P⁰ × Q̄/Q⁰|²)`.
pub fn moller_cross_form(p: &[f64; 3], q: &[f64; 3], k: &PhysicalConstants) -> f64 {
    let (p0, q0) = (k.p0(p), k.p0(q));
    let a = [p[0] / p0, p[1] / p0, p[2] / p0];
    let b = [q[0] / q0, q[1] / q0, q[2] / q0];
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let x = cross(&a, &b);
    0.5 * k.c * (dot(&d, &d) - dot(&x, &x)).max(0.0).sqrt()
}

/// Outgoing momenta of one collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostCollision {
    pub p: [f64; 3],
    pub q: [f64; 3],
    pub p0: f64,
    pub q0: f64,
    /// Set when `P̄ + Q̄ = 0`; the formula then reduces to `P̄' = (ϱ/2) ω`.
    pub com_at_rest: bool,
}

/// `P̄' = S/2 + (ϱ/2)(ω + S (S·ω) / (√s (E + √s)))`, `Q̄' = S - P̄'` with
/// `S = P̄ + Q̄`, `E = P⁰ + Q⁰`; energies `E/2 ± ϱ (ω·S) / (2√s)`.
///
/// This is the boost of `±(ϱ/2) ω` from the center-of-momentum frame with
/// the `(γ - 1)/|S|²` projector written without the removable singularity.
pub fn post_collisional(p: &[f64; 3], q: &[f64; 3], omega: &[f64; 3], k: &PhysicalConstants) -> PostCollision {
    let (p0, q0) = (k.p0(p), k.p0(q));
    let kin = kinematics_with_energies(p, p0, q, q0, k);
    post_with(p, p0, q, q0, &kin, omega)
}

fn post_with(p: &[f64; 3], p0: f64, q: &[f64; 3], q0: f64, kin: &CollisionKinematics, omega: &[f64; 3]) -> PostCollision {
    let sum = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
    let e = p0 + q0;
    let sqrt_s = kin.s.sqrt();
    let sw = dot(&sum, omega);
    let proj = sw / (sqrt_s * (e + sqrt_s));
    let half = 0.5 * kin.rho;
    let v = [
        half * (omega[0] + sum[0] * proj),
        half * (omega[1] + sum[1] * proj),
        half * (omega[2] + sum[2] * proj),
    ];
    let de = half * sw / sqrt_s;
    PostCollision {
        p: [0.5 * sum[0] + v[0], 0.5 * sum[1] + v[1], 0.5 * sum[2] + v[2]],
        q: [0.5 * sum[0] - v[0], 0.5 * sum[1] - v[1], 0.5 * sum[2] - v[2]],
        p0: 0.5 * e + de,
        q0: 0.5 * e - de,
        com_at_rest: dot(&sum, &sum) == 0.0,
    }
}

/// Direction `ω` for which the collision returns `(P̄, Q̄)` unchanged.
pub fn identity_direction(p: &[f64; 3], q: &[f64; 3], k: &PhysicalConstants) -> [f64; 3] {
    let (p0, q0) = (k.p0(p), k.p0(q));
    let kin = kinematics_with_energies(p, p0, q, q0, k);
    let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    let sum = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
    let e = p0 + q0;
    let f = dot(&sum, &d) / (e * (e + kin.s.sqrt()));
    [
        (d[0] - sum[0] * f) / kin.rho,
        (d[1] - sum[1] * f) / kin.rho,
        (d[2] - sum[2] * f) / kin.rho,
    ]
}

/// `cos ϑ = (P - Q)^μ (P' - Q')_μ / ϱ²`, clamped to `[-1, 1]`.
///
/// On-shell quadruples give `|cos ϑ| <= 1` up to rounding; the unclamped
/// value is returned alongside for diagnostics.
pub fn scattering_cosine(p: &[f64; 3], p0: f64, q: &[f64; 3], q0: f64, post: &PostCollision, rho: f64) -> (f64, f64) {
    if rho == 0.0 {
        return (1.0, 1.0);
    }
    let d = [p0 - q0, p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    let dp = [post.p0 - post.q0, post.p[0] - post.q[0], post.p[1] - post.q[1], post.p[2] - post.q[2]];
    let raw = (-d[0] * dp[0] + d[1] * dp[1] + d[2] * dp[2] + d[3] * dp[3]) / (rho * rho);
    (raw.clamp(-1.0, 1.0), raw)
}

/// Angular factor `σ₀(ϑ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngularProfile {
    Isotropic,
    /// `sin^γ ϑ`.
    SinPower(f64),
}

/// `σ(ϱ, ϑ) = (C₁ ϱ^a + C₂ ϱ^{-b}) σ₀(ϑ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionKernel {
    pub c1: f64,
    pub c2: f64,
    pub a: f64,
    pub b: f64,
    /// Angular exponent `γ` bounding `σ₀ <= sin^γ ϑ`.
    pub gamma: f64,
    pub profile: AngularProfile,
}

impl CollisionKernel {
    pub fn new(c1: f64, c2: f64, a: f64, b: f64, profile: AngularProfile) -> Result<Self> {
        let gamma = match profile {
            AngularProfile::Isotropic => 0.0,
            AngularProfile::SinPower(g) => g,
        };
        let bad = |msg: &str| Err(Error::Validation(alloc::format!("collision kernel: {msg}")));
        if !(c1 >= 0.0 && c2 >= 0.0) || c1 + c2 == 0.0 {
            return bad("need C1, C2 >= 0, not both zero");
        }
        if !(gamma > -2.0) {
            return bad("angular exponent must exceed -2");
        }
        if !(a >= 0.0 && a < 2.0f64.min(2.0 + gamma)) {
            return bad("need 0 <= a < min(2, 2 + gamma)");
        }
        if !(b >= 0.0 && b < 4.0f64.min(4.0 + gamma)) {
            return bad("need 0 <= b < min(4, 4 + gamma)");
        }
        Ok(Self {
            c1,
            c2,
            a,
            b,
            gamma,
            profile,
        })
    }

    /// `C₁ = 1, a = 0, σ₀ = 1`.
    pub fn hard() -> Self {
        Self {
            c1: 1.0,
            c2: 0.0,
            a: 0.0,
            b: 0.0,
            gamma: 0.0,
            profile: AngularProfile::Isotropic,
        }
    }

    /// `C₂ = 1, b = 1, σ₀ = 1`.
    pub fn soft() -> Self {
        Self {
            c1: 0.0,
            c2: 1.0,
            a: 0.0,
            b: 1.0,
            gamma: 0.0,
            profile: AngularProfile::Isotropic,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "hard" => Some(Self::hard()),
            "soft" => Some(Self::soft()),
            _ => None,
        }
    }

    /// The same kernel multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            c1: self.c1 * factor,
            c2: self.c2 * factor,
            ..*self
        }
    }

    /// Growth exponent `β` of `ν ~ (P⁰)^{β/2}` implied by the dominant
    /// radial power: `a` when `C₁ > 0`, otherwise `-b`.
    pub fn declared_beta(&self) -> f64 {
        if self.c1 > 0.0 {
            self.a
        } else {
            -self.b
        }
    }

    pub fn radial(&self, rho: f64) -> f64 {
        let mut v = 0.0;
        if self.c1 != 0.0 {
            v += self.c1 * if self.a == 0.0 { 1.0 } else { rho.powf(self.a) };
        }
        if self.c2 != 0.0 {
            v += self.c2 * if self.b == 0.0 { 1.0 } else { rho.powf(-self.b) };
        }
        v
    }

    pub fn angular(&self, cos_theta: f64) -> f64 {
        match self.profile {
            AngularProfile::Isotropic => 1.0,
            AngularProfile::SinPower(g) => (1.0 - cos_theta * cos_theta).max(0.0).powf(0.5 * g),
        }
    }

    pub fn needs_angle(&self) -> bool {
        !matches!(self.profile, AngularProfile::Isotropic)
    }

    pub fn sigma(&self, rho: f64, cos_theta: f64) -> f64 {
        self.radial(rho) * self.angular(cos_theta)
    }

    /// `∫_{S²} σ₀ dω`.
    pub fn angular_integral(&self) -> f64 {
        match self.profile {
            AngularProfile::Isotropic => 4.0 * PI,
            AngularProfile::SinPower(g) => {
                2.0 * PI * PI.sqrt() * libm::tgamma(0.5 * (g + 2.0)) / libm::tgamma(0.5 * (g + 3.0))
            }
        }
    }

    /// `v_ø σ` is unbounded as `ϱ → 0`.
    pub fn singular(&self) -> bool {
        self.c2 > 0.0 && self.b > 1.0
    }
}

/// Momentum grid of the default collision quadrature.
pub const DEFAULT_Q_GRID: GridSpec = GridSpec {
    n_radial: 48,
    n_polar: 12,
    n_azimuth: 24,
};

/// Decades of decay of the background covered by the `Q̄` grid.
pub const QUADRATURE_DECADES: f64 = 12.0;

/// Quadrature over `Q̄` and `ω` for the collision integral.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionQuadrature {
    pub q_grid: MomentumGrid,
    pub sphere: SphereRule,
}

impl CollisionQuadrature {
    /// `Q̄` grid ending where `params` has dropped by [`QUADRATURE_DECADES`]
    /// and a product sphere rule.
    pub fn for_maxwellian(params: &MaxwellianParams, spec: GridSpec, n_polar: usize, n_azimuth: usize) -> Result<Self> {
        Ok(Self {
            q_grid: MomentumGrid::new(spec, params.cutoff_radius_for(QUADRATURE_DECADES), &params.constants)?,
            sphere: SphereRule::product(n_polar, n_azimuth),
        })
    }

    /// [`DEFAULT_Q_GRID`] and a 6 × 12 sphere rule.
    pub fn default_for(params: &MaxwellianParams) -> Result<Self> {
        Self::for_maxwellian(params, DEFAULT_Q_GRID, 6, 12)
    }
}

/// Gain and loss parts of `Q(F, G)(P̄)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValue {
    pub gain: f64,
    pub loss: f64,
    /// Magnitude estimate of the part dropped inside the excised ball
    /// (zero for bounded `v_ø σ`).
    pub excised: f64,
}

impl QValue {
    pub fn value(&self) -> f64 {
        self.gain - self.loss
    }
}

/// `Q(F, G)(P̄)` by quadrature over the `Q̄` grid and the sphere rule.
///
/// For kernels with unbounded `v_ø σ` the ball `ϱ < ε`, `ε` half a radial
/// cell of the `Q̄` grid, is skipped and its size estimated from the local
/// power law.
pub fn collision_q<F: PhaseFn + ?Sized, G: PhaseFn + ?Sized>(
    f: &F,
    g: &G,
    p: &[f64; 3],
    kernel: &CollisionKernel,
    quad: &CollisionQuadrature,
    k: &PhysicalConstants,
) -> QValue {
    let qg = &quad.q_grid;
    let p0 = k.p0(p);
    let fp = f.eval(p);
    let eps = if kernel.singular() {
        0.5 * qg.cutoff / qg.spec.n_radial as f64
    } else {
        0.0
    };
    let mut gain = Vec::with_capacity(qg.len());
    let mut loss = Vec::with_capacity(qg.len());
    for (j, q) in qg.nodes.iter().enumerate() {
        let q0 = qg.p0[j];
        let kin = kinematics_with_energies(p, p0, q, q0, k);
        if kin.rho <= eps && eps > 0.0 {
            continue;
        }
        if kin.rho == 0.0 && kernel.radial(0.0).is_infinite() {
            continue;
        }
        let rv = kin.v_moller * kernel.radial(kin.rho);
        if rv == 0.0 {
            continue;
        }
        let gq = g.eval(q);
        let mut gs = 0.0;
        let mut ls = 0.0;
        for (om, wo) in quad.sphere.directions.iter().zip(&quad.sphere.weights) {
            let post = post_with(p, p0, q, q0, &kin, om);
            let ang = if kernel.needs_angle() {
                kernel.angular(scattering_cosine(p, p0, q, q0, &post, kin.rho).0)
            } else {
                1.0
            };
            gs += wo * ang * f.eval(&post.p) * g.eval(&post.q);
            ls += wo * ang;
        }
        let w = qg.weights[j] * rv;
        gain.push(w * gs);
        loss.push(w * ls * fp * gq);
    }
    let excised = if eps > 0.0 {
        let mc = k.mc();
        let b = kernel.b;
        let local = 0.25 * k.c * 2.0 * mc / (p0 * p0) * kernel.c2;
        (fp * g.eval(p)).abs() * kernel.angular_integral() * local * 4.0 * PI * eps.powf(4.0 - b) / (4.0 - b)
    } else {
        0.0
    };
    QValue {
        gain: pairwise_sum(&gain),
        loss: pairwise_sum(&loss),
        excised,
    }
}

/// `Q(F, G)` at every node of `grid`.
pub fn collision_q_on_grid<F: PhaseFn + ?Sized, G: PhaseFn + ?Sized>(
    f: &F,
    g: &G,
    grid: &MomentumGrid,
    kernel: &CollisionKernel,
    quad: &CollisionQuadrature,
    k: &PhysicalConstants,
) -> Vec<QValue> {
    par::map(grid.len(), |i| collision_q(f, g, &grid.nodes[i], kernel, quad, k))
}

/// Node counts of the collision-frequency quadrature.
const NU_RADIAL: usize = 48;
const NU_ANGLE: usize = 48;

/// `ν(P̄) = ∫ dQ̄ ∫ dω v_ø σ J(Q̄)`.
///
/// `σ₀` integrates to a constant over `ω`, so only the radial factor is
/// integrated in `Q̄`, in spherical coordinates about `P̄`. The radial
/// integral is split at `|P̄|` where the integrand has a kink, and the polar
/// angle uses `cos α = 1 - 2t²` to resolve the `ϱ → 0` corner.
pub fn collision_frequency(p: &[f64; 3], kernel: &CollisionKernel, theta_m: f64, k: &PhysicalConstants) -> f64 {
    let pn = dot(p, p).sqrt();
    let p0 = k.p0(p);
    let decay = k.k_b * theta_m / k.c;
    let along = if pn > 0.0 { [p[0] / pn, p[1] / pn, p[2] / pn] } else { [0.0, 0.0, 1.0] };
    // Orthonormal pair completing `along`.
    let helper = if along[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = {
        let c = cross(&along, &helper);
        let n = dot(&c, &c).sqrt();
        [c[0] / n, c[1] / n, c[2] / n]
    };

    let (ts, wts) = gauss_legendre_on(0.0, 1.0, NU_ANGLE);
    let shell = |r: f64| -> f64 {
        // ∫ v_ø σ_radial dcos α at |Q̄| = r; azimuth is trivial.
        let mut acc = 0.0;
        for (t, wt) in ts.iter().zip(&wts) {
            let cos_a = 1.0 - 2.0 * t * t;
            let sin_a = (1.0 - cos_a * cos_a).max(0.0).sqrt();
            let q = [
                r * (cos_a * along[0] + sin_a * e1[0]),
                r * (cos_a * along[1] + sin_a * e1[1]),
                r * (cos_a * along[2] + sin_a * e1[2]),
            ];
            let q0 = k.p0(&q);
            let kin = kinematics_with_energies(p, p0, &q, q0, k);
            if kin.rho == 0.0 {
                continue;
            }
            acc += wt * 4.0 * t * kin.v_moller * kernel.radial(kin.rho);
        }
        acc
    };
    let mut total = 0.0;
    if pn > 0.0 {
        let (rs, wr) = gauss_legendre_on(0.0, pn, NU_RADIAL);
        for (r, w) in rs.iter().zip(&wr) {
            let q0 = k.p0(&[*r, 0.0, 0.0]);
            total += w * r * r * (-q0 / decay).exp() * shell(*r);
        }
    }
    // [|P̄|, ∞) mapped by r = |P̄| + L x/(1 - x).
    let l = 8.0 * decay.max(k.mc());
    let (xs, wx) = gauss_legendre_on(0.0, 1.0, NU_RADIAL);
    for (x, w) in xs.iter().zip(&wx) {
        let r = pn + l * x / (1.0 - x);
        let jac = l / ((1.0 - x) * (1.0 - x));
        let q0 = k.p0(&[r, 0.0, 0.0]);
        let jq = (-q0 / decay).exp();
        if jq == 0.0 {
            continue;
        }
        total += w * jac * r * r * jq * shell(r);
    }
    2.0 * PI * kernel.angular_integral() * total
}

/// Log-log slope of `ν` against `P⁰` compared with `β/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyFit {
    pub p0: Vec<f64>,
    pub nu: Vec<f64>,
    pub slope: f64,
    pub declared_half_beta: f64,
    pub within_band: bool,
}

/// Fits `ln ν = s ln P⁰ + c` on `samples` log-spaced `P⁰ ∈ [p0_min, p0_max]`
/// (in units of `m0 c`) and checks `|s - β/2| <= band`.
pub fn fit_frequency_exponent(
    kernel: &CollisionKernel,
    theta_m: f64,
    k: &PhysicalConstants,
    p0_min: f64,
    p0_max: f64,
    samples: usize,
    band: f64,
) -> Result<FrequencyFit> {
    if !(p0_min >= 1.0 && p0_max > p0_min && samples >= 2) {
        return Err(Error::Validation(alloc::format!(
            "frequency fit needs 1 <= p0_min < p0_max and samples >= 2, got [{p0_min}, {p0_max}] x {samples}"
        )));
    }
    let mc = k.mc();
    let e = crate::eos::log_grid(p0_min, p0_max, samples);
    let nu: Vec<f64> = par::map(samples, |i| {
        let r = mc * (e[i] * e[i] - 1.0).max(0.0).sqrt();
        collision_frequency(&[0.0, 0.0, r], kernel, theta_m, k)
    });
    let xs: Vec<f64> = e.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = nu.iter().map(|x| x.ln()).collect();
    let n = samples as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let declared_half_beta = 0.5 * kernel.declared_beta();
    Ok(FrequencyFit {
        p0: e.iter().map(|x| x * mc).collect(),
        nu,
        slope,
        declared_half_beta,
        within_band: (slope - declared_half_beta).abs() <= band,
    })
}

/// Polynomial space `ψ` in `x = P̄/scale`, `x⁰ = P⁰/scale`: the five collision
/// invariants `{1, x¹, x², x³, x⁰}`, then monomials of `x̄` of degree
/// `2..=degree`, then `x⁰` times monomials of degree `1..degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSpace {
    pub scale: f64,
    pub degree: usize,
    terms: Vec<([u8; 3], bool)>,
}

impl PolynomialSpace {
    pub fn new(scale: f64, degree: usize) -> Self {
        let mut terms = alloc::vec![
            ([0, 0, 0], false),
            ([1, 0, 0], false),
            ([0, 1, 0], false),
            ([0, 0, 1], false),
            ([0, 0, 0], true),
        ];
        let monomials = |d: usize| {
            let mut out = Vec::new();
            for a in (0..=d).rev() {
                for b in (0..=d - a).rev() {
                    out.push([a as u8, b as u8, (d - a - b) as u8]);
                }
            }
            out
        };
        for d in 2..=degree {
            terms.extend(monomials(d).into_iter().map(|m| (m, false)));
        }
        for d in 1..degree {
            terms.extend(monomials(d).into_iter().map(|m| (m, true)));
        }
        Self { scale, degree, terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Values of every `ψ` at `(P̄, P⁰)` into `out`.
    pub fn eval_into(&self, p: &[f64; 3], p0: f64, out: &mut [f64]) {
        let inv = 1.0 / self.scale;
        let x = [p[0] * inv, p[1] * inv, p[2] * inv];
        let x0 = p0 * inv;
        let mut pw = [[1.0; 8]; 3];
        for d in 0..3 {
            for e in 1..=self.degree.min(7) {
                pw[d][e] = pw[d][e - 1] * x[d];
            }
        }
        for (o, (m, has0)) in out.iter_mut().zip(&self.terms) {
            let v = pw[0][m[0] as usize] * pw[1][m[1] as usize] * pw[2][m[2] as usize];
            *o = if *has0 { v * x0 } else { v };
        }
    }
}

/// Assembly settings for [`LinearizedOperator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConfig {
    pub grid: GridSpec,
    pub sphere_polar: usize,
    pub sphere_azimuth: usize,
    pub basis_degree: usize,
    /// The grid ends where the background has dropped by `10^-cutoff_decades`.
    pub cutoff_decades: f64,
    pub max_nodes: usize,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::new(8, 6, 12),
            sphere_polar: 6,
            sphere_azimuth: 12,
            basis_degree: 3,
            cutoff_decades: 8.0,
            max_nodes: 4000,
        }
    }
}

/// The linearized collision operator
/// `𝓛h = -M^{-1/2} [Q(√M h, M) + Q(M, √M h)]`
/// restricted to `h ∈ span{√M e_l}`.
///
/// `e_l` are the polynomials of [`PolynomialSpace`] orthonormalized in
/// `Σ_i w_i M_i e_l e_m = δ_lm` on the momentum grid (so `√M e_l` are
/// orthonormal in `L²(dP̄)`); the first five span the collision invariants.
/// The matrix is assembled from the symmetric weak form
///
/// ```text
/// ⟨𝓛h_l, h_m⟩ = 1/4 ∫dP̄ ∫dQ̄ ∫dω v_ø σ M(P̄) M(Q̄) Δe_l Δe_m,
/// Δe = e(P̄) + e(Q̄) - e(P̄') - e(Q̄'),
/// ```
///
/// which is symmetric, positive semidefinite and annihilates the invariants
/// exactly because `Δ` vanishes for them collision by collision.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    pub background: MaxwellianParams,
    pub kernel: CollisionKernel,
    pub grid: MomentumGrid,
    pub sphere: SphereRule,
    pub space: PolynomialSpace,
    /// `e = ψ R⁻¹`.
    r_inv: DMatrix<f64>,
    /// `e_l(P̄_i)`, one row per node.
    basis: DMatrix<f64>,
    /// `M(P̄_i)`.
    pub m: Vec<f64>,
    /// Collision frequency at every node, against `J` at the background
    /// temperature.
    pub nu: Vec<f64>,
    /// Galerkin matrix `A_lm = ⟨𝓛 √M e_l, √M e_m⟩`, symmetrized.
    pub matrix: DMatrix<f64>,
    /// `‖A - Aᵀ‖_F / ‖A‖_F` of the matrix as assembled.
    pub symmetry_defect: f64,
}

/// Number of collision invariants.
pub const NULL_DIM: usize = 5;

/// Momentum scale for the polynomial space: the thermal momentum, at least
/// `m0 c`.
fn thermal_scale(background: &MaxwellianParams) -> f64 {
    let mc = background.constants.mc();
    mc * (1.0f64).max(1.0 / background.z)
}

impl LinearizedOperator {
    pub fn assemble(background: &MaxwellianParams, kernel: &CollisionKernel, config: &OperatorConfig) -> Result<Self> {
        let spec = config.grid;
        if spec.len() > config.max_nodes {
            return Err(Error::TooLarge {
                requested: spec.len(),
                limit: config.max_nodes,
            });
        }
        let cutoff = background.cutoff_radius_for(config.cutoff_decades);
        let grid = MomentumGrid::new(spec, cutoff, &background.constants)?;
        Self::assemble_on(background, kernel, grid, config)
    }

    /// Assembly on a caller-supplied momentum grid.
    pub fn assemble_on(
        background: &MaxwellianParams,
        kernel: &CollisionKernel,
        grid: MomentumGrid,
        config: &OperatorConfig,
    ) -> Result<Self> {
        if grid.len() > config.max_nodes {
            return Err(Error::TooLarge {
                requested: grid.len(),
                limit: config.max_nodes,
            });
        }
        let k = background.constants;
        let sphere = SphereRule::product(config.sphere_polar, config.sphere_azimuth);
        let space = PolynomialSpace::new(thermal_scale(background), config.basis_degree);
        let n = grid.len();
        let kd = space.len();
        let m: Vec<f64> = grid.sample(background);

        // ψ at nodes and its M-weighted orthonormalization.
        let mut psi = DMatrix::<f64>::zeros(n, kd);
        let mut row = alloc::vec![0.0; kd];
        for i in 0..n {
            space.eval_into(&grid.nodes[i], grid.p0[i], &mut row);
            for l in 0..kd {
                psi[(i, l)] = row[l];
            }
        }
        let sw: Vec<f64> = (0..n).map(|i| (grid.weights[i] * m[i]).sqrt()).collect();
        let (q, r) = weighted_mgs(&psi, &sw).map_err(|l| {
            Error::Degenerate(alloc::format!(
                "basis function {l} is numerically dependent on the grid {:?} with cutoff {:.3e}",
                grid.spec,
                grid.cutoff
            ))
        })?;
        let r_inv = r
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate(alloc::format!("singular Gram factor on grid {:?}", grid.spec)))?;
        let basis = q;

        let theta = k.theta_from_z(background.z);
        let nu: Vec<f64> = {
            // ν depends on |P̄| only.
            let per_shell = par::map(spec_radial(&grid), |ir| {
                collision_frequency(&[0.0, 0.0, grid.radii[ir]], kernel, theta, &k)
            });
            let per = grid.spec.n_polar * grid.spec.n_azimuth;
            (0..n).map(|i| per_shell[i / per]).collect()
        };

        let a_psi = assemble_weak_form(&grid, &m, &sphere, &space, kernel, &k);
        let raw = r_inv.transpose() * a_psi * &r_inv;
        let symmetry_defect = (&raw - raw.transpose()).norm() / raw.norm();
        let matrix = 0.5 * (&raw + raw.transpose());

        Ok(Self {
            background: *background,
            kernel: *kernel,
            grid,
            sphere,
            space,
            r_inv,
            basis,
            m,
            nu,
            matrix,
            symmetry_defect,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues of `A`, ascending (its singular values up to sign).
    pub fn spectrum(&self) -> Vec<f64> {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    /// Singular values, ascending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.matrix.clone().singular_values().iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    /// `e_l(P̄)` for all `l`.
    pub fn basis_at(&self, p: &[f64; 3]) -> Vec<f64> {
        let kd = self.space.len();
        let mut psi = alloc::vec![0.0; kd];
        self.space.eval_into(p, self.background.constants.p0(p), &mut psi);
        let mut e = alloc::vec![0.0; kd];
        for l in 0..kd {
            let mut s = 0.0;
            for j in 0..=l {
                s += psi[j] * self.r_inv[(j, l)];
            }
            e[l] = s;
        }
        e
    }

    /// `e_l` at grid node `i`.
    pub fn basis_at_node(&self, i: usize, l: usize) -> f64 {
        self.basis[(i, l)]
    }

    /// Coefficients `c_l = ⟨h, √M e_l⟩` of node samples `h`.
    pub fn coefficients(&self, h: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        (0..self.dim())
            .map(|l| {
                let terms: Vec<f64> = (0..n)
                    .map(|i| self.grid.weights[i] * h[i] * self.m[i].sqrt() * self.basis[(i, l)])
                    .collect();
                pairwise_sum(&terms)
            })
            .collect()
    }

    /// Node samples of `Σ c_l √M e_l`.
    pub fn synthesize(&self, c: &[f64]) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| {
                let s: f64 = (0..self.dim()).map(|l| c[l] * self.basis[(i, l)]).sum();
                self.m[i].sqrt() * s
            })
            .collect()
    }

    /// `𝓛h` for node samples `h`, through the Galerkin projection.
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let c = DVector::from_vec(self.coefficients(h));
        let y = &self.matrix * c;
        self.synthesize(y.as_slice())
    }

    /// Solves `A c = b` on the complement of the null space; the invariant
    /// components of `b` are ignored and those of `c` are zero.
    pub fn solve_perp(&self, b: &[f64]) -> Result<Vec<f64>> {
        let kd = self.dim();
        let m = kd - NULL_DIM;
        let a = self.matrix.view((NULL_DIM, NULL_DIM), (m, m)).into_owned();
        let rhs = DVector::from_iterator(m, b[NULL_DIM..].iter().copied());
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Discretization("operator is not positive definite off its null space".into()))?;
        let x = chol.solve(&rhs);
        let mut out = alloc::vec![0.0; kd];
        out[NULL_DIM..].copy_from_slice(x.as_slice());
        Ok(out)
    }

    /// `G_l = ⟨Q(F, F), e_l⟩` for `F = M Σ_m c_m e_m`, from the weak form
    /// `½ ∫∫∫ v_ø σ F(P̄) F(Q̄) [e_l(P̄') + e_l(Q̄') - e_l(P̄) - e_l(Q̄)]`
    /// on the operator's grid and sphere. Invariant components vanish
    /// identically.
    pub fn weak_quadratic(&self, c: &[f64]) -> Vec<f64> {
        let grid = &self.grid;
        let k = self.background.constants;
        let n = grid.len();
        let kd = self.dim();
        let f: Vec<f64> = (0..n)
            .map(|i| self.m[i] * (0..kd).map(|l| c[l] * self.basis[(i, l)]).sum::<f64>())
            .collect();
        let rows: Vec<Vec<f64>> = par::map(n, |i| {
            let p = &grid.nodes[i];
            let p0 = grid.p0[i];
            let mut acc = alloc::vec![0.0; kd];
            let mut psi_p = alloc::vec![0.0; kd];
            let mut psi_q = alloc::vec![0.0; kd];
            let mut a = alloc::vec![0.0; kd];
            let mut b = alloc::vec![0.0; kd];
            self.space.eval_into(p, p0, &mut psi_p);
            for j in i + 1..n {
                let q = &grid.nodes[j];
                let q0 = grid.p0[j];
                let kin = kinematics_with_energies(p, p0, q, q0, &k);
                if kin.rho == 0.0 {
                    continue;
                }
                let base = grid.weights[i] * grid.weights[j] * f[i] * f[j] * kin.v_moller * self.kernel.radial(kin.rho);
                if base == 0.0 {
                    continue;
                }
                self.space.eval_into(q, q0, &mut psi_q);
                for (om, wo) in self.sphere.directions.iter().zip(&self.sphere.weights) {
                    let post = post_with(p, p0, q, q0, &kin, om);
                    let ang = if self.kernel.needs_angle() {
                        self.kernel.angular(scattering_cosine(p, p0, q, q0, &post, kin.rho).0)
                    } else {
                        1.0
                    };
                    let w = base * wo * ang;
                    self.space.eval_into(&post.p, post.p0, &mut a);
                    self.space.eval_into(&post.q, post.q0, &mut b);
                    for l in 0..kd {
                        acc[l] += w * (a[l] + b[l] - psi_p[l] - psi_q[l]);
                    }
                }
            }
            acc
        });
        let mut total = DVector::<f64>::zeros(kd);
        for r in rows {
            for l in 0..kd {
                total[l] += r[l];
            }
        }
        let mut g: Vec<f64> = (self.r_inv.transpose() * total).iter().copied().collect();
        for v in g.iter_mut().take(NULL_DIM) {
            *v = 0.0;
        }
        g
    }

    /// `N_lm = Σ_i w_i ν_i M_i e_l e_m`.
    pub fn nu_gram(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        let kd = self.dim();
        let mut b = self.basis.clone();
        for i in 0..n {
            let s = (self.grid.weights[i] * self.nu[i] * self.m[i]).sqrt();
            for l in 0..kd {
                b[(i, l)] *= s;
            }
        }
        b.tr_mul(&b)
    }
}

fn spec_radial(grid: &MomentumGrid) -> usize {
    grid.spec.n_radial
}

/// Modified Gram-Schmidt (two passes) of the columns of `psi` in the inner
/// product `Σ_i sw_i² a_i b_i`. Returns node values of the orthonormal
/// functions and the triangular factor `R` with `psi = Q R`, or the index of
/// the first dependent column.
fn weighted_mgs(psi: &DMatrix<f64>, sw: &[f64]) -> core::result::Result<(DMatrix<f64>, DMatrix<f64>), usize> {
    let (n, kd) = psi.shape();
    let mut v = psi.clone();
    for i in 0..n {
        for l in 0..kd {
            v[(i, l)] *= sw[i];
        }
    }
    let mut r = DMatrix::<f64>::zeros(kd, kd);
    for l in 0..kd {
        let orig = v.column(l).norm();
        for _pass in 0..2 {
            for j in 0..l {
                let proj = v.column(j).dot(&v.column(l));
                r[(j, l)] += proj;
                let cj = v.column(j).clone_owned();
                let mut cl = v.column_mut(l);
                cl.axpy(-proj, &cj, 1.0);
            }
        }
        let norm = v.column(l).norm();
        if !(norm > 1e-10 * orig) {
            return Err(l);
        }
        r[(l, l)] = norm;
        v.column_mut(l).scale_mut(1.0 / norm);
    }
    for i in 0..n {
        let s = sw[i];
        for l in 0..kd {
            v[(i, l)] = if s > 0.0 { v[(i, l)] / s } else { 0.0 };
        }
    }
    Ok((v, r))
}

/// `Σ_{i<j} Σ_k 1/2 w_i w_j Ω_k v_ø σ M_i M_j Δψ Δψᵀ`, which equals the
/// quarter-weighted sum over all ordered pairs (`i = j` contributes nothing
/// since `ϱ = 0` there).
fn assemble_weak_form(
    grid: &MomentumGrid,
    m: &[f64],
    sphere: &SphereRule,
    space: &PolynomialSpace,
    kernel: &CollisionKernel,
    k: &PhysicalConstants,
) -> DMatrix<f64> {
    let n = grid.len();
    let kd = space.len();
    let rows: Vec<DMatrix<f64>> = par::map(n, |i| {
        let p = &grid.nodes[i];
        let p0 = grid.p0[i];
        let mut psi_p = alloc::vec![0.0; kd];
        space.eval_into(p, p0, &mut psi_p);
        let nrows = (n - i - 1) * sphere.len();
        let mut buf = Vec::with_capacity(nrows * kd);
        let mut a = alloc::vec![0.0; kd];
        let mut b = alloc::vec![0.0; kd];
        let mut psi_q = alloc::vec![0.0; kd];
        let mut used = 0;
        for j in i + 1..n {
            let q = &grid.nodes[j];
            let q0 = grid.p0[j];
            let kin = kinematics_with_energies(p, p0, q, q0, k);
            if kin.rho == 0.0 {
                continue;
            }
            let base = 0.5 * grid.weights[i] * grid.weights[j] * m[i] * m[j] * kin.v_moller * kernel.radial(kin.rho);
            if !(base > 0.0) {
                continue;
            }
            space.eval_into(q, q0, &mut psi_q);
            for (om, wo) in sphere.directions.iter().zip(&sphere.weights) {
                let post = post_with(p, p0, q, q0, &kin, om);
                let ang = if kernel.needs_angle() {
                    kernel.angular(scattering_cosine(p, p0, q, q0, &post, kin.rho).0)
                } else {
                    1.0
                };
                let w = (base * wo * ang).sqrt();
                if w == 0.0 {
                    continue;
                }
                space.eval_into(&post.p, post.p0, &mut a);
                space.eval_into(&post.q, post.q0, &mut b);
                for l in 0..kd {
                    buf.push(w * (psi_p[l] + psi_q[l] - a[l] - b[l]));
                }
                used += 1;
            }
        }
        if used == 0 {
            return DMatrix::zeros(kd, kd);
        }
        let d = DMatrix::from_row_slice(used, kd, &buf[..used * kd]);
        d.tr_mul(&d)
    });
    let mut total = DMatrix::<f64>::zeros(kd, kd);
    for r in rows {
        total += r;
    }
    total
}

/// Spectral summary of an assembled operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub singular_values: Vec<f64>,
    /// Singular values below `tol · σ_max`.
    pub nullity: usize,
    /// `σ_6 / σ_5` (sorted ascending).
    pub gap: f64,
    pub symmetry_defect: f64,
    pub min_eigenvalue: f64,
}

pub fn spectrum_report(op: &LinearizedOperator, tol: f64) -> SpectrumReport {
    let sv = op.singular_values();
    let smax = *sv.last().unwrap();
    let nullity = sv.iter().filter(|s| **s < tol * smax).count();
    let gap = if sv.len() > NULL_DIM { sv[NULL_DIM] / sv[NULL_DIM - 1].max(f64::MIN_POSITIVE) } else { 0.0 };
    SpectrumReport {
        nullity,
        gap,
        symmetry_defect: op.symmetry_defect,
        min_eigenvalue: op.spectrum()[0],
        singular_values: sv,
    }
}

/// `δ₀ = min ⟨𝓛h, h⟩ / ‖h‖²_ν` over `h` orthogonal to the null space, as the
/// smallest eigenvalue of `L⁻¹ A⊥ L⁻ᵀ` with `N⊥ = L Lᵀ`.
pub fn coercivity_delta0(op: &LinearizedOperator) -> Result<f64> {
    coercivity_delta0_with_gram(op, &op.nu_gram())
}

/// [`coercivity_delta0`] with a caller-supplied `ν`-Gram matrix.
pub fn coercivity_delta0_with_gram(op: &LinearizedOperator, nu_gram: &DMatrix<f64>) -> Result<f64> {
    let kd = op.dim();
    let m = kd - NULL_DIM;
    let a = op.matrix.view((NULL_DIM, NULL_DIM), (m, m)).into_owned();
    let nn = nu_gram.view((NULL_DIM, NULL_DIM), (m, m)).into_owned();
    let chol = nn
        .cholesky()
        .ok_or_else(|| Error::Discretization("ν-Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .try_inverse()
        .ok_or_else(|| Error::Discretization("ν-Gram factor is singular".into()))?;
    let c = &l_inv * a * l_inv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let eig = c.symmetric_eigen();
    let d0 = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(d0 > 0.0) {
        return Err(Error::Discretization(alloc::format!(
            "coercivity estimate is not positive ({d0:e})"
        )));
    }
    Ok(d0)
}

/// Orthogonal projection onto `span{√M, P̄√M, P⁰√M}` for node samples.
#[derive(Debug, Clone)]
pub struct NullProjector {
    /// Orthonormal (in the grid rule) node vectors.
    basis: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl NullProjector {
    pub fn new(background: &MaxwellianParams, grid: &MomentumGrid) -> Result<Self> {
        let n = grid.len();
        let scale = thermal_scale(background);
        let mut psi = DMatrix::<f64>::zeros(n, NULL_DIM);
        for i in 0..n {
            let sm = background.eval(&grid.nodes[i]).sqrt();
            let p = &grid.nodes[i];
            let v = [1.0, p[0] / scale, p[1] / scale, p[2] / scale, grid.p0[i] / scale];
            for l in 0..NULL_DIM {
                psi[(i, l)] = sm * v[l];
            }
        }
        let sw: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
        let (q, _) = weighted_mgs(&psi, &sw).map_err(|l| {
            Error::Degenerate(alloc::format!(
                "collision invariant {l} is numerically dependent on the grid {:?} with cutoff {:.3e}",
                grid.spec,
                grid.cutoff
            ))
        })?;
        Ok(Self {
            basis: (0..NULL_DIM).map(|l| q.column(l).iter().copied().collect()).collect(),
            weights: grid.weights.clone(),
        })
    }

    /// `(Ph, h - Ph)`.
    pub fn project(&self, h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = h.len();
        let mut ph = alloc::vec![0.0; n];
        for b in &self.basis {
            let terms: Vec<f64> = (0..n).map(|i| self.weights[i] * h[i] * b[i]).collect();
            let c = pairwise_sum(&terms);
            for i in 0..n {
                ph[i] += c * b[i];
            }
        }
        let perp = h.iter().zip(&ph).map(|(a, b)| a - b).collect();
        (ph, perp)
    }

    /// Grid inner products of `h` with the orthonormal invariants.
    pub fn components(&self, h: &[f64]) -> [f64; NULL_DIM] {
        let mut out = [0.0; NULL_DIM];
        for (o, b) in out.iter_mut().zip(&self.basis) {
            let terms: Vec<f64> = (0..h.len()).map(|i| self.weights[i] * h[i] * b[i]).collect();
            *o = pairwise_sum(&terms);
        }
        out
    }
}

/// `P h` and `h_perp` for node samples `h` on `grid`.
pub fn project_p(h: &[f64], background: &MaxwellianParams, grid: &MomentumGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(NullProjector::new(background, grid)?.project(h))
}

/// `Γ(h, f) = M^{-1/2} Q(√M h, √M f)` at every node of `grid`.
///
/// `h` and `f` are callables (or interpolants); the products with `√M` are
/// formed pointwise.
pub fn gamma_form<H: PhaseFn + ?Sized, F: PhaseFn + ?Sized>(
    h: &H,
    f: &F,
    background: &MaxwellianParams,
    grid: &MomentumGrid,
    kernel: &CollisionKernel,
    quad: &CollisionQuadrature,
) -> Vec<f64> {
    let sh = |p: &[f64; 3]| background.eval(p).sqrt() * h.eval(p);
    let sf = |p: &[f64; 3]| background.eval(p).sqrt() * f.eval(p);
    par::map(grid.len(), |i| {
        let p = &grid.nodes[i];
        let q = collision_q(&sh, &sf, p, kernel, quad, &background.constants);
        q.value() / background.eval(p).sqrt()
    })
}

/// Node samples on `grid` viewed as an interpolant.
pub fn field<'a>(grid: &'a MomentumGrid, values: &'a [f64]) -> Result<GridField<'a>> {
    GridField::new(grid, values)
}

/// `Σ_i w_i h_i²` and friends: the norms used with the linearized operator.
pub fn l2_norm(h: &[f64], grid: &MomentumGrid) -> f64 {
    let terms: Vec<f64> = h.iter().zip(&grid.weights).map(|(x, w)| w * x * x).collect();
    pairwise_sum(&terms).sqrt()
}

/// `sup_i (1 + |P̄_i|²)^{ℓ/2} |h_i|`.
pub fn weighted_sup_norm(h: &[f64], grid: &MomentumGrid, ell: f64) -> f64 {
    h.iter()
        .zip(&grid.nodes)
        .map(|(x, p)| (1.0 + dot(p, p)).powf(0.5 * ell) * x.abs())
        .fold(0.0, f64::max)
}

/// `ν` at every node of `grid` against `J` at temperature `theta_m`.
pub fn frequency_on_grid(grid: &MomentumGrid, kernel: &CollisionKernel, theta_m: f64, k: &PhysicalConstants) -> Vec<f64> {
    let per_shell = par::map(grid.spec.n_radial, |ir| {
        collision_frequency(&[0.0, 0.0, grid.radii[ir]], kernel, theta_m, k)
    });
    let per = grid.spec.n_polar * grid.spec.n_azimuth;
    (0..grid.len()).map(|i| per_shell[i / per]).collect()
}

/// `J` sampled on a grid.
pub fn sample_global(grid: &MomentumGrid, theta_m: f64, k: &PhysicalConstants) -> Vec<f64> {
    grid.nodes.iter().map(|p| global_maxwellian(p, theta_m, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxwellian::FourVelocity;

    const K: PhysicalConstants = PhysicalConstants::UNIT;

    #[test]
    fn head_on_pair() {
        let kin = kinematics(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], &K);
        assert!((kin.rho * kin.rho - 4.0).abs() < 1e-14);
        assert!((kin.s - 8.0).abs() < 1e-14);
        let cross = moller_cross_form(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], &K);
        assert!((kin.v_moller - cross).abs() < 1e-15);
    }

    #[test]
    fn identical_momenta() {
        let p = [0.3, -1.2, 0.5];
        let kin = kinematics(&p, &p, &K);
        assert_eq!(kin.rho, 0.0);
        assert_eq!(kin.v_moller, 0.0);
    }

    #[test]
    fn com_at_rest_limit() {
        let p = [0.4, 0.1, -0.3];
        let q = [-0.4, -0.1, 0.3];
        let om = [0.0, 0.6, 0.8];
        let post = post_collisional(&p, &q, &om, &K);
        assert!(post.com_at_rest);
        let kin = kinematics(&p, &q, &K);
        for d in 0..3 {
            assert!((post.p[d] - 0.5 * kin.rho * om[d]).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_collision() {
        let p = [0.7, 0.2, -0.1];
        let q = [-0.3, 0.5, 0.9];
        let om = identity_direction(&p, &q, &K);
        assert!((dot(&om, &om) - 1.0).abs() < 1e-14);
        let post = post_collisional(&p, &q, &om, &K);
        for d in 0..3 {
            assert!((post.p[d] - p[d]).abs() < 1e-14);
            assert!((post.q[d] - q[d]).abs() < 1e-14);
        }
    }

    #[test]
    fn kernel_presets_and_validation() {
        assert_eq!(CollisionKernel::hard().declared_beta(), 0.0);
        assert_eq!(CollisionKernel::soft().declared_beta(), -1.0);
        assert!(CollisionKernel::new(1.0, 0.0, 2.0, 0.0, AngularProfile::Isotropic).is_err());
        assert!(CollisionKernel::new(0.0, 1.0, 0.0, 3.0, AngularProfile::SinPower(-1.5)).is_err());
        assert!(CollisionKernel::new(0.0, 0.0, 0.0, 0.0, AngularProfile::Isotropic).is_err());
        let k = CollisionKernel::new(1.0, 0.0, 0.5, 0.0, AngularProfile::SinPower(1.0)).unwrap();
        assert!((k.angular_integral() - PI * PI).abs() < 1e-12);
        let k0 = CollisionKernel::new(1.0, 0.0, 0.5, 0.0, AngularProfile::SinPower(0.0)).unwrap();
        assert!((k0.angular_integral() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn maxwellian_annihilated_with_analytic_callables() {
        let m = MaxwellianParams::new(1.0, 1.0, FourVelocity::from_spatial([0.1, 0.0, 0.0], 1.0), K).unwrap();
        let quad = CollisionQuadrature::for_maxwellian(&m, GridSpec::new(12, 6, 12), 4, 8).unwrap();
        for p in [[0.0, 0.0, 0.0], [1.0, -0.5, 0.2]] {
            for kern in [CollisionKernel::hard(), CollisionKernel::soft()] {
                let q = collision_q(&m, &m, &p, &kern, &quad, &K);
                assert!(q.value().abs() < 1e-13 * q.loss, "{q:?}");
            }
        }
    }

    #[test]
    fn polynomial_space_size() {
        assert_eq!(PolynomialSpace::new(1.0, 3).len(), 30);
        assert_eq!(PolynomialSpace::new(1.0, 2).len(), 14);
    }

    #[test]
    fn small_operator_structure() {
        let m = MaxwellianParams::rest(1.0, 1.0, K).unwrap();
        let cfg = OperatorConfig {
            grid: GridSpec::new(6, 4, 8),
            sphere_polar: 4,
            sphere_azimuth: 8,
            basis_degree: 2,
            ..OperatorConfig::default()
        };
        let op = LinearizedOperator::assemble(&m, &CollisionKernel::hard(), &cfg).unwrap();
        let rep = spectrum_report(&op, 1e-6);
        assert_eq!(rep.nullity, NULL_DIM, "{:?}", rep.singular_values);
        assert!(rep.gap > 10.0);
        assert!(coercivity_delta0(&op).unwrap() > 0.0);
        // 𝓛 √M = 0
        let sm: Vec<f64> = op.m.iter().map(|x| x.sqrt()).collect();
        let out = op.apply(&sm);
        let norm = l2_norm(&out, &op.grid);
        assert!(norm < 1e-12 * op.matrix.norm() * l2_norm(&sm, &op.grid));
    }

    #[test]
    fn memory_guard() {
        let m = MaxwellianParams::rest(1.0, 1.0, K).unwrap();
        let cfg = OperatorConfig {
            grid: GridSpec::new(40, 20, 40),
            ..OperatorConfig::default()
        };
        assert!(matches!(
            LinearizedOperator::assemble(&m, &CollisionKernel::hard(), &cfg),
            Err(Error::TooLarge { .. })
        ));
    }
}
