//! Jüttner distributions, momentum moments and their macroscopic content.
//!
//! Metric signature is `(-,+,+,+)`; four-vectors are `[f64; 4]` with the time
//! component first.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::bessel;
use crate::eos;
use crate::grid::{GridSpec, MomentumGrid, PhaseFn};
use crate::{Error, PhysicalConstants, Result};

pub type Vec4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];

pub const METRIC: Vec4 = [-1.0, 1.0, 1.0, 1.0];

/// `g_{κλ} a^κ b^λ`.
pub fn minkowski_dot(a: &Vec4, b: &Vec4) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Future-directed four-velocity normalized to `u_κ u^κ = -c²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourVelocity(pub Vec4);

impl FourVelocity {
    pub fn rest(c: f64) -> Self {
        Self([c, 0.0, 0.0, 0.0])
    }

    /// From the spatial components; `u⁰ = sqrt(c² + |u|²)`.
    pub fn from_spatial(u: [f64; 3], c: f64) -> Self {
        let u0 = (c * c + u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        Self([u0, u[0], u[1], u[2]])
    }

    pub fn u0(&self) -> f64 {
        self.0[0]
    }

    pub fn spatial(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    pub fn spatial_norm(&self) -> f64 {
        let s = self.spatial();
        (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt()
    }

    /// `|u_κ u^κ + c²| / c²`.
    pub fn normalization_defect(&self, c: f64) -> f64 {
        (minkowski_dot(&self.0, &self.0) + c * c).abs() / (c * c)
    }
}

/// Proper Lorentz boost taking the rest frame to the frame in which a fluid
/// at rest moves with four-velocity `u`: `Λ (c,0,0,0) = u`.
pub fn boost_matrix(u: &FourVelocity, c: f64) -> Mat4 {
    let v = u.0;
    let mut m = [[0.0; 4]; 4];
    m[0][0] = v[0] / c;
    for i in 1..4 {
        m[0][i] = v[i] / c;
        m[i][0] = v[i] / c;
        for j in 1..4 {
            m[i][j] = if i == j { 1.0 } else { 0.0 } + v[i] * v[j] / (c * (v[0] + c));
        }
    }
    m
}

pub fn mat_vec(m: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [0.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i] += m[i][j] * v[j];
        }
    }
    out
}

/// `Λ T Λᵀ`.
pub fn transform_tensor(m: &Mat4, t: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    s += m[a][k] * m[b][l] * t[k][l];
                }
            }
            out[a][b] = s;
        }
    }
    out
}

/// Parameters of the Maxwellian
/// `M(P̄) = n z / (4π m0³ c³ K_2(z)) · exp(z u_κ P^κ / (m0 c²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellianParams {
    pub n: f64,
    pub z: f64,
    pub u: FourVelocity,
    pub constants: PhysicalConstants,
    /// `n z / (4π m0³ c³ e^z K_2(z))`; multiplies `exp(z (1 + u·P/(m0 c²)))`.
    scaled_prefactor: f64,
}

impl MaxwellianParams {
    pub fn new(n: f64, z: f64, u: FourVelocity, constants: PhysicalConstants) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Domain { what: "n", value: n });
        }
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Domain { what: "z", value: z });
        }
        if !(u.u0() > 0.0) || u.normalization_defect(constants.c) > 1e-12 {
            return Err(Error::Validation(alloc::format!(
                "four-velocity {:?} is not future-directed and normalized",
                u.0
            )));
        }
        let mc = constants.mc();
        let k2s = bessel::k_j_scaled(2, z)?;
        let scaled_prefactor = n * z / (4.0 * PI * mc * mc * mc * k2s);
        Ok(Self {
            n,
            z,
            u,
            constants,
            scaled_prefactor,
        })
    }

    pub fn rest(n: f64, z: f64, constants: PhysicalConstants) -> Result<Self> {
        Self::new(n, z, FourVelocity::rest(constants.c), constants)
    }

    /// `n z / (4π m0³ c³ K_2(z))`; may overflow for very large `z`.
    pub fn prefactor(&self) -> f64 {
        self.scaled_prefactor * self.z.exp()
    }

    /// `u_κ P^κ / (m0 c²)` for the on-shell momentum `p`.
    pub fn contraction(&self, p: &[f64; 3]) -> f64 {
        let k = &self.constants;
        let u = &self.u.0;
        (-u[0] * k.p0(p) + u[1] * p[0] + u[2] * p[1] + u[3] * p[2]) / k.rest_energy()
    }

    pub fn eval(&self, p: &[f64; 3]) -> f64 {
        self.scaled_prefactor * (self.z * (1.0 + self.contraction(p))).exp()
    }

    /// `ln M(P̄)`.
    pub fn ln_eval(&self, p: &[f64; 3]) -> f64 {
        self.scaled_prefactor.ln() + self.z * (1.0 + self.contraction(p))
    }

    pub fn thermo(&self) -> Result<eos::ThermoPoint> {
        eos::thermo_from_nz(self.n, self.z, &self.constants)
    }

    /// Closed-form moments: `I = n u`, `T = (ρ+p) u u / c² + p g`, `S = n η u`.
    pub fn closed_form_moments(&self) -> Result<MomentSet> {
        let t = self.thermo()?;
        let c = self.constants.c;
        let u = &self.u.0;
        let mut ms = MomentSet::default();
        for a in 0..4 {
            ms.i[a] = self.n * u[a];
            ms.s[a] = self.n * t.eta * u[a];
            for b in 0..4 {
                let g = if a == b { METRIC[a] } else { 0.0 };
                ms.t[a][b] = (t.rho + t.p) * u[a] * u[b] / (c * c) + t.p * g;
            }
        }
        Ok(ms)
    }

    /// Radius beyond which `M` is below `1e-16` of its peak, in the
    /// direction of `u` (the slowest decay).
    pub fn cutoff_radius(&self) -> f64 {
        self.cutoff_radius_for(16.0)
    }

    /// Radius where `M` has dropped by `10^-decades` from its peak along `u`.
    pub fn cutoff_radius_for(&self, decades: f64) -> f64 {
        let k = &self.constants;
        let c = k.c;
        let (u0, un) = (self.u.u0() / c, self.u.spatial_norm() / c);
        let target = decades * 10f64.ln();
        let f = |x: f64| self.z * (u0 * (1.0 + x * x).sqrt() - un * x - 1.0) - target;
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(m) < 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        hi * k.mc()
    }

    /// Grid sized for this Maxwellian.
    pub fn grid(&self, spec: GridSpec) -> Result<MomentumGrid> {
        MomentumGrid::new(spec, self.cutoff_radius(), &self.constants)
    }
}

impl PhaseFn for MaxwellianParams {
    fn eval(&self, p: &[f64; 3]) -> f64 {
        MaxwellianParams::eval(self, p)
    }
}

/// `J(P̄) = exp(-c P⁰ / (k_B θ_M))`.
pub fn global_maxwellian(p: &[f64; 3], theta_m: f64, k: &PhysicalConstants) -> f64 {
    (-k.c * k.p0(p) / (k.k_b * theta_m)).exp()
}

/// Particle current, energy-momentum tensor and entropy four-flow.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentSet {
    pub i: Vec4,
    pub t: Mat4,
    pub s: Vec4,
    /// Outermost-shell share of `I⁰` and `T⁰⁰`, a truncation estimate.
    pub truncation: f64,
}

/// Largest relative discrepancy between two moment sets, per component
/// scaled by the largest entry of the same object.
pub fn moment_discrepancy(a: &MomentSet, b: &MomentSet) -> (f64, f64, f64) {
    let scale_i = b.i.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale_t = b.t.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale_s = b.s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let di = (0..4).map(|k| (a.i[k] - b.i[k]).abs()).fold(0.0, f64::max) / scale_i;
    let dt = (0..16).map(|k| (a.t[k / 4][k % 4] - b.t[k / 4][k % 4]).abs()).fold(0.0, f64::max) / scale_t;
    let ds = (0..4).map(|k| (a.s[k] - b.s[k]).abs()).fold(0.0, f64::max) / scale_s;
    (di, dt, ds)
}

/// Relative threshold below which negative samples count as rounding.
const NEGATIVE_TOL: f64 = 1e-12;

/// Moments of node samples `f`:
/// `I^μ = c Σ w P^μ F / P⁰`, `T^{μν} = c Σ w P^μ P^ν F / P⁰`,
/// `S^μ = -k_B c Σ w P^μ F (ln(h³F) - 1) / P⁰`.
pub fn moments(f: &[f64], grid: &MomentumGrid, k: &PhysicalConstants) -> Result<MomentSet> {
    if f.len() != grid.len() {
        return Err(Error::Validation(alloc::format!(
            "field has {} samples but the grid has {} nodes",
            f.len(),
            grid.len()
        )));
    }
    let fmax = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some((i, v)) = f.iter().enumerate().find(|(_, v)| **v < -NEGATIVE_TOL * fmax) {
        return Err(Error::Validation(alloc::format!(
            "distribution is negative ({v:e}) at node {i}"
        )));
    }
    let h3 = k.h * k.h * k.h;
    // 4 + 10 + 4 accumulated components.
    let per_node = |idx: usize| -> [f64; 18] {
        let mut out = [0.0; 18];
        let fi = f[idx];
        if fi <= 0.0 {
            return out;
        }
        let p = &grid.nodes[idx];
        let pv = [grid.p0[idx], p[0], p[1], p[2]];
        let base = k.c * grid.weights[idx] * fi / pv[0];
        let mut n = 0;
        for a in 0..4 {
            out[n] = base * pv[a];
            n += 1;
        }
        for a in 0..4 {
            for b in a..4 {
                out[n] = base * pv[a] * pv[b];
                n += 1;
            }
        }
        let ent = -k.k_b * base * ((h3 * fi).ln() - 1.0);
        for a in 0..4 {
            out[n] = ent * pv[a];
            n += 1;
        }
        out
    };
    let sum = sum_components(0, grid.len(), &per_node);
    let outer = sum_components(grid.outer_shell_start, grid.len(), &per_node);

    let mut ms = MomentSet::default();
    ms.i.copy_from_slice(&sum[0..4]);
    let mut n = 4;
    for a in 0..4 {
        for b in a..4 {
            ms.t[a][b] = sum[n];
            ms.t[b][a] = sum[n];
            n += 1;
        }
    }
    ms.s.copy_from_slice(&sum[14..18]);
    let share = |o: f64, t: f64| if t == 0.0 { 0.0 } else { (o / t).abs() };
    ms.truncation = share(outer[0], sum[0]).max(share(outer[4], sum[4]));
    Ok(ms)
}

fn sum_components<F: Fn(usize) -> [f64; 18]>(lo: usize, hi: usize, f: &F) -> [f64; 18] {
    if hi - lo <= 32 {
        let mut acc = [0.0; 18];
        for i in lo..hi {
            let v = f(i);
            for c in 0..18 {
                acc[c] += v[c];
            }
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    let a = sum_components(lo, mid, f);
    let b = sum_components(mid, hi, f);
    let mut out = a;
    for c in 0..18 {
        out[c] += b[c];
    }
    out
}

/// Fluid variables recovered from a moment set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Macroscopic {
    pub n: f64,
    pub u: FourVelocity,
    pub rho: f64,
    pub p: f64,
    pub eta: f64,
    /// `v^{μν} = Π^μ_κ Π^ν_λ T^{κλ} - p Π^{μν}`.
    pub viscous: Mat4,
}

/// `n = sqrt(-I·I)/c`, `u = I/n`, `ρ = u_κ u_λ T^{κλ}/c²`,
/// `p = Π_{κλ} T^{κλ}/3`, `η = -u_κ S^κ/(c² n)`.
pub fn macroscopic_decompose(ms: &MomentSet, k: &PhysicalConstants) -> Result<Macroscopic> {
    let c = k.c;
    let ii = minkowski_dot(&ms.i, &ms.i);
    if !(ii < 0.0 && ms.i[0] > 0.0) {
        return Err(Error::Decomposition(alloc::format!(
            "particle current {:?} is not timelike and future-directed",
            ms.i
        )));
    }
    let n = (-ii).sqrt() / c;
    let u = [ms.i[0] / n, ms.i[1] / n, ms.i[2] / n, ms.i[3] / n];
    let ul = [-u[0], u[1], u[2], u[3]];
    // Π^μ_ν = δ^μ_ν + u^μ u_ν / c²
    let mut pi_mixed = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            pi_mixed[a][b] = if a == b { 1.0 } else { 0.0 } + u[a] * ul[b] / (c * c);
        }
    }
    let mut rho = 0.0;
    let mut trace = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            rho += ul[a] * ul[b] * ms.t[a][b];
            let pi_low = ul[a] * ul[b] / (c * c) + if a == b { METRIC[a] } else { 0.0 };
            trace += pi_low * ms.t[a][b];
        }
    }
    rho /= c * c;
    let p = trace / 3.0;
    let us: f64 = (0..4).map(|a| ul[a] * ms.s[a]).sum();
    let eta = -us / (c * c * n);
    let mut viscous = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let mut s = 0.0;
            for kk in 0..4 {
                for l in 0..4 {
                    s += pi_mixed[a][kk] * pi_mixed[b][l] * ms.t[kk][l];
                }
            }
            let pi_up = u[a] * u[b] / (c * c) + if a == b { METRIC[a] } else { 0.0 };
            viscous[a][b] = s - p * pi_up;
        }
    }
    Ok(Macroscopic {
        n,
        u: FourVelocity(u),
        rho,
        p,
        eta,
        viscous,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    /// Both inequalities hold at every node with the supplied `C`.
    pub holds: bool,
    /// Smallest `C >= 1` for which both hold on the grid.
    pub minimal_c: f64,
    /// Node with the largest `J/M`.
    pub worst_lower_node: usize,
    /// Node with the largest `M/J^α`.
    pub worst_upper_node: usize,
    /// Whether the exponents allow the inequalities as `|P̄| → ∞`
    /// (beyond any finite grid).
    pub asymptotically_feasible: bool,
}

/// Checks `J/C <= M <= C J^α` on the grid.
pub fn envelope_check(
    params: &MaxwellianParams,
    theta_m: f64,
    alpha: f64,
    c_env: f64,
    grid: &MomentumGrid,
) -> Result<EnvelopeReport> {
    if !(alpha > 0.5 && alpha <= 1.0) {
        return Err(Error::Domain {
            what: "envelope exponent alpha",
            value: alpha,
        });
    }
    if !(c_env >= 1.0) {
        return Err(Error::Domain {
            what: "envelope constant C",
            value: c_env,
        });
    }
    if !(theta_m > 0.0) {
        return Err(Error::Domain {
            what: "theta_M",
            value: theta_m,
        });
    }
    let k = &params.constants;
    let mut minimal_c = 1.0f64;
    let (mut worst_lower, mut wl) = (0, f64::NEG_INFINITY);
    let (mut worst_upper, mut wu) = (0, f64::NEG_INFINITY);
    for (i, p) in grid.nodes.iter().enumerate() {
        // Work with logarithms; the ratios span hundreds of decades.
        let ln_m = params.ln_eval(p);
        let ln_j = -k.c * k.p0(p) / (k.k_b * theta_m);
        let lower = ln_j - ln_m;
        let upper = ln_m - alpha * ln_j;
        if lower > wl {
            wl = lower;
            worst_lower = i;
        }
        if upper > wu {
            wu = upper;
            worst_upper = i;
        }
    }
    minimal_c = minimal_c.max(wl.exp()).max(wu.exp());
    let c = k.c;
    let zr = params.z / k.rest_energy();
    let (u0, un) = (params.u.u0(), params.u.spatial_norm());
    let slope_j = c / (k.k_b * theta_m);
    let lower_ok = slope_j >= zr * (u0 + un) * (1.0 - 1e-12);
    let upper_ok = alpha * slope_j <= zr * (u0 - un) * (1.0 + 1e-12);
    Ok(EnvelopeReport {
        holds: minimal_c <= c_env,
        minimal_c,
        worst_lower_node: worst_lower,
        worst_upper_node: worst_upper,
        asymptotically_feasible: lower_ok && upper_ok,
    })
}

/// Samples a Maxwellian on a grid.
pub fn sample_maxwellian(params: &MaxwellianParams, grid: &MomentumGrid) -> Vec<f64> {
    grid.sample(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: PhysicalConstants = PhysicalConstants::UNIT;

    #[test]
    fn rest_frame_values() {
        let m = MaxwellianParams::rest(1.0, 1.0, K).unwrap();
        let k2 = bessel::k_j(2, 1.0).unwrap();
        let expect = (-1.0f64).exp() / (4.0 * PI * k2);
        assert!((m.eval(&[0.0; 3]) - expect).abs() < 1e-15 * expect);
        let p = [0.3, -0.4, 1.2];
        let e = m.eval(&p);
        let direct = 1.0 / (4.0 * PI * k2) * (-K.p0(&p)).exp();
        assert!((e - direct).abs() < 1e-14 * direct);
    }

    #[test]
    fn global_maxwellian_at_rest() {
        assert!((global_maxwellian(&[0.0; 3], 1.0, &K) - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn boost_is_lorentz_and_maps_rest_velocity() {
        let u = FourVelocity::from_spatial([0.1, -0.2, 0.05], 1.0);
        let l = boost_matrix(&u, 1.0);
        let moved = mat_vec(&l, &[1.0, 0.0, 0.0, 0.0]);
        for a in 0..4 {
            assert!((moved[a] - u.0[a]).abs() < 1e-15);
        }
        // Λᵀ g Λ = g
        for a in 0..4 {
            for b in 0..4 {
                let s: f64 = (0..4).map(|k| l[k][a] * METRIC[k] * l[k][b]).sum();
                let g = if a == b { METRIC[a] } else { 0.0 };
                assert!((s - g).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn boosted_maxwellian_is_scalar() {
        let u = FourVelocity::from_spatial([0.1, 0.0, 0.0], 1.0);
        let boosted = MaxwellianParams::new(1.0, 1.0, u, K).unwrap();
        let rest = MaxwellianParams::rest(1.0, 1.0, K).unwrap();
        let l = boost_matrix(&u, 1.0);
        let q = [0.4, 0.2, -0.7];
        let qv = [K.p0(&q), q[0], q[1], q[2]];
        let pv = mat_vec(&l, &qv);
        let a = boosted.eval(&[pv[1], pv[2], pv[3]]);
        let b = rest.eval(&q);
        assert!((a - b).abs() < 1e-14 * b);
    }

    #[test]
    fn zero_field_has_zero_moments() {
        let g = MomentumGrid::new(GridSpec::new(8, 4, 8), 10.0, &K).unwrap();
        let ms = moments(&alloc::vec![0.0; g.len()], &g, &K).unwrap();
        assert_eq!(ms, MomentSet::default());
    }

    #[test]
    fn negative_field_rejected() {
        let g = MomentumGrid::new(GridSpec::new(8, 4, 8), 10.0, &K).unwrap();
        let mut f = alloc::vec![1.0; g.len()];
        f[7] = -0.5;
        assert!(matches!(moments(&f, &g, &K), Err(Error::Validation(_))));
    }

    #[test]
    fn rest_moments_match_closed_forms() {
        let m = MaxwellianParams::rest(2.0, 1.0, K).unwrap();
        let g = m.grid(GridSpec::DEFAULT).unwrap();
        let ms = moments(&g.sample(&m), &g, &K).unwrap();
        let (di, dt, ds) = moment_discrepancy(&ms, &m.closed_form_moments().unwrap());
        assert!(di < 1e-10 && dt < 1e-10 && ds < 1e-10, "{di} {dt} {ds}");
        let mac = macroscopic_decompose(&ms, &K).unwrap();
        assert!((mac.n - 2.0).abs() < 1e-10);
        let eta = eos::entropy_map(2.0, 1.0, &K).unwrap();
        assert!((mac.eta - eta).abs() < 1e-9 * eta.abs().max(1.0));
        assert!(ms.truncation < 1e-10, "{}", ms.truncation);
    }

    #[test]
    fn viscous_tensor_vanishes_for_equilibrium() {
        let u = FourVelocity::from_spatial([0.1, 0.05, 0.0], 1.0);
        let m = MaxwellianParams::new(1.0, 2.0, u, K).unwrap();
        let g = m.grid(GridSpec::DEFAULT).unwrap();
        let ms = moments(&g.sample(&m), &g, &K).unwrap();
        let mac = macroscopic_decompose(&ms, &K).unwrap();
        let vmax = mac.viscous.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(vmax < 1e-9 * mac.p, "{vmax}");
        for a in 0..4 {
            assert!((mac.u.0[a] - u.0[a]).abs() < 1e-9);
        }
    }

    #[test]
    fn spacelike_current_rejected() {
        let ms = MomentSet {
            i: [1.0, 2.0, 0.0, 0.0],
            ..MomentSet::default()
        };
        assert!(matches!(macroscopic_decompose(&ms, &K), Err(Error::Decomposition(_))));
    }

    #[test]
    fn envelope_examples() {
        let m = MaxwellianParams::rest(1.0, 1.0, K).unwrap();
        let g = m.grid(GridSpec::new(32, 6, 12)).unwrap();
        // θ_M = θ, prefactor adjusted to one: M = J.
        let n1 = 4.0 * PI * bessel::k_j(2, 1.0).unwrap();
        let equal = MaxwellianParams::rest(n1, 1.0, K).unwrap();
        let r = envelope_check(&equal, 1.0, 0.9, 1.0, &g).unwrap();
        assert!((r.minimal_c - 1.0).abs() < 1e-12 || r.minimal_c < 1.0 + 1e-12);
        assert!(r.asymptotically_feasible);

        let u = FourVelocity::from_spatial([0.1, 0.0, 0.0], 1.0);
        let boosted = MaxwellianParams::new(1.0, 1.0, u, K).unwrap();
        let r = envelope_check(&boosted, 1.0, 1.0, 1e6, &g).unwrap();
        assert!(!r.asymptotically_feasible);
    }
}
