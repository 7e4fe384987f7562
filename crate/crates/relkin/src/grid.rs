//! Spherical product grids in momentum space and interpolation on them.
//!
//! Nodes are `P = r (sinθ cosφ, sinθ sinφ, cosθ)` with
//!
//! * `r = L t/(1-t)`, `t` Gauss-Legendre on `[0, R/(R+L)]` so the outermost
//!   radius stays below the cutoff `R`;
//! * `cosθ` Gauss-Legendre, stored with `θ` ascending;
//! * `φ_a = 2πa/n_az` uniform, `n_az` even so the antipodal map sends nodes
//!   to nodes.
//!
//! Weights integrate `∫ f dP̄`; the `1/P⁰` of the invariant measure is applied
//! by callers.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::quadrature::{gauss_legendre, gauss_legendre_on};
use crate::{Error, PhysicalConstants, Result};

/// Something that can be evaluated at an arbitrary momentum.
pub trait PhaseFn: Sync {
    fn eval(&self, p: &[f64; 3]) -> f64;
}

impl<F: Fn(&[f64; 3]) -> f64 + Sync> PhaseFn for F {
    fn eval(&self, p: &[f64; 3]) -> f64 {
        self(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_radial: usize,
    pub n_polar: usize,
    pub n_azimuth: usize,
}

impl GridSpec {
    /// 64 radial × 8 polar × 16 azimuthal nodes.
    pub const DEFAULT: Self = Self {
        n_radial: 64,
        n_polar: 8,
        n_azimuth: 16,
    };

    pub fn new(n_radial: usize, n_polar: usize, n_azimuth: usize) -> Self {
        Self {
            n_radial,
            n_polar,
            n_azimuth,
        }
    }

    pub fn len(&self) -> usize {
        self.n_radial * self.n_polar * self.n_azimuth
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Each count multiplied by `factor` and rounded; the azimuthal count is
    /// kept even.
    pub fn refined(&self, factor: f64) -> Self {
        let scale = |n: usize| ((n as f64 * factor).round() as usize).max(1);
        let mut az = scale(self.n_azimuth);
        if az % 2 == 1 {
            az += 1;
        }
        Self {
            n_radial: scale(self.n_radial),
            n_polar: scale(self.n_polar),
            n_azimuth: az,
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    pub spec: GridSpec,
    pub cutoff: f64,
    /// Radial scale `L` of the algebraic map.
    pub scale: f64,
    pub radii: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub nodes: Vec<[f64; 3]>,
    /// Mass-shell energies `P⁰`.
    pub p0: Vec<f64>,
    pub weights: Vec<f64>,
    /// Index of the first node of the outermost radial shell.
    pub outer_shell_start: usize,
}

impl MomentumGrid {
    /// Grid with cutoff radius `cutoff` and radial scale `cutoff/4`.
    pub fn new(spec: GridSpec, cutoff: f64, k: &PhysicalConstants) -> Result<Self> {
        if spec.n_radial < 4 || spec.n_polar < 4 || spec.n_azimuth < 4 || spec.n_azimuth % 2 == 1 {
            return Err(Error::Validation(alloc::format!(
                "grid needs at least 4 nodes per direction and an even azimuthal count, got {spec:?}"
            )));
        }
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::Domain {
                what: "grid cutoff",
                value: cutoff,
            });
        }
        let scale = 0.25 * cutoff;
        let t_max = cutoff / (cutoff + scale);
        let (t, wt) = gauss_legendre_on(0.0, t_max, spec.n_radial);
        let mut radii = Vec::with_capacity(spec.n_radial);
        let mut wr = Vec::with_capacity(spec.n_radial);
        for (ti, wi) in t.iter().zip(&wt) {
            let r = scale * ti / (1.0 - ti);
            radii.push(r);
            wr.push(wi * scale / ((1.0 - ti) * (1.0 - ti)) * r * r);
        }
        let (mu, wmu) = gauss_legendre(spec.n_polar);
        // θ ascending means cosθ descending.
        let theta: Vec<f64> = mu.iter().rev().map(|m| m.acos()).collect();
        let wtheta: Vec<f64> = wmu.iter().rev().copied().collect();
        let dphi = 2.0 * PI / spec.n_azimuth as f64;
        let phi: Vec<f64> = (0..spec.n_azimuth).map(|a| a as f64 * dphi).collect();

        let n = spec.len();
        let mut nodes = Vec::with_capacity(n);
        let mut p0 = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (r, w_r) in radii.iter().zip(&wr) {
            for (th, w_t) in theta.iter().zip(&wtheta) {
                let (st, ct) = (th.sin(), th.cos());
                for ph in &phi {
                    let p = [r * st * ph.cos(), r * st * ph.sin(), r * ct];
                    p0.push(k.p0(&p));
                    nodes.push(p);
                    weights.push(w_r * w_t * dphi);
                }
            }
        }
        Ok(Self {
            spec,
            cutoff,
            scale,
            radii,
            theta,
            phi,
            nodes,
            p0,
            weights,
            outer_shell_start: (spec.n_radial - 1) * spec.n_polar * spec.n_azimuth,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index(&self, ir: usize, it: usize, ia: usize) -> usize {
        (ir * self.spec.n_polar + it) * self.spec.n_azimuth + ia
    }

    /// Samples `f` at every node.
    pub fn sample<F: PhaseFn + ?Sized>(&self, f: &F) -> Vec<f64> {
        crate::par::map(self.len(), |i| f.eval(&self.nodes[i]))
    }

    /// `∫ f dP̄` by the grid rule.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        crate::quadrature::pairwise_sum(&values.iter().zip(&self.weights).map(|(v, w)| v * w).collect::<Vec<_>>())
    }
}

/// Node samples on a grid with off-grid evaluation by tricubic Lagrange
/// interpolation in `(r, θ, φ)`.
///
/// Stencils crossing the origin or a pole continue through ghost nodes
/// (`r < 0` is the antipodal direction; `θ` past a pole is the meridian at
/// `φ + π`), so the interpolant is fourth-order accurate everywhere inside
/// the cutoff. Outside the cutoff it is zero.
#[derive(Debug, Clone, Copy)]
pub struct GridField<'a> {
    pub grid: &'a MomentumGrid,
    pub values: &'a [f64],
}

fn lagrange4(x: f64, xs: [f64; 4]) -> [f64; 4] {
    let mut w = [1.0; 4];
    for k in 0..4 {
        for m in 0..4 {
            if m != k {
                w[k] *= (x - xs[m]) / (xs[k] - xs[m]);
            }
        }
    }
    w
}

fn radial_coord(g: &MomentumGrid, k: isize) -> f64 {
    if k >= 0 {
        g.radii[k as usize]
    } else {
        -g.radii[(-k - 1) as usize]
    }
}

fn polar_coord(g: &MomentumGrid, k: isize) -> f64 {
    let m = g.spec.n_polar as isize;
    if k < 0 {
        -g.theta[(-k - 1) as usize]
    } else if k >= m {
        2.0 * PI - g.theta[(2 * m - 1 - k) as usize]
    } else {
        g.theta[k as usize]
    }
}

/// Node value at a virtual `(radial, polar, azimuthal)` index.
fn ghost_value(g: &MomentumGrid, values: &[f64], kr: isize, kt: isize, a: usize) -> f64 {
    let spec = &g.spec;
    let (m, naz) = (spec.n_polar as isize, spec.n_azimuth);
    let half = naz / 2;
    let mut a = a;
    let mut it = kt;
    if kt < 0 {
        it = -kt - 1;
        a += half;
    } else if kt >= m {
        it = 2 * m - 1 - kt;
        a += half;
    }
    let mut ir = kr;
    if kr < 0 {
        ir = -kr - 1;
        it = m - 1 - it;
        a += half;
    }
    values[g.index(ir as usize, it as usize, a % naz)]
}

/// Tricubic interpolant of node `values`; `None` beyond the cutoff.
fn tricubic(g: &MomentumGrid, values: &[f64], p: &[f64; 3]) -> Option<f64> {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if r >= g.cutoff {
        return None;
    }
    let (theta, phi) = if r == 0.0 {
        (0.0, 0.0)
    } else {
        let th = (p[2] / r).clamp(-1.0, 1.0).acos();
        let mut ph = p[1].atan2(p[0]);
        if ph < 0.0 {
            ph += 2.0 * PI;
        }
        (th, ph)
    };

    let nr = g.spec.n_radial as isize;
    let i = g.radii.partition_point(|&x| x <= r) as isize - 1;
    let r0 = (i - 1).clamp(-2, nr - 4);
    let wr = lagrange4(
        r,
        [
            radial_coord(g, r0),
            radial_coord(g, r0 + 1),
            radial_coord(g, r0 + 2),
            radial_coord(g, r0 + 3),
        ],
    );

    let j = g.theta.partition_point(|&x| x <= theta) as isize - 1;
    let t0 = j - 1;
    let wt = lagrange4(
        theta,
        [
            polar_coord(g, t0),
            polar_coord(g, t0 + 1),
            polar_coord(g, t0 + 2),
            polar_coord(g, t0 + 3),
        ],
    );

    let naz = g.spec.n_azimuth;
    let x = phi / (2.0 * PI / naz as f64);
    let a = (x.floor() as usize).min(naz - 1);
    let s = x - a as f64;
    let wa = lagrange4(s, [-1.0, 0.0, 1.0, 2.0]);
    let a0 = a + naz - 1;

    let mut acc = 0.0;
    for (dr, wrk) in wr.iter().enumerate() {
        let mut acc_t = 0.0;
        for (dt, wtk) in wt.iter().enumerate() {
            let mut acc_a = 0.0;
            for (da, wak) in wa.iter().enumerate() {
                acc_a += wak * ghost_value(g, values, r0 + dr as isize, t0 + dt as isize, a0 + da);
            }
            acc_t += wtk * acc_a;
        }
        acc += wrk * acc_t;
    }
    Some(acc)
}

fn check_len(grid: &MomentumGrid, n: usize) -> Result<()> {
    if n != grid.len() {
        return Err(Error::Validation(alloc::format!(
            "field has {} samples but the grid has {} nodes",
            n,
            grid.len()
        )));
    }
    Ok(())
}

impl<'a> GridField<'a> {
    pub fn new(grid: &'a MomentumGrid, values: &'a [f64]) -> Result<Self> {
        check_len(grid, values.len())?;
        Ok(Self { grid, values })
    }

    pub fn interpolate(&self, p: &[f64; 3]) -> f64 {
        tricubic(self.grid, self.values, p).unwrap_or(0.0)
    }
}

/// Strictly positive node samples interpolated in `ln F`.
///
/// Distributions close to a Maxwellian have a logarithm that is a smooth,
/// slowly varying function of momentum, so this is far more accurate than
/// interpolating `F` itself on the same grid, and the interpolant stays
/// positive.
#[derive(Debug, Clone)]
pub struct LogGridField<'a> {
    pub grid: &'a MomentumGrid,
    log_values: Vec<f64>,
}

impl<'a> LogGridField<'a> {
    pub fn new(grid: &'a MomentumGrid, values: &[f64]) -> Result<Self> {
        check_len(grid, values.len())?;
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Validation(alloc::format!(
                "log interpolation needs positive samples, node {i} holds {v:e}"
            )));
        }
        Ok(Self {
            grid,
            log_values: values.iter().map(|v| v.ln()).collect(),
        })
    }

    pub fn interpolate(&self, p: &[f64; 3]) -> f64 {
        tricubic(self.grid, &self.log_values, p).map_or(0.0, |l| l.exp())
    }
}

impl PhaseFn for LogGridField<'_> {
    fn eval(&self, p: &[f64; 3]) -> f64 {
        self.interpolate(p)
    }
}

impl PhaseFn for GridField<'_> {
    fn eval(&self, p: &[f64; 3]) -> f64 {
        self.interpolate(p)
    }
}

/// Field stored alongside its grid, for callers that need ownership.
#[derive(Debug, Clone)]
pub struct OwnedField {
    pub grid: MomentumGrid,
    pub values: Vec<f64>,
}

impl OwnedField {
    pub fn view(&self) -> GridField<'_> {
        GridField {
            grid: &self.grid,
            values: &self.values,
        }
    }
}

impl PhaseFn for OwnedField {
    fn eval(&self, p: &[f64; 3]) -> f64 {
        self.view().interpolate(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: PhysicalConstants = PhysicalConstants::UNIT;

    #[test]
    fn nodes_are_on_mass_shell_and_weights_positive() {
        let g = MomentumGrid::new(GridSpec::new(8, 4, 8), 10.0, &K).unwrap();
        for (p, e) in g.nodes.iter().zip(&g.p0) {
            let m = e * e - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            assert!((m - 1.0).abs() < 1e-12);
        }
        assert!(g.weights.iter().all(|w| *w > 0.0));
        assert!(g.radii.iter().all(|r| *r < g.cutoff));
        assert!(g.theta.windows(2).all(|t| t[0] < t[1]));
    }

    #[test]
    fn gaussian_integral() {
        // ∫ exp(-|P - a|²) dP̄ = π^{3/2}
        let g = MomentumGrid::new(GridSpec::new(48, 12, 24), 12.0, &K).unwrap();
        let a = [0.3, -0.2, 0.1];
        let f = |p: &[f64; 3]| (-((p[0] - a[0]).powi(2) + (p[1] - a[1]).powi(2) + (p[2] - a[2]).powi(2))).exp();
        let got = g.integrate(&g.sample(&f));
        assert!((got - PI.powf(1.5)).abs() < 1e-9, "{got}");
    }

    #[test]
    fn interpolation_reproduces_nodes_and_smooth_functions() {
        let g = MomentumGrid::new(GridSpec::new(32, 12, 24), 8.0, &K).unwrap();
        let f = |p: &[f64; 3]| (-(p[0] - 0.4).powi(2) - p[1] * p[1] - 0.5 * (p[2] + 0.3).powi(2)).exp();
        let v = g.sample(&f);
        let field = GridField::new(&g, &v).unwrap();
        for i in (0..g.len()).step_by(97) {
            assert!((field.interpolate(&g.nodes[i]) - v[i]).abs() < 1e-13);
        }
        // Points near the origin and both poles exercise the ghost nodes.
        for p in [[0.0, 0.0, 0.0], [1e-3, 2e-3, -1e-3], [0.01, 0.0, 0.9], [0.0, -0.02, -1.1], [0.7, 0.5, 0.2]] {
            let err = (field.interpolate(&p) - f(&p)).abs();
            assert!(err < 2e-3, "p={p:?} err={err}");
        }
        assert_eq!(field.interpolate(&[9.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn interpolation_converges_at_fourth_order() {
        let f = |p: &[f64; 3]| (-(p[0] - 0.4).powi(2) - p[1] * p[1] - 0.5 * (p[2] + 0.3).powi(2)).exp();
        let probes: Vec<[f64; 3]> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.37;
                [0.9 * t.sin(), 0.7 * (1.3 * t).cos(), 0.8 * (0.7 * t).sin()]
            })
            .collect();
        let err = |spec: GridSpec| {
            let g = MomentumGrid::new(spec, 8.0, &K).unwrap();
            let v = g.sample(&f);
            let field = GridField::new(&g, &v).unwrap();
            probes.iter().map(|p| (field.interpolate(p) - f(p)).abs()).fold(0.0, f64::max)
        };
        let coarse = err(GridSpec::new(24, 12, 24));
        let fine = err(GridSpec::new(48, 24, 48));
        assert!(coarse / fine > 10.0, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn refinement_keeps_even_azimuth() {
        let s = GridSpec::new(8, 6, 12).refined(1.5);
        assert_eq!(s, GridSpec::new(12, 9, 18));
        assert_eq!(GridSpec::new(8, 6, 10).refined(1.5).n_azimuth, 16);
    }
}
