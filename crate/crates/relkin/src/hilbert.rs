//! First orders of the Hilbert expansion `F^ε = F₀ + ε F₁ + ...` of the
//! relativistic Boltzmann equation `∂_t F + P̂·∂_x̄ F = ε⁻¹ Q(F, F)` around a
//! solution of the Euler system.
//!
//! * `F₀` is the local Maxwellian of each Euler cell.
//! * The transport term `T = (∂_t + P̂·∂_x̄) F₀` follows from the chain rule
//!   through `(ln n, z, u)`; time derivatives come from the Euler right-hand
//!   side and spatial ones from the solver's stencil, with `∂(n, z)` obtained
//!   from `∂(η, p)` through the equation of state. With these inputs the five
//!   solvability conditions `∫ φ T dP̄ = 0`, `φ ∈ {1, P̄, P⁰}`, are the Euler
//!   equations themselves and hold up to momentum quadrature.
//! * `F₁ = √M h₁` with `𝓛 h₁ = -T/√M` solved on the Galerkin space of the
//!   linearized operator, orthogonal to the collision invariants, plus an
//!   optional invariant part `Φ₁`.
//!
//! All cells share one momentum grid so fields can be differenced across
//! cells node by node.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use nalgebra::DVector;

use crate::collision::{self, CollisionKernel, LinearizedOperator, OperatorConfig, NULL_DIM};
use crate::euler::{self, CellThermo, EulerConfig, EulerState, FdOrder};
use crate::grid::{GridSpec, MomentumGrid};
use crate::maxwellian::{FourVelocity, MaxwellianParams};
use crate::quadrature::pairwise_sum;
use crate::{eos, Error, PhysicalConstants, Result};

/// Settings of the expansion pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HilbertConfig {
    /// Common momentum grid of all cells.
    pub grid: GridSpec,
    pub sphere_polar: usize,
    pub sphere_azimuth: usize,
    pub basis_degree: usize,
    /// The grid ends where the hottest / fastest cell Maxwellian has dropped
    /// by `10^-cutoff_decades`.
    pub cutoff_decades: f64,
    pub kernel: CollisionKernel,
    /// Largest admissible `|∫ φ_i T| / ∫ |φ_i T|` before `F₁` is refused.
    pub solvability_tol: f64,
    pub decay_q: f64,
    /// Weight exponent of the sup norm in defect reports.
    pub ell: f64,
    /// Relative tolerance under which two backgrounds share an operator.
    pub cache_tol: f64,
}

impl Default for HilbertConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::new(12, 4, 8),
            sphere_polar: 4,
            sphere_azimuth: 8,
            basis_degree: 3,
            cutoff_decades: 12.0,
            kernel: CollisionKernel::hard(),
            solvability_tol: 1e-5,
            decay_q: 0.9,
            ell: 2.0,
            cache_tol: 1e-12,
        }
    }
}

impl HilbertConfig {
    fn operator_config(&self) -> OperatorConfig {
        OperatorConfig {
            grid: self.grid,
            sphere_polar: self.sphere_polar,
            sphere_azimuth: self.sphere_azimuth,
            basis_degree: self.basis_degree,
            cutoff_decades: self.cutoff_decades,
            max_nodes: usize::MAX,
        }
    }
}

/// `F₀` of one cell.
pub fn f0_from_euler(state: &EulerState, thermo: &[CellThermo], cell: usize, k: &PhysicalConstants) -> Result<MaxwellianParams> {
    let f = &state.fields;
    let u = FourVelocity::from_spatial([f.u[0][cell], f.u[1][cell], f.u[2][cell]], k.c);
    MaxwellianParams::new(thermo[cell].n, thermo[cell].z, u, *k)
}

/// One momentum grid covering the Maxwellians of every cell of `states`.
pub fn common_grid(states: &[(&EulerState, &[CellThermo])], cfg: &HilbertConfig, k: &PhysicalConstants) -> Result<MomentumGrid> {
    let mut cutoff = 0.0f64;
    for (s, th) in states {
        for cell in 0..s.grid.len() {
            cutoff = cutoff.max(f0_from_euler(s, th, cell, k)?.cutoff_radius_for(cfg.cutoff_decades));
        }
    }
    MomentumGrid::new(cfg.grid, cutoff, k)
}

/// Values and first derivatives of the Maxwellian parameters
/// `π = (ln n, z, u¹, u², u³)` in one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterRates {
    pub params: MaxwellianParams,
    /// `∂_t π`.
    pub dt: [f64; 5],
    /// `∂_j π`, indexed `[j][π]`.
    pub dx: [[f64; 5]; 3],
}

impl ParameterRates {
    /// Constant parameters.
    pub fn frozen(params: MaxwellianParams) -> Self {
        Self {
            params,
            dt: [0.0; 5],
            dx: [[0.0; 5]; 3],
        }
    }
}

/// `∂(ln n, z)` from `∂(η, p)` along the kinetic equation of state:
/// `dz = (d ln p + dη/k_B) / Φ'(z)`, `d ln n = -dη/k_B + (Φ'(z) + 1/z) dz`
/// with `Φ'(z) = (∂p/∂z)|_η / p`.
fn eos_jacobian(z: f64, p: f64, k: &PhysicalConstants) -> Result<[[f64; 2]; 2]> {
    let phi = eos::dp_dz_over_p(z)?;
    if phi == 0.0 {
        return Err(Error::Singular {
            what: "(∂p/∂z)|η in the parameter chain rule",
            z,
        });
    }
    let dz = [1.0 / (k.k_b * phi), 1.0 / (p * phi)];
    let e = phi + 1.0 / z;
    Ok([[-1.0 / k.k_b + e * dz[0], e * dz[1]], dz])
}

/// Parameter rates of every cell of an Euler state: time derivatives from
/// [`euler::euler_rhs`], spatial derivatives with the solver's stencil.
pub fn parameter_rates(state: &EulerState, thermo: &[CellThermo], cfg: &EulerConfig) -> Result<Vec<ParameterRates>> {
    let k = &cfg.constants;
    let rhs = euler::euler_rhs(state, thermo, cfg);
    let f = &state.fields;
    let grad: Vec<[Vec<f64>; 3]> = f
        .components()
        .iter()
        .map(|c| core::array::from_fn(|a| euler::derivative(c, &state.grid, a, cfg.fd_order)))
        .collect();
    (0..state.grid.len())
        .map(|i| {
            let params = f0_from_euler(state, thermo, i, k)?;
            let jac = eos_jacobian(thermo[i].z, f.p[i], k)?;
            let convert = |d_eta: f64, d_p: f64, du: [f64; 3]| -> [f64; 5] {
                [
                    jac[0][0] * d_eta + jac[0][1] * d_p,
                    jac[1][0] * d_eta + jac[1][1] * d_p,
                    du[0],
                    du[1],
                    du[2],
                ]
            };
            let dt = convert(rhs.eta[i], rhs.p[i], [rhs.u[0][i], rhs.u[1][i], rhs.u[2][i]]);
            let dx: [[f64; 5]; 3] = core::array::from_fn(|a| {
                convert(grad[0][a][i], grad[1][a][i], [grad[2][a][i], grad[3][a][i], grad[4][a][i]])
            });
            Ok(ParameterRates { params, dt, dx })
        })
        .collect()
}

/// `∂ ln M / ∂π` at momentum `p`:
/// `(1, 3/z + K₁/K₂ + u·P/(m0 c²), z (P^j - u^j P⁰/u⁰)/(m0 c²))`.
fn log_sensitivities(params: &MaxwellianParams, ratio: f64, p: &[f64; 3]) -> [f64; 5] {
    let k = &params.constants;
    let mc2 = k.rest_energy();
    let p0 = k.p0(p);
    let u = &params.u.0;
    let z = params.z;
    let mut s = [1.0, 3.0 / z + ratio + params.contraction(p), 0.0, 0.0, 0.0];
    for j in 0..3 {
        // u^κ carries velocity units; P⁰ momentum units, so u_κ P^κ/(m0 c²)
        // is dimensionless and so is each sensitivity times its parameter.
        s[2 + j] = z * (p[j] - u[1 + j] * p0 / u[0]) / mc2;
    }
    s
}

/// `T(P̄) = (∂_t + P̂·∂_x̄) M` with `P̂ = c P̄ / P⁰`.
pub fn transport_at(rates: &ParameterRates, ratio: f64, p: &[f64; 3]) -> f64 {
    let params = &rates.params;
    let k = &params.constants;
    let p0 = k.p0(p);
    let s = log_sensitivities(params, ratio, p);
    let mut d = 0.0;
    for pi in 0..5 {
        let mut rate = rates.dt[pi];
        for j in 0..3 {
            rate += k.c * p[j] / p0 * rates.dx[j][pi];
        }
        d += rate * s[pi];
    }
    params.eval(p) * d
}

/// [`transport_at`] at every node.
pub fn transport_term(rates: &ParameterRates, grid: &MomentumGrid) -> Result<Vec<f64>> {
    let ratio = crate::bessel::bessel_ratio(rates.params.z)?;
    Ok(grid.nodes.iter().map(|p| transport_at(rates, ratio, p)).collect())
}

/// `∫ φ_i T dP̄` for `φ = (1, P¹, P², P³, P⁰)/(1, m0c, m0c, m0c, m0c)` and
/// the matching `∫ |φ_i T| dP̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solvability {
    pub residuals: [f64; NULL_DIM],
    pub scales: [f64; NULL_DIM],
}

impl Solvability {
    /// `max_i |residual_i| / scale_i`; zero when `T` vanishes.
    pub fn relative(&self) -> f64 {
        self.residuals
            .iter()
            .zip(&self.scales)
            .map(|(r, s)| if *s > 0.0 { r.abs() / s } else { r.abs() })
            .fold(0.0, f64::max)
    }
}

pub fn solvability_check(transport: &[f64], grid: &MomentumGrid, k: &PhysicalConstants) -> Solvability {
    let mc = k.mc();
    let mut residuals = [0.0; NULL_DIM];
    let mut scales = [0.0; NULL_DIM];
    for l in 0..NULL_DIM {
        let (terms, abs): (Vec<f64>, Vec<f64>) = (0..grid.len())
            .map(|i| {
                let p = &grid.nodes[i];
                let phi = match l {
                    0 => 1.0,
                    4 => grid.p0[i] / mc,
                    j => p[j - 1] / mc,
                };
                let v = grid.weights[i] * phi * transport[i];
                (v, v.abs())
            })
            .unzip();
        residuals[l] = pairwise_sum(&terms);
        scales[l] = pairwise_sum(&abs);
    }
    Solvability { residuals, scales }
}

/// `|F| <= C M^q` at the nodes it was fitted on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCertificate {
    pub q: f64,
    pub c: f64,
}

impl DecayCertificate {
    /// Smallest `C` for the given `q` on the samples.
    pub fn fit(values: &[f64], m: &[f64], q: f64) -> Self {
        let c = values
            .iter()
            .zip(m)
            .map(|(f, mv)| f.abs() / mv.powf(q))
            .fold(0.0, f64::max);
        Self { q, c }
    }

    /// Largest `|F| / (C M^q)` over the samples; the certificate holds where
    /// this is at most 1.
    pub fn worst_ratio(&self, values: &[f64], m: &[f64]) -> f64 {
        values
            .iter()
            .zip(m)
            .map(|(f, mv)| {
                let bound = self.c * mv.powf(self.q);
                if bound > 0.0 {
                    f.abs() / bound
                } else if *f == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

/// One term `F_k` of the expansion in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTerm {
    pub order: usize,
    /// Node samples of `F_k` on the operator's grid.
    pub values: Vec<f64>,
    /// `F_k = √M Σ_l c_l √M e_l`: coefficients in the operator's basis.
    pub coefficients: Vec<f64>,
    pub certificate: DecayCertificate,
    /// `‖(A c + b)⊥‖ / ‖b⊥‖`: how well the Galerkin equation is solved.
    pub solve_residual: f64,
}

impl ExpansionTerm {
    /// `F_k(P̄)` anywhere, through the polynomial representation.
    pub fn eval(&self, op: &LinearizedOperator, p: &[f64; 3]) -> f64 {
        let e = op.basis_at(p);
        op.background.eval(p) * e.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// `b_l = ∫ T e_l dP̄` on the operator's grid.
fn galerkin_rhs(transport: &[f64], op: &LinearizedOperator) -> Vec<f64> {
    let n = op.grid.len();
    (0..op.dim())
        .map(|l| {
            let terms: Vec<f64> = (0..n)
                .map(|i| op.grid.weights[i] * transport[i] * op.basis_at_node(i, l))
                .collect();
            pairwise_sum(&terms)
        })
        .collect()
}

/// `F₁ = √M h₁ + Φ₁`, `𝓛 h₁ = -T/√M` on the complement of the invariants.
///
/// `phi1` gives `Φ₁ = M (a + b·P̄ + d P⁰)/(1, m0c, m0c, m0c, m0c)` by its
/// coefficients `(a, b¹, b², b³, d)`; `None` means `Φ₁ = 0`. The transport
/// samples must live on `op.grid`. `cell` labels errors.
pub fn solve_f1(
    transport: &[f64],
    op: &LinearizedOperator,
    phi1: Option<[f64; NULL_DIM]>,
    solvability_tol: f64,
    decay_q: f64,
    cell: usize,
) -> Result<ExpansionTerm> {
    let k = &op.background.constants;
    let check = solvability_check(transport, &op.grid, k);
    let rel = check.relative();
    if rel > solvability_tol {
        return Err(Error::NotOrthogonal { cell, relative: rel });
    }
    let b = galerkin_rhs(transport, op);
    let neg: Vec<f64> = b.iter().map(|v| -v).collect();
    let mut c = op.solve_perp(&neg)?;

    let resid = {
        let y = &op.matrix * DVector::from_column_slice(&c);
        let mut num = 0.0;
        let mut den = 0.0;
        for l in NULL_DIM..op.dim() {
            num += (y[l] + b[l]) * (y[l] + b[l]);
            den += b[l] * b[l];
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            num.sqrt()
        }
    };

    if let Some(a) = phi1 {
        let mc = k.mc();
        let h: Vec<f64> = (0..op.grid.len())
            .map(|i| {
                let p = &op.grid.nodes[i];
                let poly = a[0] + (a[1] * p[0] + a[2] * p[1] + a[3] * p[2] + a[4] * op.grid.p0[i]) / mc;
                op.m[i].sqrt() * poly
            })
            .collect();
        let extra = op.coefficients(&h);
        for (cl, e) in c.iter_mut().zip(extra) {
            *cl += e;
        }
    }
    let values: Vec<f64> = op
        .synthesize(&c)
        .iter()
        .zip(&op.m)
        .map(|(h, m)| h * m.sqrt())
        .collect();
    let mut term = ExpansionTerm {
        order: 1,
        values,
        coefficients: c,
        certificate: DecayCertificate { q: decay_q, c: 0.0 },
        solve_residual: resid,
    };
    term.certificate = fit_certificate(&term, op, decay_q)?;
    Ok(term)
}

/// Decades of `M` spanned by the radial grid of [`fit_certificate`]: far
/// enough that `M^{1-q}` has decayed below rounding for `q <= 0.9`.
const CERTIFICATE_DECADES: f64 = 160.0;

/// `C(q)` over the operator grid and a radial extension of it. `F/M^q` is
/// `M^{1-q}` times a polynomial, whose maximum can lie well beyond the
/// operator grid's cutoff.
pub fn fit_certificate(term: &ExpansionTerm, op: &LinearizedOperator, q: f64) -> Result<DecayCertificate> {
    let on_grid = DecayCertificate::fit(&term.values, &op.m, q);
    let spec = GridSpec::new(4 * op.grid.spec.n_radial, 3 * op.grid.spec.n_polar, 3 * op.grid.spec.n_azimuth);
    let decades = CERTIFICATE_DECADES.max(CERTIFICATE_DECADES * 0.1 / (1.0 - q).max(f64::EPSILON));
    let ext = MomentumGrid::new(spec, op.background.cutoff_radius_for(decades), &op.background.constants)?;
    let vals: Vec<f64> = ext.nodes.iter().map(|p| term.eval(op, p)).collect();
    let m = ext.sample(&op.background);
    let off_grid = DecayCertificate::fit(&vals, &m, q);
    Ok(DecayCertificate {
        q,
        c: on_grid.c.max(off_grid.c),
    })
}

/// `‖h‖₂`, `‖h‖_ν` and `‖h‖_{∞,ℓ}` of node samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNorms {
    pub ell: f64,
    pub l2: f64,
    pub nu: f64,
    pub sup: f64,
}

/// `w_ℓ(P̄) = (1 + |P̄|²)^{ℓ/2}` with `|P̄|` in units of `m0 c`.
pub fn weight(p: &[f64; 3], ell: f64, k: &PhysicalConstants) -> f64 {
    let mc = k.mc();
    (1.0 + (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (mc * mc)).powf(0.5 * ell)
}

pub fn weighted_norms(h: &[f64], grid: &MomentumGrid, ell: f64, nu: &[f64], k: &PhysicalConstants) -> Result<WeightedNorms> {
    if !(ell >= 0.0) {
        return Err(Error::Domain {
            what: "weight exponent ℓ",
            value: ell,
        });
    }
    let nu_terms: Vec<f64> = (0..grid.len()).map(|i| grid.weights[i] * nu[i] * h[i] * h[i]).collect();
    let sup = h
        .iter()
        .zip(&grid.nodes)
        .map(|(x, p)| weight(p, ell, k) * x.abs())
        .fold(0.0, f64::max);
    Ok(WeightedNorms {
        ell,
        l2: collision::l2_norm(h, grid),
        nu: pairwise_sum(&nu_terms).sqrt(),
        sup,
    })
}

/// Linearized operators by background, shared between cells whose
/// `(n, z, u)` agree to a relative tolerance.
#[derive(Debug, Clone)]
pub struct OperatorCache {
    pub tol: f64,
    entries: Vec<LinearizedOperator>,
    pub assemblies: usize,
}

impl OperatorCache {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            entries: Vec::new(),
            assemblies: 0,
        }
    }

    fn matches(&self, a: &MaxwellianParams, b: &MaxwellianParams) -> bool {
        let close = |x: f64, y: f64, scale: f64| (x - y).abs() <= self.tol * scale;
        let c = a.constants.c;
        close(a.n, b.n, a.n.abs())
            && close(a.z, b.z, a.z.abs())
            && (1..4).all(|i| close(a.u.0[i], b.u.0[i], c))
    }

    /// Index of the operator for `background` on `grid`, assembling it if
    /// needed.
    pub fn get(&mut self, background: &MaxwellianParams, grid: &MomentumGrid, cfg: &HilbertConfig) -> Result<usize> {
        if let Some(i) = self
            .entries
            .iter()
            .position(|op| op.grid == *grid && self.matches(&op.background, background))
        {
            return Ok(i);
        }
        let op = LinearizedOperator::assemble_on(background, &cfg.kernel, grid.clone(), &cfg.operator_config())?;
        self.entries.push(op);
        self.assemblies += 1;
        Ok(self.entries.len() - 1)
    }

    pub fn operator(&self, index: usize) -> &LinearizedOperator {
        &self.entries[index]
    }
}

/// `F₀` and `F₁` of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellExpansion {
    pub cell: usize,
    pub rates: ParameterRates,
    pub transport: Vec<f64>,
    pub f1: ExpansionTerm,
    pub operator: usize,
}

/// Builds `F₀`, `T` and `F₁` for `cell` of an Euler state.
pub fn expand_cell(
    rates: &ParameterRates,
    cell: usize,
    grid: &MomentumGrid,
    cache: &mut OperatorCache,
    cfg: &HilbertConfig,
    phi1: Option<[f64; NULL_DIM]>,
) -> Result<CellExpansion> {
    let transport = transport_term(rates, grid)?;
    let operator = cache.get(&rates.params, grid, cfg)?;
    let f1 = solve_f1(&transport, cache.operator(operator), phi1, cfg.solvability_tol, cfg.decay_q, cell)?;
    Ok(CellExpansion {
        cell,
        rates: *rates,
        transport,
        f1,
        operator,
    })
}

/// Defect of the truncated ansatz `F^ε = F₀ + ε F₁` (`R = 0`) in the
/// Boltzmann equation, tested against the operator's basis in one cell:
///
/// ```text
/// D_l(ε) = ⟨T, e_l⟩ - ⟨Q(M,F₁) + Q(F₁,M), e_l⟩
///        + ε (⟨(∂_t + P̂·∂_x̄) F₁, e_l⟩ - ⟨Q(F₁,F₁), e_l⟩)
/// ```
///
/// `Q(F₀, F₀) = 0` holds exactly for a Maxwellian and is not re-evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectReport {
    pub epsilon: f64,
    /// `‖D‖₂` of the coefficient vector, the `L²` norm of the projected
    /// defect in `h = F/√M` variables.
    pub defect_l2: f64,
    /// `‖·‖_{∞,ℓ}` of the projected defect at the grid nodes.
    pub defect_inf_ell: f64,
}

/// Order-by-order pieces of [`DefectReport`] for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyDefect {
    pub cell: usize,
    /// `ε⁰` part: the solvability residual and the Galerkin solve residual.
    pub order0: Vec<f64>,
    /// `ε¹` part.
    pub order1: Vec<f64>,
    pub operator: usize,
}

/// `∂^α` stencils of an Euler grid.
fn neighbor(grid: &euler::PeriodicBox, cell: usize, axis: usize, offset: isize) -> usize {
    let n = grid.n[axis] as isize;
    let mut idx = [
        cell % grid.n[0],
        (cell / grid.n[0]) % grid.n[1],
        cell / (grid.n[0] * grid.n[1]),
    ];
    idx[axis] = ((idx[axis] as isize + offset).rem_euclid(n)) as usize;
    grid.index(idx[0], idx[1], idx[2])
}

fn fd_weights(order: FdOrder) -> &'static [f64] {
    match order {
        FdOrder::Second => &[0.5],
        FdOrder::Fourth => &[2.0 / 3.0, -1.0 / 12.0],
        FdOrder::Sixth => &[0.75, -0.15, 1.0 / 60.0],
    }
}

/// Hierarchy defect at `probe` cells of the middle of five Euler states
/// `dt` apart. `F₁` is built at the probes on every level (for `∂_t F₁`,
/// fourth-order in time) and at their spatial stencil on the middle level.
pub fn hierarchy_defect(
    history: [&EulerState; 5],
    thermo: [&[CellThermo]; 5],
    dt: f64,
    probes: &[usize],
    euler_cfg: &EulerConfig,
    cfg: &HilbertConfig,
    grid: &MomentumGrid,
    cache: &mut OperatorCache,
) -> Result<Vec<HierarchyDefect>> {
    let k = &euler_cfg.constants;
    let rates: Vec<Vec<ParameterRates>> = (0..5)
        .map(|l| parameter_rates(history[l], thermo[l], euler_cfg))
        .collect::<Result<_>>()?;
    let box_ = history[2].grid;
    let w = fd_weights(euler_cfg.fd_order);
    let mut memo: Vec<((usize, usize), CellExpansion)> = Vec::new();
    let mut f1_at = |level: usize, cell: usize, cache: &mut OperatorCache| -> Result<Vec<f64>> {
        if let Some((_, e)) = memo.iter().find(|(key, _)| *key == (level, cell)) {
            return Ok(e.f1.values.clone());
        }
        let e = expand_cell(&rates[level][cell], cell, grid, cache, cfg, None)?;
        let v = e.f1.values.clone();
        memo.push(((level, cell), e));
        Ok(v)
    };
    let n = grid.len();
    let mut out = Vec::with_capacity(probes.len());
    for &probe in probes {
        let mid = expand_cell(&rates[2][probe], probe, grid, cache, cfg, None)?;
        let levels: Vec<Vec<f64>> = [0usize, 1, 3, 4]
            .iter()
            .map(|&l| f1_at(l, probe, cache))
            .collect::<Result<_>>()?;
        let mut transport1: Vec<f64> = (0..n)
            .map(|i| (levels[0][i] - 8.0 * levels[1][i] + 8.0 * levels[2][i] - levels[3][i]) / (12.0 * dt))
            .collect();
        for axis in 0..3 {
            if box_.n[axis] == 1 {
                continue;
            }
            let mut d = vec![0.0; n];
            for (s, ws) in w.iter().enumerate() {
                let off = (s + 1) as isize;
                let plus = f1_at(2, neighbor(&box_, probe, axis, off), cache)?;
                let minus = f1_at(2, neighbor(&box_, probe, axis, -off), cache)?;
                for i in 0..n {
                    d[i] += ws * (plus[i] - minus[i]);
                }
            }
            let h = box_.spacing(axis);
            for i in 0..n {
                transport1[i] += k.c * grid.nodes[i][axis] / grid.p0[i] * d[i] / h;
            }
        }
        let op = cache.operator(mid.operator);
        let b0 = galerkin_rhs(&mid.transport, op);
        let ac = &op.matrix * DVector::from_column_slice(&mid.f1.coefficients);
        let order0: Vec<f64> = (0..op.dim()).map(|l| b0[l] + ac[l]).collect();
        let b1 = galerkin_rhs(&transport1, op);
        let g = op.weak_quadratic(&mid.f1.coefficients);
        let order1: Vec<f64> = (0..op.dim()).map(|l| b1[l] - g[l]).collect();
        out.push(HierarchyDefect {
            cell: probe,
            order0,
            order1,
            operator: mid.operator,
        });
    }
    Ok(out)
}

/// Defect norms for each `ε`, maximized over the probe cells.
pub fn remainder_residual(defects: &[HierarchyDefect], cache: &OperatorCache, epsilons: &[f64], ell: f64) -> Vec<DefectReport> {
    epsilons
        .iter()
        .map(|&eps| {
            let mut l2 = 0.0f64;
            let mut sup = 0.0f64;
            for d in defects {
                let op = cache.operator(d.operator);
                let v: Vec<f64> = d.order0.iter().zip(&d.order1).map(|(a, b)| a + eps * b).collect();
                l2 = l2.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
                let k = &op.background.constants;
                let h = op.synthesize(&v);
                let s = h
                    .iter()
                    .zip(&op.grid.nodes)
                    .map(|(x, p)| weight(p, ell, k) * x.abs())
                    .fold(0.0, f64::max);
                sup = sup.max(s);
            }
            DefectReport {
                epsilon: eps,
                defect_l2: l2,
                defect_inf_ell: sup,
            }
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        num += (a - mx) * (b - my);
        den += (a - mx) * (a - mx);
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::{InitialData, PeriodicBox};

    const K: PhysicalConstants = PhysicalConstants::UNIT;

    #[test]
    fn weight_cancels() {
        for p in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5], [30.0, 0.0, 4.0]] {
            let w2 = weight(&p, 2.0, &K);
            let r2 = 1.0 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            assert_eq!(w2 / r2, 1.0);
        }
    }

    #[test]
    fn eos_jacobian_matches_finite_differences() {
        let (n, z) = (1.3, 0.8);
        let t = eos::thermo_from_nz(n, z, &K).unwrap();
        let jac = eos_jacobian(z, t.p, &K).unwrap();
        let h = 1e-6;
        for (col, (de, dp)) in [(h, 0.0), (0.0, h * t.p)].iter().enumerate() {
            let inv = eos::invert_eos(t.eta + de, t.p + dp, &K, Some(z)).unwrap();
            let inv_m = eos::invert_eos(t.eta - de, t.p - dp, &K, Some(z)).unwrap();
            let step = if col == 0 { 2.0 * h } else { 2.0 * h * t.p };
            let dln = (inv.n.ln() - inv_m.n.ln()) / step;
            let dz = (inv.z - inv_m.z) / step;
            assert!((dln - jac[0][col]).abs() < 1e-6 * (1.0 + jac[0][col].abs()), "{dln} {:?}", jac);
            assert!((dz - jac[1][col]).abs() < 1e-6 * (1.0 + jac[1][col].abs()), "{dz} {:?}", jac);
        }
    }

    #[test]
    fn constant_state_has_no_transport() {
        let grid = PeriodicBox::line(8, 1.0);
        let s = euler::initial_state(grid, 1.0, 2.0, InitialData::Constant, &K).unwrap();
        let th = s.thermo(&K).unwrap();
        let rates = parameter_rates(&s, &th, &EulerConfig::default()).unwrap();
        let mg = common_grid(&[(&s, &th)], &HilbertConfig::default(), &K).unwrap();
        for r in &rates {
            assert_eq!(r.params, rates[0].params);
            assert!(transport_term(r, &mg).unwrap().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn decay_certificate_is_tight() {
        let f = [1.0, -0.5, 0.25];
        let m = [1.0, 0.25, 0.01];
        let cert = DecayCertificate::fit(&f, &m, 0.9);
        assert!((cert.worst_ratio(&f, &m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        assert!((log_log_slope(&x, &y) - 2.0).abs() < 1e-12);
    }
}
