//! `collision-check`: `Q(M, M) = 0` under refinement, conservation of the
//! five collision invariants, and the structure of the linearized operator.

use anyhow::{anyhow, bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relkin::collision::{
    coercivity_delta0, collision_q, collision_q_on_grid, spectrum_report, CollisionKernel, CollisionQuadrature,
    LinearizedOperator, OperatorConfig, DEFAULT_Q_GRID, NULL_DIM, QUADRATURE_DECADES,
};
use relkin::grid::{GridSpec, LogGridField, MomentumGrid, PhaseFn};
use relkin::maxwellian::{FourVelocity, MaxwellianParams};
use relkin::quadrature::SphereRule;
use relkin::PhysicalConstants;

use super::{lib, Outcome};
use crate::config::Params;
use crate::report::{dense_dump, num, Check, Csv, Report};

pub const KEYS: &[&str] = &[
    "kernel",
    "equilibrium",
    "invariants",
    "operator",
    "refine",
    "eq_n",
    "eq_z",
    "eq_u",
    "eq_sample_grid",
    "eq_quad_grid",
    "eq_tol",
    "eq_min_gain",
    "inv_grid",
    "inv_quad_grid",
    "inv_tol",
    "op_grid",
    "op_refined_grid",
    "op_degree",
    "op_cutoff_decades",
    "symmetry_tol",
    "null_tol",
    "min_gap",
    "delta0_stability",
    "random_probes",
    "m0",
    "c",
    "k_b",
    "planck",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub kernel: CollisionKernel,
    pub equilibrium: bool,
    pub invariants: bool,
    pub operator: bool,
    /// Whether the operator is reassembled on `op_refined_grid` for the
    /// stability of `δ₀`.
    pub refine: bool,
    pub eq_background: (f64, f64, f64),
    pub eq_sample_grid: GridSpec,
    pub eq_quad_grid: GridSpec,
    pub eq_tol: f64,
    pub eq_min_gain: f64,
    pub inv_grid: GridSpec,
    pub inv_quad_grid: GridSpec,
    pub inv_tol: f64,
    pub op_grid: GridSpec,
    pub op_refined_grid: GridSpec,
    pub op_degree: usize,
    pub op_cutoff_decades: f64,
    pub symmetry_tol: f64,
    pub null_tol: f64,
    pub min_gap: f64,
    pub delta0_stability: f64,
    pub random_probes: usize,
    pub constants: PhysicalConstants,
}

impl Options {
    pub fn from_params(p: &Params) -> Result<Self> {
        p.check_keys("collision-check", KEYS)?;
        let name = p.string("kernel", "hard");
        let kernel = CollisionKernel::preset(name).ok_or_else(|| anyhow!("`kernel`: unknown preset `{name}` (hard, soft)"))?;
        let o = Self {
            kernel,
            equilibrium: p.bool("equilibrium", true)?,
            invariants: p.bool("invariants", true)?,
            operator: p.bool("operator", true)?,
            refine: p.bool("refine", true)?,
            eq_background: (p.positive("eq_n", 1.0)?, p.positive("eq_z", 1.0)?, p.f64("eq_u", 0.3)?),
            eq_sample_grid: p.grid("eq_sample_grid", DEFAULT_Q_GRID)?,
            eq_quad_grid: p.grid("eq_quad_grid", DEFAULT_Q_GRID)?,
            eq_tol: p.positive("eq_tol", 1e-4)?,
            eq_min_gain: p.positive("eq_min_gain", 4.0)?,
            inv_grid: p.grid("inv_grid", GridSpec::new(12, 6, 12))?,
            inv_quad_grid: p.grid("inv_quad_grid", GridSpec::new(24, 8, 16))?,
            inv_tol: p.positive("inv_tol", 1e-4)?,
            op_grid: p.grid("op_grid", GridSpec::new(8, 6, 12))?,
            op_refined_grid: p.grid("op_refined_grid", GridSpec::new(12, 9, 18))?,
            op_degree: p.usize("op_degree", 3)?,
            op_cutoff_decades: p.positive("op_cutoff_decades", 8.0)?,
            symmetry_tol: p.positive("symmetry_tol", 1e-8)?,
            null_tol: p.positive("null_tol", 1e-6)?,
            min_gap: p.positive("min_gap", 10.0)?,
            delta0_stability: p.positive("delta0_stability", 0.2)?,
            random_probes: p.usize("random_probes", 16)?,
            constants: p.constants()?,
        };
        if o.eq_background.2.abs() >= 1.0 {
            bail!("`eq_u` is u¹/c and must be below 1 in magnitude");
        }
        for g in [o.eq_sample_grid, o.eq_quad_grid, o.inv_grid, o.inv_quad_grid, o.op_grid, o.op_refined_grid] {
            lib("grid", MomentumGrid::new(g, 1.0, &o.constants))?;
        }
        if o.op_degree < 1 {
            bail!("`op_degree` must be at least 1");
        }
        Ok(o)
    }
}

/// Sixteen momenta: four radii (in units of `m0 c`) times four directions.
pub fn equilibrium_test_set(mc: f64) -> Vec<[f64; 3]> {
    let dirs = [[0.0, 0.0, 1.0], [0.6, 0.8, 0.0], [-0.48, 0.36, 0.8], [0.0, -0.6, -0.8]];
    let mut v = Vec::with_capacity(16);
    for r in [0.0, 0.5, 1.0, 2.5] {
        for d in dirs {
            v.push([r * mc * d[0], r * mc * d[1], r * mc * d[2]]);
        }
    }
    v
}

/// `max |Q(M, M)| / max loss(M, M)` over the test set, with `M` given as
/// samples on `sample_spec` and interpolated in `ln M`.
fn equilibrium_residual(
    m: &MaxwellianParams,
    sample_spec: GridSpec,
    quad: &CollisionQuadrature,
    kernel: &CollisionKernel,
    csv: &mut Csv,
    level: f64,
) -> Result<f64> {
    let k = &m.constants;
    let grid = lib(
        "sample grid",
        MomentumGrid::new(sample_spec, m.cutoff_radius_for(QUADRATURE_DECADES), k),
    )?;
    let samples = grid.sample(m);
    let field = lib("interpolant", LogGridField::new(&grid, &samples))?;
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for p in equilibrium_test_set(k.mc()) {
        let q = collision_q(&field, &field, &p, kernel, quad, k);
        worst = worst.max(q.value().abs());
        scale = scale.max(q.loss);
        csv.row(&[level, p[0], p[1], p[2], q.value(), q.loss]);
    }
    Ok(worst / scale)
}

/// Non-equilibrium distributions with Maxwellian tails.
fn test_distributions(k: PhysicalConstants) -> Result<Vec<(&'static str, Box<dyn PhaseFn>)>> {
    let c = k.c;
    let mc = k.mc();
    let a = lib("F", MaxwellianParams::new(1.0, 1.0, FourVelocity::from_spatial([0.3 * c, 0.0, 0.0], c), k))?;
    let b = lib("F", MaxwellianParams::new(0.5, 2.0, FourVelocity::from_spatial([0.0, -0.4 * c, 0.1 * c], c), k))?;
    let r = lib("F", MaxwellianParams::rest(1.0, 1.0, k))?;
    let s = lib("F", MaxwellianParams::new(0.8, 1.5, FourVelocity::from_spatial([0.0, 0.0, 0.2 * c], c), k))?;
    Ok(vec![
        ("two_streams", Box::new(move |p: &[f64; 3]| a.eval(p) + b.eval(p))),
        (
            "polynomial_perturbation",
            Box::new(move |p: &[f64; 3]| {
                let x = [p[0] / mc, p[1] / mc, p[2] / mc];
                r.eval(p) * (1.0 + 0.5 * (x[0] - 0.3 * x[2]) * x[1] / (1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]))
            }),
        ),
        (
            "boosted_anisotropic",
            Box::new(move |p: &[f64; 3]| {
                let x = [p[0] / mc, p[1] / mc, p[2] / mc];
                s.eval(p) * (1.0 + 0.4 * x[0] * x[2] / (1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]))
            }),
        ),
    ])
}

/// `∫ φ Q(F,F) dP̄ / ∫ |φ| loss(F,F) dP̄` for `φ = 1, P̄, P⁰`.
fn invariant_moments(f: &dyn PhaseFn, grid: &MomentumGrid, quad: &CollisionQuadrature, kernel: &CollisionKernel, k: &PhysicalConstants) -> [f64; NULL_DIM] {
    let qs = collision_q_on_grid(f, f, grid, kernel, quad, k);
    core::array::from_fn(|l| {
        let phi = |i: usize| match l {
            0 => 1.0,
            4 => grid.p0[i],
            j => grid.nodes[i][j - 1],
        };
        let num: Vec<f64> = (0..grid.len()).map(|i| grid.weights[i] * phi(i) * qs[i].value()).collect();
        let den: Vec<f64> = (0..grid.len()).map(|i| grid.weights[i] * phi(i).abs() * qs[i].loss).collect();
        relkin::quadrature::pairwise_sum(&num) / relkin::quadrature::pairwise_sum(&den)
    })
}

fn assemble(m: &MaxwellianParams, o: &Options, grid: GridSpec) -> Result<LinearizedOperator> {
    let cfg = OperatorConfig {
        grid,
        basis_degree: o.op_degree,
        cutoff_decades: o.op_cutoff_decades,
        ..OperatorConfig::default()
    };
    lib("operator assembly", LinearizedOperator::assemble(m, &o.kernel, &cfg))
}

pub fn run(o: &Options, seed: u64) -> Result<Outcome> {
    let k = o.constants;
    let c = k.c;
    let mut report = Report::new("collision-check");
    let mut out = Outcome::default();

    if o.equilibrium {
        let (n, z, u) = o.eq_background;
        let m = lib("Maxwellian", MaxwellianParams::new(n, z, FourVelocity::from_spatial([u * c, 0.0, 0.0], c), k))?;
        let quad = CollisionQuadrature {
            q_grid: lib("quadrature grid", MomentumGrid::new(o.eq_quad_grid, m.cutoff_radius_for(QUADRATURE_DECADES), &k))?,
            sphere: SphereRule::product(6, 12),
        };
        let mut csv = Csv::new(&["level", "p1", "p2", "p3", "q", "loss"]);
        let coarse = equilibrium_residual(&m, o.eq_sample_grid, &quad, &o.kernel, &mut csv, 0.0)?;
        let fine = equilibrium_residual(&m, o.eq_sample_grid.refined(2.0), &quad, &o.kernel, &mut csv, 1.0)?;
        report.push(Check::below("equilibrium_residual", coarse, o.eq_tol));
        report.push(
            Check::at_least("equilibrium_refinement_gain", coarse / fine, o.eq_min_gain)
                .with_detail(format!("refined residual {}", num(fine))),
        );
        out.file("equilibrium.csv", csv.as_bytes());
    }

    if o.invariants {
        let reference = lib("Maxwellian", MaxwellianParams::rest(1.0, 1.0, k))?;
        // The streams of the test set reach further than the rest reference.
        let cutoff = 1.3 * reference.cutoff_radius_for(QUADRATURE_DECADES);
        let grid = lib("moment grid", MomentumGrid::new(o.inv_grid, cutoff, &k))?;
        let quad = CollisionQuadrature {
            q_grid: lib("quadrature grid", MomentumGrid::new(o.inv_quad_grid, cutoff, &k))?,
            sphere: SphereRule::product(6, 12),
        };
        let mut csv = Csv::new(&["case", "component", "relative_moment"]);
        let mut worst = 0.0f64;
        for (case, (name, f)) in test_distributions(k)?.iter().enumerate() {
            let mom = invariant_moments(f.as_ref(), &grid, &quad, &o.kernel, &k);
            for (l, v) in mom.iter().enumerate() {
                csv.row(&[case as f64, l as f64, *v]);
                worst = worst.max(v.abs());
            }
            report.note(format!("invariants {name}: {}", mom.map(num).join(" ")));
        }
        report.push(Check::below("invariant_moment_relative", worst, o.inv_tol));
        out.file("invariants.csv", csv.as_bytes());
    }

    if o.operator {
        let m = lib("Maxwellian", MaxwellianParams::rest(1.0, 1.0, k))?;
        let op = assemble(&m, o, o.op_grid)?;
        let spec = spectrum_report(&op, o.null_tol);
        report.push(Check::below("operator_symmetry_defect", spec.symmetry_defect, o.symmetry_tol));
        report.push(Check::within("operator_nullity", spec.nullity as f64, NULL_DIM as f64, NULL_DIM as f64));
        report.push(Check::at_least("null_space_gap", spec.gap, o.min_gap));
        let d0 = lib("coercivity", coercivity_delta0(&op))?;
        report.push(Check::above("delta0", d0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut negative = 0usize;
        for _ in 0..o.random_probes {
            let v: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut form = 0.0;
            for (i, vi) in v.iter().enumerate() {
                for (j, vj) in v.iter().enumerate() {
                    form += vi * op.matrix[(i, j)] * vj;
                }
            }
            let v2: f64 = v.iter().map(|x| x * x).sum();
            if form < -1e-12 * op.matrix.norm() * v2 {
                negative += 1;
            }
        }
        report.push(Check::at_most("negative_quadratic_form_probes", negative as f64, 0.0));

        if o.refine {
            let fine = assemble(&m, o, o.op_refined_grid)?;
            let d1 = lib("coercivity", coercivity_delta0(&fine))?;
            report.push(
                Check::at_most("delta0_relative_change", (d1 / d0 - 1.0).abs(), o.delta0_stability)
                    .with_detail(format!("refined delta0 {}", num(d1))),
            );
        }

        let mut sv = Csv::new(&["index", "singular_value"]);
        for (i, s) in spec.singular_values.iter().enumerate() {
            sv.row(&[i as f64, *s]);
        }
        out.file("spectrum.csv", sv.as_bytes());
        out.file("operator.bin", dense_dump(&[op.dim(), op.dim()], op.matrix.transpose().as_slice()));
    }
    out.report = report;
    Ok(out)
}
