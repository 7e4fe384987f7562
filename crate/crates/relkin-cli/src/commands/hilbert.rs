//! `hilbert-build`: first-order Hilbert expansion around an Euler run, with
//! the solvability, manufactured-solution, remainder-scaling and decay
//! checks.

use anyhow::{anyhow, bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relkin::collision::{CollisionKernel, NULL_DIM};
use relkin::euler::{initial_state, CellThermo, EulerConfig, EulerState, FdOrder, InitialData, PeriodicBox, Solver};
use relkin::grid::GridSpec;
use relkin::hilbert::{
    common_grid, expand_cell, hierarchy_defect, log_log_slope, parameter_rates, remainder_residual, solve_f1,
    solvability_check, transport_term, HilbertConfig, OperatorCache,
};

use super::{lib, Outcome};
use crate::config::Params;
use crate::report::{num, Check, Csv, Report};

pub const KEYS: &[&str] = &[
    "cells",
    "n",
    "z",
    "amplitude",
    "mode",
    "fd_order",
    "epsilons",
    "probes",
    "grid",
    "sphere_polar",
    "sphere_azimuth",
    "basis_degree",
    "cutoff_decades",
    "kernel",
    "solvability_tol",
    "decay_q",
    "ell",
    "solvability_grids",
    "solvability_decades",
    "manufactured_tol",
    "slope_min",
    "slope_max",
    "m0",
    "c",
    "k_b",
    "planck",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub cells: usize,
    pub n: f64,
    pub z: f64,
    pub amplitude: f64,
    pub mode: usize,
    pub euler: EulerConfig,
    pub epsilons: Vec<f64>,
    /// Cells at which `F₁` and the remainder defect are evaluated.
    pub probes: Vec<usize>,
    pub hilbert: HilbertConfig,
    /// Momentum grids of the solvability refinement study.
    pub solvability_grids: Vec<GridSpec>,
    pub solvability_decades: f64,
    pub manufactured_tol: f64,
    pub slope_range: (f64, f64),
}

impl Options {
    pub fn from_params(p: &Params) -> Result<Self> {
        p.check_keys("hilbert-build", KEYS)?;
        let base = HilbertConfig::default();
        let name = p.string("kernel", "hard");
        let fd = p.usize("fd_order", 6)?;
        let o = Self {
            cells: p.usize("cells", 64)?,
            n: p.positive("n", 1.0)?,
            z: p.positive("z", 1.0)?,
            amplitude: p.f64("amplitude", 0.05)?,
            mode: p.usize("mode", 1)?,
            euler: EulerConfig {
                fd_order: FdOrder::from_order(fd).ok_or_else(|| anyhow!("`fd_order` must be 2, 4 or 6, got {fd}"))?,
                constants: p.constants()?,
                ..EulerConfig::default()
            },
            epsilons: p.f64_list("epsilons", &[0.1, 0.05, 0.025])?,
            probes: p.usize_list("probes", &[5, 21])?,
            hilbert: HilbertConfig {
                grid: p.grid("grid", base.grid)?,
                sphere_polar: p.usize("sphere_polar", base.sphere_polar)?,
                sphere_azimuth: p.usize("sphere_azimuth", base.sphere_azimuth)?,
                basis_degree: p.usize("basis_degree", base.basis_degree)?,
                cutoff_decades: p.positive("cutoff_decades", base.cutoff_decades)?,
                kernel: CollisionKernel::preset(name).ok_or_else(|| anyhow!("`kernel`: unknown preset `{name}` (hard, soft)"))?,
                solvability_tol: p.positive("solvability_tol", base.solvability_tol)?,
                decay_q: p.positive("decay_q", base.decay_q)?,
                ell: p.f64("ell", base.ell)?,
                ..base
            },
            solvability_grids: p.grid_list(
                "solvability_grids",
                &[GridSpec::new(12, 4, 8), GridSpec::new(24, 8, 16), GridSpec::new(48, 8, 16)],
            )?,
            solvability_decades: p.positive("solvability_decades", 20.0)?,
            manufactured_tol: p.positive("manufactured_tol", 1e-9)?,
            slope_range: (p.f64("slope_min", 0.8)?, p.f64("slope_max", 1.2)?),
        };
        if o.cells < 8 {
            bail!("`cells` must be at least 8");
        }
        if let Some(c) = o.probes.iter().find(|c| **c >= o.cells) {
            bail!("`probes`: cell {c} is outside the {} cells", o.cells);
        }
        if o.probes.is_empty() {
            bail!("`probes` needs at least one cell");
        }
        if o.epsilons.len() < 2 || o.epsilons.iter().any(|e| !(*e > 0.0)) {
            bail!("`epsilons` needs at least two positive values");
        }
        if !(o.hilbert.decay_q < 1.0) {
            bail!("`decay_q` must lie in (0, 1)");
        }
        if o.solvability_grids.len() < 2 {
            bail!("`solvability_grids` needs at least two grids");
        }
        Ok(o)
    }
}

type History = Vec<(EulerState, Vec<CellThermo>)>;

/// Five consecutive states of a run from `data`, one default step apart.
fn history(o: &Options, data: InitialData) -> Result<(History, f64)> {
    let init = lib("initial data", initial_state(PeriodicBox::line(o.cells, 1.0), o.n, o.z, data, &o.euler.constants))?;
    let mut sol = lib("solver", Solver::new(init, o.euler))?;
    let dt = sol.default_dt();
    let mut h = Vec::with_capacity(5);
    for l in 0..5 {
        h.push((sol.state.clone(), sol.thermo().to_vec()));
        if l < 4 {
            lib("step", sol.step(dt))?;
        }
    }
    Ok((h, dt))
}

/// Worst relative solvability residual over all cells of the middle state.
fn solvability_over_cells(h: &History, o: &Options, cfg: &HilbertConfig) -> Result<f64> {
    let k = &o.euler.constants;
    let all: Vec<(&EulerState, &[CellThermo])> = h.iter().map(|(s, t)| (s, t.as_slice())).collect();
    let grid = lib("momentum grid", common_grid(&all, cfg, k))?;
    let rates = lib("parameter rates", parameter_rates(&h[2].0, &h[2].1, &o.euler))?;
    let mut worst = 0.0f64;
    for r in &rates {
        let t = lib("transport", transport_term(r, &grid))?;
        worst = worst.max(solvability_check(&t, &grid, k).relative());
    }
    Ok(worst)
}

pub fn run(o: &Options, seed: u64) -> Result<Outcome> {
    let k = o.euler.constants;
    let mut report = Report::new("hilbert-build");
    let mut out = Outcome::default();

    let (constant, _) = history(o, InitialData::Constant)?;
    let (wave, dt) = history(o, InitialData::SimpleWave { amplitude: o.amplitude, mode: o.mode })?;

    report.push(Check::at_most(
        "constant_state_solvability",
        solvability_over_cells(&constant, o, &o.hilbert)?,
        0.0,
    ));
    let mut sv = Csv::new(&["n_radial", "n_polar", "n_azimuth", "relative_residual"]);
    let mut levels = Vec::new();
    for g in &o.solvability_grids {
        let cfg = HilbertConfig {
            grid: *g,
            cutoff_decades: o.solvability_decades,
            ..o.hilbert
        };
        let r = solvability_over_cells(&wave, o, &cfg)?;
        sv.row(&[g.n_radial as f64, g.n_polar as f64, g.n_azimuth as f64, r]);
        levels.push(r);
    }
    let worst_step = levels.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
    report.note(format!("wave solvability {}", levels.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")));
    report.push(Check::below("wave_solvability_refinement_ratio", worst_step, 1.0));
    out.file("solvability.csv", sv.as_bytes());

    let all: Vec<(&EulerState, &[CellThermo])> = wave.iter().map(|(s, t)| (s, t.as_slice())).collect();
    let grid = lib("momentum grid", common_grid(&all, &o.hilbert, &k))?;
    let mut cache = OperatorCache::new(o.hilbert.cache_tol);
    let h: [&EulerState; 5] = core::array::from_fn(|l| &wave[l].0);
    let th: [&[CellThermo]; 5] = core::array::from_fn(|l| wave[l].1.as_slice());
    let defects = lib(
        "hierarchy defect",
        hierarchy_defect(h, th, dt, &o.probes, &o.euler, &o.hilbert, &grid, &mut cache),
    )?;

    // A right-hand side built from known coefficients must give them back.
    let op = cache.operator(defects[0].operator);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coef: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    coef[..NULL_DIM].fill(0.0);
    let lh = op.apply(&op.synthesize(&coef));
    let transport: Vec<f64> = lh.iter().zip(&op.m).map(|(v, m)| -m.sqrt() * v).collect();
    let solved = lib(
        "manufactured solve",
        solve_f1(&transport, op, None, o.hilbert.solvability_tol, o.hilbert.decay_q, o.probes[0]),
    )?;
    let err = solved.coefficients.iter().zip(&coef).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    report.push(Check::below("manufactured_coefficient_error", err, o.manufactured_tol));

    let residuals = remainder_residual(&defects, &cache, &o.epsilons, o.hilbert.ell);
    let mut csv = Csv::new(&["epsilon", "defect_L2", "defect_inf_ell"]);
    for r in &residuals {
        csv.row(&[r.epsilon, r.defect_l2, r.defect_inf_ell]);
    }
    out.file("residuals.csv", csv.as_bytes());
    let l2: Vec<f64> = residuals.iter().map(|r| r.defect_l2).collect();
    let inf: Vec<f64> = residuals.iter().map(|r| r.defect_inf_ell).collect();
    let (lo, hi) = o.slope_range;
    report.push(Check::within("remainder_slope_l2", log_log_slope(&o.epsilons, &l2), lo, hi));
    report.push(Check::within("remainder_slope_inf_ell", log_log_slope(&o.epsilons, &inf), lo, hi));

    let rates = lib("parameter rates", parameter_rates(h[2], th[2], &o.euler))?;
    let mut blocks = Vec::new();
    let mut worst_ratio = 0.0f64;
    for &cell in &o.probes {
        let e = lib("expansion", expand_cell(&rates[cell], cell, &grid, &mut cache, &o.hilbert, None))?;
        let op = cache.operator(e.operator);
        let ratio = e.f1.certificate.worst_ratio(&e.f1.values, &op.m);
        worst_ratio = worst_ratio.max(ratio);
        report.note(format!("cell {cell} C(q) {} solve residual {}", num(e.f1.certificate.c), num(e.f1.solve_residual)));
        for v in [cell as u64, e.f1.order as u64, e.f1.values.len() as u64] {
            blocks.extend_from_slice(&v.to_le_bytes());
        }
        for v in &e.f1.values {
            blocks.extend_from_slice(&v.to_le_bytes());
        }
    }
    report.push(Check::at_most("decay_certificate_worst_ratio", worst_ratio, 1.0));
    report.note(format!("operator assemblies {}", cache.assemblies));
    out.file("f1_cells.bin", blocks);
    out.report = report;
    Ok(out)
}
