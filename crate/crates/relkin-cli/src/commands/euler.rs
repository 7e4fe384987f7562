//! `euler-run`: one configured simulation with per-step diagnostics, and
//! with `verify = true` the solver verification suite (constant state, sound
//! speed, temporal order, conservation convergence, energy horizon).

use anyhow::{bail, Result};
use relkin::euler::{
    background_state, conservation_residual, energy_current, energy_divergence_check, energy_n, initial_state,
    measured_phase_speed, riccati_fit, CellThermo, EulerConfig, EulerState, FdOrder, InitialData, PeriodicBox, Solver,
};
use relkin::{eos, PhysicalConstants};

use super::{lib, Outcome};
use crate::config::Params;
use crate::report::{dense_dump, num, Check, Csv, Report};

pub const KEYS: &[&str] = &[
    "cells",
    "dims",
    "length",
    "n",
    "z",
    "preset",
    "amplitude",
    "mode",
    "width",
    "cfl",
    "fd_order",
    "t_end",
    "steps",
    "output_every",
    "constant_tol",
    "verify",
    "verify_cells",
    "sound_tol",
    "min_time_order",
    "conservation_cells",
    "horizon_cells",
    "horizon_deltas",
    "horizon_ratio_min",
    "horizon_ratio_max",
    "m0",
    "c",
    "k_b",
    "planck",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub grid: PeriodicBox,
    pub n: f64,
    pub z: f64,
    pub data: InitialData,
    pub cfg: EulerConfig,
    pub t_end: f64,
    /// Fixed number of steps at the default step size; overrides `t_end`.
    pub steps: Option<usize>,
    pub output_every: usize,
    pub constant_tol: f64,
    pub verify: bool,
    /// Cells of the constant-state and sound-speed runs.
    pub verify_cells: usize,
    pub sound_tol: f64,
    pub min_time_order: f64,
    pub conservation_cells: Vec<usize>,
    pub horizon_cells: usize,
    pub horizon_deltas: [f64; 2],
    pub horizon_ratio: (f64, f64),
}

impl Options {
    pub fn from_params(p: &Params) -> Result<Self> {
        p.check_keys("euler-run", KEYS)?;
        let cells = p.usize("cells", 128)?;
        let length = p.positive("length", 1.0)?;
        let grid = match p.usize("dims", 1)? {
            1 => PeriodicBox::line(cells, length),
            3 => PeriodicBox::cube(cells, length),
            d => bail!("`dims` must be 1 or 3, got {d}"),
        };
        let amplitude = p.f64("amplitude", 0.01)?;
        let data = match p.string("preset", "sine") {
            "constant" => InitialData::Constant,
            "sine" => InitialData::SimpleWave {
                amplitude,
                mode: p.usize("mode", 1)?,
            },
            "gaussian" => InitialData::GaussianBump {
                amplitude,
                width: p.positive("width", 0.1)?,
            },
            other => bail!("`preset`: unknown preset `{other}` (constant, sine, gaussian)"),
        };
        let fd = p.usize("fd_order", 6)?;
        let cfg = EulerConfig {
            fd_order: FdOrder::from_order(fd).ok_or_else(|| anyhow::anyhow!("`fd_order` must be 2, 4 or 6, got {fd}"))?,
            cfl: p.positive("cfl", 0.4)?,
            constants: p.constants()?,
        };
        let deltas = p.f64_list("horizon_deltas", &[1e-2, 5e-3])?;
        if deltas.len() != 2 || deltas.iter().any(|d| !(*d > 0.0)) {
            bail!("`horizon_deltas` takes two positive amplitudes");
        }
        let o = Self {
            grid,
            n: p.positive("n", 1.0)?,
            z: p.positive("z", 1.0)?,
            data,
            cfg,
            t_end: p.positive("t_end", 0.5)?,
            steps: if p.string("steps", "").is_empty() { None } else { Some(p.usize("steps", 0)?) },
            output_every: p.usize("output_every", 1)?.max(1),
            constant_tol: p.positive("constant_tol", 1e-13)?,
            verify: p.bool("verify", false)?,
            verify_cells: p.usize("verify_cells", 512)?,
            sound_tol: p.positive("sound_tol", 0.01)?,
            min_time_order: p.positive("min_time_order", 3.8)?,
            conservation_cells: p.usize_list("conservation_cells", &[32, 64, 128])?,
            horizon_cells: p.usize("horizon_cells", 64)?,
            horizon_deltas: [deltas[0], deltas[1]],
            horizon_ratio: (p.positive("horizon_ratio_min", 1.6)?, p.positive("horizon_ratio_max", 2.4)?),
        };
        if cells < 8 {
            bail!("`cells` must be at least 8");
        }
        if o.conservation_cells.len() < 2 {
            bail!("`conservation_cells` needs at least two resolutions");
        }
        Ok(o)
    }
}

pub fn run(o: &Options) -> Result<Outcome> {
    let mut out = Outcome::new(Report::new("euler-run"));
    simulate(o, &mut out)?;
    if o.verify {
        verify(o, &mut out.report)?;
    }
    Ok(out)
}

fn simulate(o: &Options, out: &mut Outcome) -> Result<()> {
    let k = o.cfg.constants;
    let reference = lib("background", background_state(o.n, o.z, &k))?;
    let init = lib("initial data", initial_state(o.grid, o.n, o.z, o.data, &k))?;
    let mut sol = lib("solver", Solver::new(init, o.cfg))?;
    let dt = sol.default_dt();
    let steps = o.steps.unwrap_or_else(|| (o.t_end / dt).ceil().max(1.0) as usize);
    let dt = if o.steps.is_some() { dt } else { o.t_end / steps as f64 };

    let mut csv = Csv::new(&["step", "time", "dt", "max_deviation", "energy", "margin", "normalization_defect"]);
    let (mut worst_margin, mut worst_dev) = (f64::INFINITY, 0.0f64);
    let mut record = |sol: &Solver, dt: f64, defect: f64, csv: &mut Csv| -> Result<()> {
        let var = sol.state.fields.minus_constant(&reference);
        let mon = lib("energy current", energy_current(&sol.state, sol.thermo(), &var, &k))?;
        worst_margin = worst_margin.min(mon.definiteness_margin);
        worst_dev = worst_dev.max(var.max_abs());
        if sol.steps % o.output_every == 0 || sol.steps == steps {
            csv.row(&[sol.steps as f64, sol.time, dt, var.max_abs(), mon.energy, mon.definiteness_margin, defect]);
        }
        Ok(())
    };
    record(&sol, 0.0, sol.state.normalization_defect(k.c), &mut csv)?;
    for _ in 0..steps {
        let r = lib("step", sol.step(dt))?;
        record(&sol, r.dt, r.normalization_defect, &mut csv)?;
    }

    let report = &mut out.report;
    report.note(format!("steps {steps} dt {} t_end {}", num(dt), num(sol.time)));
    report.push(Check::above("min_definiteness_margin", worst_margin, 0.0));
    if o.data == InitialData::Constant {
        report.push(Check::at_most("constant_state_deviation", worst_dev, o.constant_tol));
    }
    out.file("steps.csv", csv.as_bytes());
    let f = &sol.state.fields;
    let data: Vec<f64> = [&f.eta, &f.p, &f.u[0], &f.u[1], &f.u[2]].into_iter().flatten().copied().collect();
    out.file("final_state.bin", dense_dump(&[5, f.len()], &data));
    Ok(())
}

fn wave(cells: usize, amplitude: f64, o: &Options) -> Result<EulerState> {
    let data = InitialData::SimpleWave { amplitude, mode: 1 };
    lib("initial data", initial_state(PeriodicBox::line(cells, o.grid.length[0]), o.n, o.z, data, &o.cfg.constants))
}

fn verify(o: &Options, report: &mut Report) -> Result<()> {
    let k = o.cfg.constants;
    let cfg = o.cfg;
    let reference = lib("background", background_state(o.n, o.z, &k))?;
    let length = o.grid.length[0];

    let constant = lib("constant state", EulerState::constant(PeriodicBox::line(o.verify_cells, length), reference))?;
    let mut sol = lib("solver", Solver::new(constant, cfg))?;
    for _ in 0..1000 {
        let dt = sol.default_dt();
        lib("step", sol.step(dt))?;
    }
    report.push(Check::at_most(
        "verify_constant_deviation_1000_steps",
        sol.state.fields.minus_constant(&reference).max_abs(),
        o.constant_tol,
    ));

    let start = wave(o.verify_cells, 1e-6, o)?;
    let mut sol = lib("solver", Solver::new(start.clone(), cfg))?;
    let elapsed = 0.5 * length;
    lib("advance", sol.advance_to(elapsed))?;
    let measured = measured_phase_speed(&start, &sol.state, 1, elapsed);
    let expected = k.c * lib("sound speed", eos::sound_speed_sq(o.z))?.sqrt();
    report.push(
        Check::below("verify_sound_speed_relative_error", (measured / expected - 1.0).abs(), o.sound_tol)
            .with_detail(format!("measured {} expected {}", num(measured), num(expected))),
    );

    // Same spatial grid, step halved twice: the successive differences shrink
    // by 2^order.
    let start = wave(64, 0.1, o)?;
    let base_dt = 1.28 * length / (64.0 * k.c);
    let mut finals = Vec::new();
    for m in [1usize, 2, 4] {
        let mut sol = lib("solver", Solver::new(start.clone(), cfg))?;
        for _ in 0..10 * m {
            lib("step", sol.step(base_dt / m as f64))?;
        }
        finals.push(sol.state.fields);
    }
    let e1 = finals[0].add_scaled(-1.0, &finals[1]).max_abs();
    let e2 = finals[1].add_scaled(-1.0, &finals[2]).max_abs();
    report.push(Check::at_least("verify_rk4_order", (e1 / e2).log2(), o.min_time_order));

    let scheme_order = cfg.fd_order.order().min(4) as f64;
    let mut rms = Vec::new();
    let mut divergence = Vec::new();
    for &cells in &o.conservation_cells {
        let mut sol = lib("solver", Solver::new(wave(cells, 0.05, o)?, cfg))?;
        let dt = 0.4 * length / (cells as f64 * k.c);
        let settle = (0.25 * length / (k.c * dt)).round() as usize;
        for _ in 0..settle {
            lib("step", sol.step(dt))?;
        }
        let mut hist: Vec<(EulerState, Vec<CellThermo>)> = Vec::with_capacity(5);
        for l in 0..5 {
            hist.push((sol.state.clone(), sol.thermo().to_vec()));
            if l < 4 {
                lib("step", sol.step(dt))?;
            }
        }
        let h: [&EulerState; 5] = core::array::from_fn(|l| &hist[l].0);
        let th: [&[CellThermo]; 5] = core::array::from_fn(|l| hist[l].1.as_slice());
        rms.push(conservation_residual(h, th, dt, &cfg).rms);
        divergence.push(lib("divergence check", energy_divergence_check(h, th, dt, &reference, &cfg))?.relative_difference);
    }
    let mut worst_rate = f64::INFINITY;
    for i in 1..rms.len() {
        let ratio = o.conservation_cells[i] as f64 / o.conservation_cells[i - 1] as f64;
        worst_rate = worst_rate.min((rms[i - 1] / rms[i]).ln() / ratio.ln());
    }
    report.note(format!("conservation rms {}", rms.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")));
    report.note(format!("energy divergence mismatch {}", divergence.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")));
    report.push(
        Check::at_least("verify_conservation_order", worst_rate, 0.9 * scheme_order)
            .with_detail(format!("scheme order {scheme_order}")),
    );
    let last = divergence.len() - 1;
    report.push(Check::below("verify_energy_divergence_decreasing", divergence[last] / divergence[last - 1], 1.0));

    let mut horizons = [0.0; 2];
    let mut worst_margin = f64::INFINITY;
    for (slot, &delta) in o.horizon_deltas.iter().enumerate() {
        let (fit, margin) = horizon_run(o, delta, &reference, &k)?;
        worst_margin = worst_margin.min(margin);
        horizons[slot] = fit;
        report.note(format!("delta {} horizon {}", num(delta), num(fit)));
    }
    report.push(Check::above("verify_min_margin_any_step", worst_margin, 0.0));
    report.push(Check::within(
        "verify_horizon_ratio",
        horizons[1] / horizons[0],
        o.horizon_ratio.0,
        o.horizon_ratio.1,
    ));
    Ok(())
}

/// Simple wave of amplitude `delta` run to `t = 0.25 L/(c δ)`: fitted
/// horizon and the smallest definiteness margin over all accepted steps.
fn horizon_run(o: &Options, delta: f64, reference: &[f64; 5], k: &PhysicalConstants) -> Result<(f64, f64)> {
    let mut sol = lib("solver", Solver::new(wave(o.horizon_cells, delta, o)?, o.cfg))?;
    let t_end = 0.25 * o.grid.length[0] / (k.c * delta);
    let (mut times, mut energies) = (Vec::new(), Vec::new());
    let mut margin = f64::INFINITY;
    let mut next = 0.0;
    let dt = sol.default_dt();
    while sol.time < t_end {
        let var = sol.state.fields.minus_constant(reference);
        margin = margin.min(lib("energy current", energy_current(&sol.state, sol.thermo(), &var, k))?.definiteness_margin);
        if sol.time >= next {
            times.push(sol.time);
            energies.push(lib("energy", energy_n(&sol.state, sol.thermo(), reference, o.cfg.fd_order, 2, k))?);
            next += t_end / 50.0;
        }
        lib("step", sol.step(dt))?;
    }
    let fit = lib("Riccati fit", riccati_fit(&times, &energies))?;
    if !(fit.c > 0.0 && fit.horizon.is_finite()) {
        bail!("Riccati fit found no growth for delta = {delta}");
    }
    Ok((fit.horizon, margin))
}
