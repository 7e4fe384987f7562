//! `eos-scan`: sign and range scans of the equation of state, the
//! sound-speed bounds at small and large `z`, and the inversion round trip.

use anyhow::{bail, Result};
use relkin::eos::{self, log_grid};

use super::{lib, Outcome};
use crate::config::{Params, CONSTANT_KEYS};
use crate::report::{num, Check, Csv, Report};

pub const KEYS: &[&str] = &[
    "z_min",
    "z_max",
    "points",
    "round_trip_points",
    "round_trip_min",
    "round_trip_max",
    "round_trip_tol",
    "m0",
    "c",
    "k_b",
    "planck",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub z_min: f64,
    pub z_max: f64,
    pub points: usize,
    pub round_trip_points: usize,
    pub round_trip_range: (f64, f64),
    pub round_trip_tol: f64,
    pub constants: relkin::PhysicalConstants,
}

impl Options {
    pub fn from_params(p: &Params) -> Result<Self> {
        p.check_keys("eos-scan", KEYS)?;
        debug_assert!(CONSTANT_KEYS.iter().all(|k| KEYS.contains(k)));
        let o = Self {
            z_min: p.positive("z_min", 0.1)?,
            z_max: p.positive("z_max", 70.0)?,
            points: p.usize("points", 10_000)?,
            round_trip_points: p.usize("round_trip_points", 20)?,
            round_trip_range: (p.positive("round_trip_min", 1e-2)?, p.positive("round_trip_max", 1e2)?),
            round_trip_tol: p.positive("round_trip_tol", 1e-10)?,
            constants: p.constants()?,
        };
        if o.z_min >= o.z_max || o.round_trip_range.0 >= o.round_trip_range.1 {
            bail!("scan ranges must be increasing");
        }
        if o.points < 2 || o.round_trip_points < 2 {
            bail!("scans need at least two points");
        }
        if o.round_trip_range.0 < eos::Z_FLOOR {
            bail!("`round_trip_min` is below the inversion floor z = {}", eos::Z_FLOOR);
        }
        Ok(o)
    }
}

pub fn run(o: &Options) -> Result<Outcome> {
    let mut report = Report::new("eos-scan");
    let scan = lib("conjecture scan", eos::scan_conjectures(o.z_min, o.z_max, o.points))?;
    report.push(Check::at_most(
        "dp_dz_nonnegative_points",
        scan.pressure_violations.len() as f64,
        0.0,
    ));
    report.push(Check::at_most(
        "sound_speed_outside_open_interval_points",
        scan.sound_speed_violations.len() as f64,
        0.0,
    ));
    report.push(Check::at_most("evaluation_failures", scan.evaluation_failures.len() as f64, 0.0));
    report.note(format!("violation_count {}", scan.violation_count()));
    let mut csv = String::new();
    scan.write_csv(&mut csv).expect("writing to a String");

    let cs2 = lib("sound speed", eos::sound_speed_sq(0.05))?;
    report.push(Check::at_most("small_z_sound_speed_gap", (cs2 - 1.0 / 3.0).abs(), 0.0025).with_detail("z = 0.05"));
    let drho = lib("drho/dp", eos::drho_dp(100.0))?;
    report.push(Check::at_most("large_z_drho_dp_gap", (drho - 60.0).abs(), 41.0).with_detail("z = 100"));

    let k = &o.constants;
    let axis = log_grid(o.round_trip_range.0, o.round_trip_range.1, o.round_trip_points);
    let mut rt = Csv::new(&["n", "z", "n_rel_error", "z_rel_error"]);
    let mut worst = 0.0f64;
    for &n in &axis {
        for &z in &axis {
            let t = lib("thermo", eos::thermo_from_nz(n, z, k))?;
            let inv = lib("inversion", eos::invert_eos(t.eta, t.p, k, None))?;
            let (en, ez) = ((inv.n / n - 1.0).abs(), (inv.z / z - 1.0).abs());
            worst = worst.max(en).max(ez);
            rt.row(&[n, z, en, ez]);
        }
    }
    report.push(Check::below("round_trip_relative_error", worst, o.round_trip_tol));
    report.note(format!("c_s^2/c^2(0.05) {}", num(cs2)));
    report.note(format!("drho/dp(100) {}", num(drho)));

    let mut out = Outcome::new(report);
    out.file("eos_scan.csv", csv);
    out.file("eos_round_trip.csv", rt.as_bytes());
    Ok(out)
}
