//! `bessel-verify`: recurrence, derivative identity, monotonicity in the
//! order and the two-sided `K₁/K₂` bounds.

use anyhow::{bail, Result};
use relkin::bessel::{bessel_ratio, k_j};
use relkin::eos::log_grid;

use super::{lib, Outcome};
use crate::config::Params;
use crate::report::{Check, Csv, Report};

pub const KEYS: &[&str] = &[
    "z_min",
    "z_max",
    "points",
    "j_max",
    "tol",
    "small_z_max",
    "large_z_min",
    "ratio_z_max",
    "ratio_points",
    "fault",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub z_min: f64,
    pub z_max: f64,
    pub points: usize,
    pub j_max: u32,
    pub tol: f64,
    pub small_z_max: f64,
    pub large_z_min: f64,
    pub ratio_z_max: f64,
    pub ratio_points: usize,
    /// Replaces `2j` by `2j + 1` in the recurrence (negative control).
    pub wrong_recursion: bool,
}

impl Options {
    pub fn from_params(p: &Params) -> Result<Self> {
        p.check_keys("bessel-verify", KEYS)?;
        let o = Self {
            z_min: p.positive("z_min", 0.01)?,
            z_max: p.positive("z_max", 200.0)?,
            points: p.usize("points", 200)?,
            j_max: p.usize("j_max", 5)? as u32,
            tol: p.positive("tol", 1e-10)?,
            small_z_max: p.positive("small_z_max", 0.1)?,
            large_z_min: p.positive("large_z_min", 10.0)?,
            ratio_z_max: p.positive("ratio_z_max", 500.0)?,
            ratio_points: p.usize("ratio_points", 100)?,
            wrong_recursion: match p.string("fault", "none") {
                "none" => false,
                "recursion" => true,
                other => bail!("`fault`: unknown fault `{other}` (none, recursion)"),
            },
        };
        if o.z_min >= o.z_max || o.large_z_min >= o.ratio_z_max {
            bail!("scan ranges must be increasing");
        }
        if o.points < 2 || o.ratio_points < 2 {
            bail!("scans need at least two points");
        }
        if o.j_max < 1 || o.j_max + 1 > relkin::bessel::MAX_ORDER {
            bail!("`j_max` must lie in 1..={}", relkin::bessel::MAX_ORDER - 1);
        }
        Ok(o)
    }
}

/// `d/dz (K_j(z)/z^j)` by Richardson extrapolation of centered differences
/// with steps `h, h/2, h/4, h/8, h/16`, `h = min(z, 2)/16`: small against
/// both the `z^{-2j}` singularity and the `e^{-z}` decay scale.
pub fn scaled_derivative(j: u32, z: f64) -> relkin::Result<f64> {
    let f = |x: f64| -> relkin::Result<f64> { Ok(k_j(j, x)? / x.powi(j as i32)) };
    const LEVELS: usize = 5;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    let mut h = z.min(2.0) / 16.0;
    for i in 0..LEVELS {
        table[i][0] = (f(z + h)? - f(z - h)?) / (2.0 * h);
        let mut factor = 4.0;
        for m in 1..=i {
            table[i][m] = table[i][m - 1] + (table[i][m - 1] - table[i - 1][m - 1]) / (factor - 1.0);
            factor *= 4.0;
        }
        h /= 2.0;
    }
    Ok(table[LEVELS - 1][LEVELS - 1])
}

pub fn run(o: &Options) -> Result<Outcome> {
    let mut report = Report::new("bessel-verify");
    let grid = log_grid(o.z_min, o.z_max, o.points);
    let mut identities = Csv::new(&["j", "z", "recursion_residual", "derivative_residual"]);
    let (mut rec_worst, mut der_worst) = (0.0f64, 0.0f64);
    let mut order_violations = 0usize;
    for j in 1..=o.j_max {
        for &z in &grid {
            let (a, b, c) = (lib("K", k_j(j - 1, z))?, lib("K", k_j(j, z))?, lib("K", k_j(j + 1, z))?);
            let two_j = if o.wrong_recursion { 2.0 * j as f64 + 1.0 } else { 2.0 * j as f64 };
            let rec = (c - two_j * b / z - a).abs() / c;
            let exact = -c / z.powi(j as i32);
            let der = (lib("K derivative", scaled_derivative(j, z))? - exact).abs() / exact.abs();
            rec_worst = rec_worst.max(rec);
            der_worst = der_worst.max(der);
            if !(a < b && b < c) {
                order_violations += 1;
            }
            identities.row(&[j as f64, z, rec, der]);
        }
    }
    report.push(Check::below("recursion_residual", rec_worst, o.tol));
    report.push(Check::below("derivative_identity_residual", der_worst, o.tol));
    report.push(Check::at_most("order_monotonicity_violations", order_violations as f64, 0.0));

    let mut ratios = Csv::new(&["z", "ratio", "deviation", "bound"]);
    let mut small_violations = 0usize;
    let mut small_worst = 0.0f64;
    for i in 1..=o.ratio_points {
        let z = o.small_z_max * i as f64 / o.ratio_points as f64;
        let r = lib("K1/K2", bessel_ratio(z))?;
        let dev = (r - z / 2.0).abs();
        let bound = 2.0 * z * z;
        small_worst = small_worst.max(dev / bound);
        if dev > bound {
            small_violations += 1;
        }
        ratios.row(&[z, r, dev, bound]);
    }
    let mut large_violations = 0usize;
    let mut large_worst = 0.0f64;
    for &z in &log_grid(o.large_z_min, o.ratio_z_max, o.ratio_points) {
        let r = lib("K1/K2", bessel_ratio(z))?;
        let dev = (r - (1.0 - 1.5 / z + 15.0 / (8.0 * z * z))).abs();
        let bound = 16.0 / (z * z * z);
        large_worst = large_worst.max(dev / bound);
        if dev > bound {
            large_violations += 1;
        }
        ratios.row(&[z, r, dev, bound]);
    }
    report.push(
        Check::at_most("small_z_ratio_bound_violations", small_violations as f64, 0.0)
            .with_detail(format!("worst deviation/bound {}", crate::report::num(small_worst))),
    );
    report.push(
        Check::at_most("large_z_ratio_bound_violations", large_violations as f64, 0.0)
            .with_detail(format!("worst deviation/bound {}", crate::report::num(large_worst))),
    );
    let mut out = Outcome::new(report);
    out.file("bessel_identities.csv", identities.as_bytes());
    out.file("ratio_bounds.csv", ratios.as_bytes());
    Ok(out)
}
