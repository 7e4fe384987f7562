//! `maxwellian-moments`: quadrature moments of Maxwellians against their
//! closed forms, and Lorentz covariance of the boosted ones.

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relkin::grid::GridSpec;
use relkin::maxwellian::{
    boost_matrix, mat_vec, moment_discrepancy, moments, sample_maxwellian, transform_tensor, FourVelocity,
    MaxwellianParams, MomentSet,
};

use super::{lib, Outcome};
use crate::config::Params;
use crate::report::{Check, Csv, Report};

pub const KEYS: &[&str] = &["grid", "tol", "random_pairs", "boost", "m0", "c", "k_b", "planck"];

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub grid: GridSpec,
    pub tol: f64,
    /// Extra random `(n, z, u)` samples drawn from the run seed.
    pub random_pairs: usize,
    /// `u¹/c` of the boosted case.
    pub boost: f64,
    pub constants: relkin::PhysicalConstants,
}

impl Options {
    pub fn from_params(p: &Params) -> Result<Self> {
        p.check_keys("maxwellian-moments", KEYS)?;
        let o = Self {
            grid: p.grid("grid", GridSpec::DEFAULT)?,
            tol: p.positive("tol", 1e-6)?,
            random_pairs: p.usize("random_pairs", 2)?,
            boost: p.f64("boost", 0.1)?,
            constants: p.constants()?,
        };
        if o.boost.abs() >= 1.0 {
            bail!("`boost` is u¹/c and must be below 1 in magnitude");
        }
        Ok(o)
    }
}

/// Eight rest-frame `(n, z)` pairs spanning both regimes, plus the boosted
/// one.
pub const FIXED_PAIRS: [(f64, f64); 8] = [
    (0.01, 0.1),
    (0.01, 5.0),
    (1.0, 0.2),
    (1.0, 1.0),
    (1.0, 20.0),
    (100.0, 0.5),
    (100.0, 3.0),
    (10.0, 60.0),
];

fn quadrature_moments(m: &MaxwellianParams, spec: GridSpec) -> relkin::Result<MomentSet> {
    let grid = m.grid(spec)?;
    moments(&sample_maxwellian(m, &grid), &grid, &m.constants)
}

pub fn run(o: &Options, seed: u64) -> Result<Outcome> {
    let k = o.constants;
    let c = k.c;
    let mut cases: Vec<(f64, f64, [f64; 3])> = FIXED_PAIRS.iter().map(|&(n, z)| (n, z, [0.0; 3])).collect();
    // `u¹ = boost·c` as the spatial part of the four-velocity.
    cases.push((1.0, 1.0, [o.boost * c, 0.0, 0.0]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..o.random_pairs {
        let n = 10f64.powf(rng.random_range(-2.0..2.0));
        let z = 10f64.powf(rng.random_range(-0.5..1.5));
        let u = [
            c * rng.random_range(-0.12..0.12),
            c * rng.random_range(-0.12..0.12),
            c * rng.random_range(-0.12..0.12),
        ];
        cases.push((n, z, u));
    }

    let mut report = Report::new("maxwellian-moments");
    let mut csv = Csv::new(&["n", "z", "u1", "u2", "u3", "rel_I", "rel_T", "rel_S", "truncation"]);
    let mut worst = 0.0f64;
    for (n, z, u) in &cases {
        let m = lib("Maxwellian", MaxwellianParams::new(*n, *z, FourVelocity::from_spatial(*u, c), k))?;
        let q = lib("moments", quadrature_moments(&m, o.grid))?;
        let exact = lib("closed forms", m.closed_form_moments())?;
        let (di, dt, ds) = moment_discrepancy(&q, &exact);
        worst = worst.max(di).max(dt).max(ds);
        csv.row(&[*n, *z, u[0], u[1], u[2], di, dt, ds, q.truncation]);
    }
    report.push(Check::below("moment_relative_discrepancy", worst, o.tol).with_detail(format!("{} cases", cases.len())));

    // Covariance: boost the rest-frame quadrature moments and compare them
    // with the quadrature moments of the boosted Maxwellian.
    let u = FourVelocity::from_spatial([o.boost * c, 0.0, 0.0], c);
    let rest = lib("Maxwellian", MaxwellianParams::rest(1.0, 1.0, k))?;
    let moving = lib("Maxwellian", MaxwellianParams::new(1.0, 1.0, u, k))?;
    let q_rest = lib("moments", quadrature_moments(&rest, o.grid))?;
    let q_moving = lib("moments", quadrature_moments(&moving, o.grid))?;
    let l = boost_matrix(&u, c);
    let boosted = MomentSet {
        i: mat_vec(&l, &q_rest.i),
        t: transform_tensor(&l, &q_rest.t),
        s: mat_vec(&l, &q_rest.s),
        truncation: q_rest.truncation,
    };
    let (di, dt, ds) = moment_discrepancy(&boosted, &q_moving);
    report.push(Check::below("lorentz_covariance_discrepancy", di.max(dt).max(ds), o.tol));

    let mut out = Outcome::new(report);
    out.file("moments.csv", csv.as_bytes());
    Ok(out)
}
