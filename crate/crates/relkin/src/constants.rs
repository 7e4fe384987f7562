//! Physical constants and the dimensionless unit system.

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

/// Rest mass, speed of light, Boltzmann and Planck constants.
///
/// Every formula in the crate takes these explicitly. [`PhysicalConstants::UNIT`]
/// sets all four to one, which is the mode the tests run in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub m0: f64,
    pub c: f64,
    pub k_b: f64,
    pub h: f64,
}

impl PhysicalConstants {
    pub const UNIT: Self = Self {
        m0: 1.0,
        c: 1.0,
        k_b: 1.0,
        h: 1.0,
    };

    pub fn new(m0: f64, c: f64, k_b: f64, h: f64) -> Result<Self> {
        for (what, v) in [("m0", m0), ("c", c), ("k_b", k_b), ("h", h)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain { what, value: v });
            }
        }
        Ok(Self { m0, c, k_b, h })
    }

    /// Rest energy `m0 c^2`.
    pub fn rest_energy(&self) -> f64 {
        self.m0 * self.c * self.c
    }

    /// Momentum unit `m0 c`.
    pub fn mc(&self) -> f64 {
        self.m0 * self.c
    }

    /// Temperature for a given `z = m0 c^2 / (k_B theta)`.
    pub fn theta_from_z(&self, z: f64) -> f64 {
        self.rest_energy() / (self.k_b * z)
    }

    pub fn z_from_theta(&self, theta: f64) -> f64 {
        self.rest_energy() / (self.k_b * theta)
    }

    /// Mass-shell energy component `P^0 = sqrt(m0^2 c^2 + |P|^2)`.
    pub fn p0(&self, p: &[f64; 3]) -> f64 {
        let mc = self.mc();
        (mc * mc + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::UNIT
    }
}
