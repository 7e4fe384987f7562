//! Numerics for relativistic kinetic theory near the hydrodynamic limit.
//!
//! The crate covers the chain that links the relativistic Boltzmann equation
//! to the relativistic Euler equations:
//!
//! * [`bessel`]: modified Bessel functions `K_j`, certified asymptotics and the
//!   `K_1/K_2` ratio that drives the equation of state.
//! * [`eos`]: the kinetic equation of state, its inversion `(eta, p) -> (n, z)`
//!   and the sound speed.
//! * [`maxwellian`]: Jüttner distributions, momentum grids and moments.
//! * [`collision`]: the collision operator in center-of-momentum form, the
//!   collision frequency and the linearized operator with its null space.
//! * [`euler`]: a method-of-lines solver for the Euler system in
//!   `(eta, p, u)` variables with energy-current monitors.
//! * [`hilbert`]: the first two orders of the Hilbert expansion and the
//!   defect of the truncated ansatz.
//!
//! The crate is `no_std` + `alloc` when built without the `std` feature.
//! Parallel loops (feature `parallel`) always reduce in index order, so results
//! do not depend on the thread count.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bessel;
pub mod collision;
pub mod constants;
pub mod eos;
mod error;
pub mod euler;
pub mod grid;
pub mod hilbert;
pub mod maxwellian;
mod par;
pub mod quadrature;

pub use constants::PhysicalConstants;
pub use error::{Error, Result};
