//! Simulation of a crystal of Mn₁₂-Ac molecular magnets driven through
//! avoided level crossings by a swept longitudinal field while coupled to a
//! single mode of a resonant microwave cavity.
//!
//! The crate is organised bottom-up:
//!
//! * [`spin`] and [`eigen`]: spin operators, the 21×21 spin Hamiltonian and a
//!   cyclic Jacobi eigensolver.
//! * [`crossings`]: analytic level crossings of the diagonal Hamiltonian and
//!   numerically located avoided crossings of the full one.
//! * [`reduction`]: block diagonalisation onto a level pair, the effective
//!   two-level Hamiltonian and the transverse coupling `s`.
//! * [`lzs`]: Landau–Zener–Stückelberg probabilities, thermal populations,
//!   staircase hysteresis and the anisotropy fit.
//! * [`dynamics`]: dimensionless cavity Bloch equations, maser rate equations
//!   and the damped-pendulum solution.
//! * [`observables`]: dM/dB₀ peaks, the minimal-T₀ temperature scan and
//!   emitted energy.
//! * [`scenario`] and [`runner`]: the config format and the CLI driver.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod crossings;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod lzs;
pub mod nelder_mead;
pub mod observables;
pub mod ode;
pub mod reduction;
pub mod runner;
pub mod scenario;
pub mod spin;

pub use error::{Error, Result};
