//! Steady Stokes flow and convection-diffusion-sorption in thin tube networks.
//!
//! The crate carries the numerical core: tube-graph geometry, a small P1/P2
//! finite element toolkit with a banded direct solver, the 2D reference
//! solvers, the asymptotic 1D network model with its transverse correctors,
//! boundary-layer cell problems, and the hybrid 1D/2D decomposition solver.
//!
//! It is `no_std` (with `alloc`); file formats, timing and the command line
//! live in the companion `tubeflow` crate.
#![no_std]
// `Float` imports go unused when dev-dependencies switch on num-traits/std.
#![allow(unused_imports)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod asym1d;
pub mod blcells;
pub mod error;
pub mod femcore;
pub mod geometry;
pub mod mapdd;
pub mod stokes2d;
pub mod transport2d;
pub mod tubegraph;

pub use error::{Error, Result};
