//! Automatic variationally stable finite elements (AVS-FE) for 2D
//! convection-diffusion.
//!
//! Trial functions for the primal variable `u` and the flux `q = D grad u`
//! are continuous tensor-product Lagrange polynomials on quadrilaterals.
//! Each trial function is paired with an optimal test function obtained from
//! an element-local Riesz problem in a broken, `h`-weighted `H^1 x (L^2)^2`
//! space, which makes the condensed global system symmetric positive
//! definite regardless of the Peclet number.

pub mod analysis;
pub mod config;
pub mod error;
pub mod fe_space;
pub mod local;
pub mod mesh;
pub mod problem;
pub mod solver;
pub mod study;

pub use error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];
