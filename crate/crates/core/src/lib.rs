//! Numerical toolkit for stochastic currents of fractional Brownian motion,
//! built on white-noise (S-transform) calculus: fractional operators M±^H,
//! Donsker-delta and current S-transforms, Hida-membership predicates, and
//! Wiener-chaos kernel pairings, each cross-verified against independent
//! quadrature and Monte Carlo oracles.

pub mod error;
pub mod numerics;
pub mod par;
pub mod rng;

pub mod frac_ops;
pub mod gaussian;
pub mod stransform;
pub mod current;
pub mod chaos;
pub mod cli;

pub use error::{Error, Result};
