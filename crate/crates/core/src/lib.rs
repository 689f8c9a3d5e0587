//! Adaptive Crouzeix–Raviart finite elements for the two-dimensional
//! Stokes problem.
//!
//! The crate covers the whole adaptive loop (solve, estimate, mark,
//! refine) together with the inter-mesh transfer operators and numerical
//! monitors used to observe quasi-orthogonality, estimator reduction,
//! contraction, discrete reliability and convergence rates.

pub mod adaptive;
pub mod assembly;
pub mod cli;
pub mod counterexample;
pub mod error;
pub mod estimator;
pub mod mesh;
pub mod norms;
pub mod output;
pub mod problem;
pub mod quadrature;
pub mod sparse;
pub mod spaces;
pub mod transfer;
pub mod verify;

pub use error::{Error, Result};
pub use mesh::{Point, Triangulation};
