//! Numerical toolkit for three-dimensional magnetic Schrödinger operators
//! `H = (-i∇ - A)² + V` on periodic grids: resolvents and limiting absorption, spectral
//! checks, time evolution by direct and contour routes, and dispersive decay fits.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod decay;
pub mod dense;
pub mod error;
pub mod fit;
pub mod krylov;
pub mod lattice;
pub mod operators;
pub mod potentials;
pub mod propagator;
pub mod quad;
pub mod resolvent;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use krylov::SolveReport;
pub use lattice::{make_grid, Field, Grid, WeightedNormSpec};
pub use operators::{OperatorHandle, OperatorKind};
pub use potentials::{builtin_potential, PotentialData, PotentialKind, PotentialSpec};
