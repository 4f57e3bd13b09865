//! Numerical-dissipation laboratory for nodal discontinuous Galerkin
//! schemes: a 1D von Neumann analyser and a 3D periodic DGSEM solver for
//! the compressible Navier-Stokes equations.

pub mod basis;
pub mod cli;
pub mod dgsem3d;
pub mod diagnostics;
pub mod linalg;
pub mod physics3d;
pub mod vn1d;
