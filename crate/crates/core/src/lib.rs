//! Numerical laboratory for singular-degenerate stochastic porous-medium
//! equations with multivalued drift.
//!
//! The crate assembles, layer by layer, everything needed to study the
//! regularized equation `dX = eps Delta X dt + Delta phi^eps(X) dt + B dW`
//! on an interval with zero Dirichlet boundary and to verify the
//! variational-inequality formulation its vanishing-viscosity limit
//! satisfies:
//!
//! * [`convex`] — potentials, subdifferentials, resolvents, Yosida and
//!   Moreau regularizations, conjugates and recession functions;
//! * [`grid`] — discrete L2 / H1_0 / H^-1 machinery on uniform Dirichlet
//!   grids;
//! * [`measures`] — Radon measures as density plus atoms, convex functions
//!   of measures, the total-variation energy functional and the
//!   mollify-and-shift approximation;
//! * [`noise`] — truncated cylindrical Wiener increments and the diffusion
//!   operator together with its measured operator-norm conditions;
//! * [`solver`] — implicit monotone time stepping and Monte-Carlo path
//!   ensembles with energy statistics;
//! * [`svi`] — test processes, both sides of the variational inequality,
//!   and contraction / regularization-rate statistics;
//! * [`config`] / [`io`] — validating TOML loaders and structured-text
//!   serialization;
//! * [`samples`] — randomized fixtures shared by the test suites and demos.

// validation guards use `!(x > 0.0)` on purpose: NaN must be rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod convex;
pub mod grid;
pub mod io;
pub mod measures;
pub mod noise;
pub mod samples;
pub mod solver;
pub mod svi;

pub use convex::{GrowthClass, Potential, RegularizedPotential, SubdiffInterval};
pub use grid::{DirichletLaplacian, Field, Grid};
pub use measures::{BoundaryCover, EnergyFunctional, RadonMeasure, ShiftMollifyParams};
pub use noise::{NoiseModel, WienerIncrement};
pub use solver::{PathEnsemble, SolverConfig, Stepper};
pub use svi::{SviReport, TestProcess, TestProcessKind};
