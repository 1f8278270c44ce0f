//! Core solvers and diagnostics for porosity–pressure flow in porous media.
//!
//! The crate models the time-dependent interaction between the porosity of a
//! deformable rock matrix and the effective fluid pressure, in a purely
//! viscous regime (instantaneous elliptic pressure balance) and in a
//! viscoelastic regime (parabolic pressure evolution). The machinery is built
//! around mild/weak formulations so that porosities with jump discontinuities
//! are first-class inputs.
//!
//! Layout:
//! - [`model`]: coefficient laws (permeability, bulk viscosity, decompaction
//!   weakening), the log transform and structural validation.
//! - [`grid`]: structured cell-centered meshes, fields, labeled partitions and
//!   conservative two-point flux stencils.
//! - [`norms`]: discrete `L^p`, `BV`, `W^{1,2}` and parabolic Hölder
//!   functionals plus time-series containers.
//! - [`elliptic`]: damped Newton energy minimization for the instantaneous
//!   pressure equation.
//! - [`viscous`]: explicit Euler stepping in `BV`, Picard fixed-point
//!   iteration, safe horizons and blow-up continuation for the viscous limit.
//! - [`viscoelastic`]: backward Euler / mild-integral coupling, the global
//!   fixed-point operator and a spectral Galerkin reference solver.
//! - [`harness`]: scripted property studies (convergence, contraction
//!   scaling, jump invariance, growth envelopes).
//!
//! The crate is `no_std` (with `alloc`); all I/O lives in the companion
//! `porowave` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod elliptic;
pub mod grid;
pub mod harness;
pub(crate) mod math;
pub mod model;
pub mod norms;
pub mod report;
pub mod viscoelastic;
pub mod viscous;

pub use grid::{Field, Grid, Partition};
pub use model::{CoefficientSet, Variant};
pub use norms::TimeSeries;
pub use report::{RunReport, Termination};
