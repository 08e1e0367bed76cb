//! Reflected backward stochastic differential equations driven by a marked
//! point process and a Brownian motion, solved exactly on finite scenario
//! trees.
//!
//! The crate is organised bottom-up:
//!
//! - [`mpp`]: mark sets, compensators `A` with mark kernels `φ`, forward path
//!   simulation and compensated integrals.
//! - [`lattice`]: the non-recombining scenario tree (discrete filtration),
//!   conditional expectations and martingale-representation extraction.
//! - [`snell`]: Snell envelope, Doob–Meyer split and the jump-support check.
//! - [`rbsde`]: the reflected equation with given generators, the MPP-only
//!   mode, Skorohod / equation-residual checks and the a priori majorant.
//! - [`picard`]: state-dependent generators through the frozen-argument
//!   contraction map, monitored in the composite weighted norm.
//! - [`stopping`]: stopping rules, rewards, the brute-force oracle,
//!   ε-optimal and smallest optimal stopping times.
//! - [`wnorm`]: weighted `L²` norms on trees.
//! - [`config`], [`run`], [`verify`]: run configuration, orchestration with
//!   persisted artifacts, and the property-based verification suite.

pub mod config;
pub mod instances;
pub mod lattice;
pub mod mpp;
pub mod picard;
pub mod rbsde;
pub mod run;
pub mod snell;
pub mod stopping;
pub mod tol;
pub mod verify;
pub mod wnorm;

pub use lattice::{MarkProcess, NodeId, NodeProcess, ScenarioTree, TimeGrid, TreeOptions};
pub use mpp::{CompensatorCurve, CompensatorSpec, MarkKernel, MarkSet, MppPath};
pub use picard::{ContractionConfig, PicardTrace};
pub use rbsde::{AffineDriver, Driver, FrozenGenerators, GeneratorSpec, Lipschitz, RbsdeSolution};
pub use snell::SnellDecomposition;
pub use stopping::{StoppingCertificate, StoppingRule};
pub use wnorm::{NormKind, WeightedNorm};
