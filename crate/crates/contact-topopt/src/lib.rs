//! Two-dimensional finite-element toolkit for frictional elastic contact and
//! structural optimization.
//!
//! The core problem is a plane-strain elastic body resting on a rigid
//! foundation through a frictional interface.  The friction law is a
//! slip-rate-weakening bound (static bound decaying exponentially toward a
//! kinetic bound), smoothed near zero slip so that the state problem becomes a
//! regularized nonlinear variational equation solvable by damped Newton.
//!
//! On top of the state solver sit four design loops:
//!
//! * [`shape`] — boundary-variation shape optimization driven by a volumetric
//!   shape derivative (or a boundary pressure for compliance) smoothed into a
//!   descent velocity by an H1 gradient flow,
//! * [`phase`] — two phase-field methods on a fixed design grid: a
//!   reaction–diffusion (Allen–Cahn) flow with a tilted double well, and a
//!   fourth-order flow with a Willmore-type regularizer,
//! * [`topo`] — a topological-derivative-driven variant of the Allen–Cahn
//!   flow using the polarization tensor of a small circular inclusion.
//!
//! Infrastructure lives in [`mesh`] (structured generators, motion,
//! smoothing), [`fem`] (P1 assembly, constraints, sparse direct solver),
//! [`config`]/[`driver`] (key=value run configuration), and [`history`]/
//! [`vtk`] (CSV convergence logs and legacy-VTK field snapshots).

pub mod config;
pub mod driver;
pub mod error;
pub mod fem;
pub mod history;
pub mod material;
pub mod mesh;
pub mod phase;
pub mod shape;
pub mod solver;
pub mod topo;
pub mod vtk;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
