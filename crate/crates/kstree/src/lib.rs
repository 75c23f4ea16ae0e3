//! Boundary null-control of the linear Kuramoto-Sivashinsky operator
//! `y_t + λ y_xx + y_xxxx = 0` on star-shaped trees.
//!
//! The crate is organised bottom-up:
//!
//! * [`tree_model`]: configuration and exact closed-form calculus on edges.
//! * [`scalar_spectra`]: eigenpairs of the four scalar fourth-order problems.
//! * [`critical_sets`]: membership tests for the exceptional λ values.
//! * [`graph_spectra`]: eigenspaces of the tree operators and boundary traces.
//! * [`moment_control`]: biorthogonal families, moment targets, control synthesis.
//! * [`pde_sim`]: exact modal simulation of the controlled system.
//!
//! Work that splits into independent pieces (root brackets, eigenspaces, modes)
//! is dispatched through [`parallel::Parallelism`]; with the `parallel` feature
//! disabled every path runs sequentially.

pub mod critical_sets;
pub mod error;
pub mod graph_spectra;
pub mod moment_control;
pub mod parallel;
pub mod pde_sim;
pub mod quadrature;
pub mod scalar_spectra;
pub mod tree_model;

pub use error::{Error, Result, UncontrollableDirection};
pub use parallel::Parallelism;
pub use tree_model::{EdgeFunction, GraphFunction, Model, StarTreeConfig};
