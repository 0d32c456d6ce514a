//! Bi-level variational quantum PDE-constrained design optimization.
//!
//! A 1D heat-transfer design problem is discretized into space-time linear
//! systems, solved by a simulated variational quantum linear solver, scored
//! by a design cost, and optimized with Gaussian-process Bayesian
//! optimization. Classical twins of each stage serve as oracles.

// Negated float comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes_opt;
pub mod design_objective;
pub mod error;
pub mod error_bounds;
pub mod pauli_lcu;
pub mod pde_model;
pub mod quantum_kernel;
pub mod vqls;

pub use error::{Error, Result};
pub use pauli_lcu::{LcuDecomposition, PauliWord, SeparableLcu};
pub use pde_model::{DesignBounds, DesignPoint, HeatProblem, LinearSystem, Scheme, Trajectory};
pub use quantum_kernel::{AnsatzSpec, Circuit, Gate, Shots, StateVector};
