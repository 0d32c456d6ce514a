use serde::{Deserialize, Serialize};

use super::circuit::{Circuit, Gate};
use crate::error::{Error, Result};

/// Two-qubit gate placed between neighbouring qubits in each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entangler {
    Swap,
    Cnot,
}

/// Layered real-amplitude ansatz.
///
/// Each layer is an optional H column, a nearest-neighbour entangler ladder
/// `(0,1), (1,2), …`, then an RY column. With `initial_ry` an extra RY column
/// precedes the first layer. Every gate has a real matrix, so output
/// amplitudes are real for all angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub layers: usize,
    pub entangler: Entangler,
    pub hadamard_column: bool,
    pub initial_ry: bool,
}

impl AnsatzSpec {
    /// Default layout: leading RY column, then CNOT ladder + RY per layer.
    pub fn new(n_qubits: usize, layers: usize) -> Self {
        Self {
            n_qubits,
            layers,
            entangler: Entangler::Cnot,
            hadamard_column: false,
            initial_ry: true,
        }
    }

    /// H column, SWAP ladder, RY column per layer.
    pub fn swap_layout(n_qubits: usize, layers: usize) -> Self {
        Self {
            n_qubits,
            layers,
            entangler: Entangler::Swap,
            hadamard_column: true,
            initial_ry: false,
        }
    }

    pub fn n_params(&self) -> usize {
        (self.layers + usize::from(self.initial_ry)) * self.n_qubits
    }

    pub fn circuit(&self, theta: &[f64]) -> Result<Circuit> {
        if theta.len() != self.n_params() {
            return Err(Error::ParamLength {
                expected: self.n_params(),
                got: theta.len(),
            });
        }
        if let Some(bad) = theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidProblem(format!("non-finite angle {bad}")));
        }
        let n = self.n_qubits;
        let mut c = Circuit::new(n);
        let mut columns = theta.chunks(n);
        if self.initial_ry {
            for (q, t) in columns.next().unwrap().iter().enumerate() {
                c.push(Gate::Ry(q, *t));
            }
        }
        for col in columns {
            if self.hadamard_column {
                for q in 0..n {
                    c.push(Gate::H(q));
                }
            }
            for q in 0..n.saturating_sub(1) {
                c.push(match self.entangler {
                    Entangler::Swap => Gate::Swap(q, q + 1),
                    Entangler::Cnot => Gate::cnot(q, q + 1),
                });
            }
            for (q, t) in col.iter().enumerate() {
                c.push(Gate::Ry(q, *t));
            }
        }
        Ok(c)
    }
}

/// Ansatz shape independent of register size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnsatzLayout {
    pub layers: usize,
    pub entangler: Entangler,
    pub hadamard_column: bool,
    pub initial_ry: bool,
}

impl Default for AnsatzLayout {
    fn default() -> Self {
        let s = AnsatzSpec::new(0, DEFAULT_LAYERS);
        Self {
            layers: s.layers,
            entangler: s.entangler,
            hadamard_column: s.hadamard_column,
            initial_ry: s.initial_ry,
        }
    }
}

impl AnsatzLayout {
    pub fn spec(&self, n_qubits: usize) -> AnsatzSpec {
        AnsatzSpec {
            n_qubits,
            layers: self.layers,
            entangler: self.entangler,
            hadamard_column: self.hadamard_column,
            initial_ry: self.initial_ry,
        }
    }
}

pub const DEFAULT_LAYERS: usize = 2;

/// `V(θ)` for the default layout.
pub fn ansatz(theta: &[f64], n_qubits: usize, layers: usize) -> Result<Circuit> {
    AnsatzSpec::new(n_qubits, layers).circuit(theta)
}
