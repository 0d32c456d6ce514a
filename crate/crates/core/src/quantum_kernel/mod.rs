//! Dense statevector simulation.
//!
//! Basis index bit `n - 1 - q` holds qubit `q`, so qubit 0 is the most
//! significant bit. Circuits on `n` qubits run unchanged on wider registers.

mod ansatz;
mod circuit;
mod hadamard;
mod sampling;
mod state;
mod state_prep;

pub use ansatz::{ansatz, AnsatzLayout, AnsatzSpec, Entangler, DEFAULT_LAYERS};
pub use circuit::{Circuit, Control, Gate};
pub use hadamard::{hadamard_expectation, hadamard_test, pauli_circuit, zero_probability, Part};
pub use sampling::{sample_expectation, Shots};
pub use state::StateVector;
pub use state_prep::{prepare_b_handcrafted, prepare_blocks, prepare_state_general};

/// Runs a circuit on `input`.
pub fn run_circuit(circuit: &Circuit, input: &StateVector) -> crate::Result<StateVector> {
    circuit.run(input)
}
