use super::circuit::{Circuit, Control, Gate};
#[cfg(test)]
use super::state::StateVector;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Real,
    Imag,
}

/// `Re` or `Im` of `<0|P† U P|0>` read from the ancilla `<Z>`.
///
/// The ancilla is an extra qubit appended after the circuit's register, so
/// the tested circuits keep their qubit indices.
pub fn hadamard_test(unitary: &Circuit, state_prep: &Circuit, part: Part) -> Result<f64> {
    let n = unitary.n_qubits.max(state_prep.n_qubits);
    let anc = n;
    let mut c = state_prep.widened(n + 1);
    c.push(Gate::H(anc));
    if part == Part::Imag {
        c.push(Gate::Sdg(anc));
    }
    c.extend(&unitary.controlled(&[Control::one(anc)], n + 1));
    c.push(Gate::H(anc));
    let out = c.run_zero()?;
    // ancilla is the least significant bit
    let (p0, p1) = out
        .amplitudes()
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(p0, p1), (i, a)| {
            if i & 1 == 0 {
                (p0 + a.norm_sqr(), p1)
            } else {
                (p0, p1 + a.norm_sqr())
            }
        });
    Ok(p0 - p1)
}

/// Probability of the all-zeros outcome after running `circuit` on `|0>`.
pub fn zero_probability(circuit: &Circuit) -> Result<f64> {
    Ok(circuit.run_zero()?.probability(0))
}

/// `<0|P† U P|0>` from the two real-valued tests.
pub fn hadamard_expectation(unitary: &Circuit, state_prep: &Circuit) -> Result<num_complex::Complex64> {
    Ok(num_complex::Complex64::new(
        hadamard_test(unitary, state_prep, Part::Real)?,
        hadamard_test(unitary, state_prep, Part::Imag)?,
    ))
}

/// Single-qubit Pauli gates realising a word (phase excluded).
pub fn pauli_circuit(word: &crate::pauli_lcu::PauliWord) -> Circuit {
    use crate::pauli_lcu::Pauli;
    let mut c = Circuit::new(word.n_qubits());
    for (q, p) in word.paulis().iter().enumerate() {
        match p {
            Pauli::I => {}
            Pauli::X => {
                c.push(Gate::X(q));
            }
            Pauli::Y => {
                c.push(Gate::Y(q));
            }
            Pauli::Z => {
                c.push(Gate::Z(q));
            }
        }
    }
    c
}

/// Dense reference for tests: `<psi|W|psi>`.
#[cfg(test)]
pub(crate) fn dense_expectation(word: &crate::pauli_lcu::PauliWord, psi: &StateVector) -> num_complex::Complex64 {
    let w = word.matrix();
    let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
    (v.adjoint() * w * &v)[(0, 0)]
}
