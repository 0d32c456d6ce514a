//! Shared fixtures for the benchmarks.

use bvqpco_core::design_objective::rhs_circuit;
use bvqpco_core::pauli_lcu::{recombine, SeparableLcu};
use bvqpco_core::pde_model::{DesignPoint, HeatProblem, Scheme};
use bvqpco_core::vqls::VqlsProblem;

/// Five-qubit implicit system of the reference study at `design`.
pub fn reference_vqls(design: &DesignPoint) -> VqlsProblem {
    let p = HeatProblem::reference();
    let cache = SeparableLcu::for_problem(&p, Scheme::Implicit).expect("reference grid is valid");
    VqlsProblem::new(
        recombine(&cache, &p, design),
        rhs_circuit(&p, design).expect("design in box"),
    )
    .expect("consistent registers")
}

/// Deterministic pseudo-random values in `[0, 1)`.
pub fn lcg(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}
