//! Design cost of a coating `(l, α)` and its quantum and classical evaluators.
//!
//! The cost is `w1 (Δt/P) Σ_k T_{N,k} / T0(l) + w2 (l/l_min - 1)² + w3 (α/α_max - 1)²`
//! where `T_{N,k}` is the interface temperature at time level `k = 1..M`. The
//! temperature ratio only needs two inner products with the solution, so it
//! is unaffected by the unknown normalization of a quantum state.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli_lcu::{pad_system, recombine, SeparableLcu};
use crate::pde_model::{
    assemble, assemble_rhs, classical_solve, CostWeights, DesignBounds, DesignPoint, HeatProblem, Scheme,
};
use crate::quantum_kernel::{prepare_b_handcrafted, prepare_state_general, Circuit, StateVector};
use crate::vqls::{CostVariant, Vqls, VqlsConfig, VqlsProblem, VqlsResult};

/// `|<φ_n|ψ>|` below this means the state carries no usable initial condition.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;

/// Selectors and weights defining the design cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    /// Ones at the interface node of every time level.
    pub phi_d: DVector<f64>,
    /// One at the interface node of the initial condition.
    pub phi_n: DVector<f64>,
    pub weights: CostWeights,
    /// `‖φ_d‖ / ‖φ_n‖`.
    pub norm_ratio: f64,
    pub dt: f64,
    /// Final time `P`.
    pub horizon: f64,
    pub bounds: DesignBounds,
}

pub fn build_phi(problem: &HeatProblem) -> ObjectiveSpec {
    let (n, m) = (problem.n_x, problem.n_t);
    let mut phi_d = DVector::zeros(n * m);
    for k in 1..=m {
        phi_d[k * n - 1] = 1.0;
    }
    let mut phi_n = DVector::zeros(n * m);
    phi_n[n - 1] = 1.0;
    ObjectiveSpec {
        norm_ratio: phi_d.norm() / phi_n.norm(),
        phi_d,
        phi_n,
        weights: problem.weights,
        dt: problem.dt,
        horizon: problem.horizon(),
        bounds: problem.bounds,
    }
}

impl ObjectiveSpec {
    fn overlap(phi: &DVector<f64>, amps: &[Complex64]) -> Complex64 {
        let scale = 1.0 / phi.norm();
        phi.iter()
            .zip(amps)
            .filter(|(p, _)| **p != 0.0)
            .map(|(p, a)| a * (p * scale))
            .sum()
    }
}

/// `(‖φ_d‖/‖φ_n‖) <φ̂_d|ψ> / <φ̂_n|ψ>` for a state whose leading entries hold
/// the stacked trajectory (trailing padding entries are ignored).
pub fn ratio_from_state(psi: &StateVector, spec: &ObjectiveSpec) -> Result<f64> {
    ratio_from_amplitudes(psi.amplitudes(), spec)
}

pub fn ratio_from_amplitudes(amps: &[Complex64], spec: &ObjectiveSpec) -> Result<f64> {
    if amps.len() < spec.phi_d.len() {
        return Err(Error::InvalidDimension(format!(
            "state of length {} shorter than trajectory of length {}",
            amps.len(),
            spec.phi_d.len()
        )));
    }
    let num = ObjectiveSpec::overlap(&spec.phi_d, amps);
    let den = ObjectiveSpec::overlap(&spec.phi_n, amps);
    if den.norm() < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator(den.norm()));
    }
    // a global phase cancels in the quotient
    Ok(spec.norm_ratio * (num / den).re)
}

/// Ratio from an unnormalized real trajectory vector.
pub fn ratio_from_vector(u: &DVector<f64>, spec: &ObjectiveSpec) -> Result<f64> {
    let amps: Vec<Complex64> = u.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    ratio_from_amplitudes(&amps, spec)
}

pub fn design_cost(ratio: f64, design: &DesignPoint, spec: &ObjectiveSpec) -> f64 {
    let w = spec.weights;
    let b = spec.bounds;
    w.w1 * (spec.dt / spec.horizon) * ratio
        + w.w2 * (design.l / b.l_min - 1.0).powi(2)
        + w.w3 * (design.alpha / b.alpha_max - 1.0).powi(2)
}

/// Temperature ratio from a direct dense solve.
pub fn classical_ratio(design: &DesignPoint, problem: &HeatProblem, scheme: Scheme) -> Result<f64> {
    let system = assemble(problem, design, scheme)?;
    let u = classical_solve(&system)?;
    ratio_from_vector(&u, &build_phi(problem))
}

/// Ground-truth design cost using the implicit scheme.
pub fn design_cost_classical(design: &DesignPoint, problem: &HeatProblem) -> Result<f64> {
    let ratio = classical_ratio(design, problem, Scheme::Implicit)?;
    Ok(design_cost(ratio, design, &build_phi(problem)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Classical,
    Quantum,
    /// Quantum pipeline with the solver output replaced by the exact solution.
    Oracle,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Classical => "classical",
            Source::Quantum => "quantum",
            Source::Oracle => "oracle",
        })
    }
}

/// One scored design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub design: DesignPoint,
    pub ratio: f64,
    pub cost: f64,
    /// Standard error attributed to the cost, `c √(C_g ln dim)`.
    pub stderr: f64,
    pub source: Source,
    /// Global cost reached by the inner solver.
    pub vqls_final_cost: Option<f64>,
    #[serde(skip)]
    pub vqls: Option<VqlsResult>,
}

pub const EVALUATION_CSV_HEADER: &str = "l,alpha,ratio,cost,source,vqls_final_cost";

impl Evaluation {
    pub fn csv_row(&self) -> String {
        let vc = self.vqls_final_cost.map(|c| format!("{c:.12e}")).unwrap_or_default();
        format!(
            "{:.12},{:.12},{:.12e},{:.12e},{},{}",
            self.design.l, self.design.alpha, self.ratio, self.cost, self.source, vc
        )
    }
}

pub fn evaluations_csv(evals: &[Evaluation]) -> String {
    let mut s = format!("{EVALUATION_CSV_HEADER}\n");
    for e in evals {
        s.push_str(&e.csv_row());
        s.push('\n');
    }
    s
}

pub fn evaluate_classical(design: &DesignPoint, problem: &HeatProblem) -> Result<Evaluation> {
    let ratio = classical_ratio(design, problem, Scheme::Implicit)?;
    Ok(Evaluation {
        design: *design,
        ratio,
        cost: design_cost(ratio, design, &build_phi(problem)),
        stderr: 0.0,
        source: Source::Classical,
        vqls_final_cost: None,
        vqls: None,
    })
}

/// Circuit preparing the normalized implicit right-hand side, padded to a
/// power-of-two length when the grid requires it.
pub fn rhs_circuit(problem: &HeatProblem, design: &DesignPoint) -> Result<Circuit> {
    if problem.n_x.is_power_of_two() && problem.n_t.is_power_of_two() {
        return prepare_b_handcrafted(problem, design);
    }
    let rhs = assemble_rhs(problem, design);
    let dim = rhs.len().next_power_of_two();
    let mut padded = vec![0.0; dim];
    padded[..rhs.len()].copy_from_slice(rhs.as_slice());
    prepare_state_general(&padded)
}

/// Scores designs through the simulated quantum pipeline: LCU recombination,
/// VQLS solve, ratio extraction, cost.
#[derive(Debug, Clone)]
pub struct QuantumEvaluator {
    pub problem: HeatProblem,
    pub spec: ObjectiveSpec,
    pub cache: SeparableLcu,
    pub vqls: VqlsConfig,
    /// `c` in the standard-error model.
    pub noise_scale: f64,
    /// Independent VQLS starts per design; the lowest final cost is kept.
    pub restarts: usize,
    /// Replace the VQLS output by the normalized classical solution.
    pub oracle_injection: bool,
}

impl QuantumEvaluator {
    pub fn new(problem: HeatProblem, vqls: VqlsConfig) -> Result<Self> {
        problem.validate()?;
        vqls.validate()?;
        let cache = SeparableLcu::for_problem(&problem, Scheme::Implicit)?;
        Ok(Self {
            spec: build_phi(&problem),
            problem,
            cache,
            vqls,
            noise_scale: 0.1,
            restarts: 1,
            oracle_injection: false,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.cache.base1.n_qubits
    }

    pub fn vqls_problem(&self, design: &DesignPoint) -> Result<VqlsProblem> {
        self.problem.check_design(design)?;
        VqlsProblem::new(
            recombine(&self.cache, &self.problem, design),
            rhs_circuit(&self.problem, design)?,
        )
    }

    /// Runs the configured number of VQLS starts and keeps the best.
    pub fn solve(&self, design: &DesignPoint, seed: u64) -> Result<VqlsResult> {
        let problem = self.vqls_problem(design)?;
        let mut best: Option<VqlsResult> = None;
        for r in 0..self.restarts.max(1) {
            let cfg = VqlsConfig {
                rng_seed: seed.wrapping_add(r as u64),
                ..self.vqls.clone()
            };
            let res = Vqls::new(&problem, cfg)?.solve()?;
            if best.as_ref().is_none_or(|b| res.final_cost < b.final_cost) {
                best = Some(res);
            }
        }
        Ok(best.expect("at least one start"))
    }

    pub fn stderr(&self, global_cost: f64) -> f64 {
        let dim = (1usize << self.n_qubits()) as f64;
        self.noise_scale * (global_cost.max(0.0) * dim.ln()).sqrt()
    }

    pub fn evaluate(&self, design: &DesignPoint, seed: u64) -> Result<Evaluation> {
        if self.oracle_injection {
            self.problem.check_design(design)?;
            let ratio = classical_ratio(design, &self.problem, Scheme::Implicit)?;
            return Ok(Evaluation {
                design: *design,
                ratio,
                cost: design_cost(ratio, design, &self.spec),
                stderr: 0.0,
                source: Source::Oracle,
                vqls_final_cost: Some(0.0),
                vqls: None,
            });
        }
        let res = self.solve(design, seed)?;
        let psi = res
            .solution_state
            .as_ref()
            .ok_or_else(|| Error::InvalidProblem("solver returned no state".into()))?;
        let ratio = ratio_from_state(psi, &self.spec)?;
        let global = if self.vqls.cost_variant == CostVariant::G {
            res.final_cost
        } else {
            let problem = self.vqls_problem(design)?;
            Vqls::new(&problem, self.vqls.clone())?.cost_variant(&res.theta_star, CostVariant::G)?
        };
        Ok(Evaluation {
            design: *design,
            ratio,
            cost: design_cost(ratio, design, &self.spec),
            stderr: self.stderr(global),
            source: Source::Quantum,
            vqls_final_cost: Some(global),
            vqls: Some(res),
        })
    }
}

/// Classical evaluations over the `n x n` grid of the design box, `l`-major.
pub fn classical_grid(problem: &HeatProblem, n: usize) -> Result<Vec<Evaluation>> {
    problem
        .bounds
        .grid(n)
        .par_iter()
        .map(|d| evaluate_classical(d, problem))
        .collect()
}

/// Grid point with the lowest classical cost.
pub fn grid_argmin(evals: &[Evaluation]) -> Option<&Evaluation> {
    evals.iter().min_by(|a, b| a.cost.total_cmp(&b.cost))
}

/// Exact normalized solution of the (padded) implicit system as a state.
pub fn classical_state(problem: &HeatProblem, design: &DesignPoint) -> Result<StateVector> {
    let system = assemble(problem, design, Scheme::Implicit)?;
    let (m, b) = pad_system(&system.matrix, &system.rhs);
    let u = crate::pde_model::dense_solve(&m, &b)?;
    StateVector::from_real(&u)
}
