//! Variational quantum linear solver.
//!
//! With `|ψ> = V(θ)|0>` and `|φ> = A|ψ>`, every cost variant is a function of
//! three expectations:
//!
//! * `D = <φ|φ> = Σ α_i α_j* β_ij`
//! * `N = |<b|φ>|² = Σ α_i α_j* γ_ij`
//! * `L = (1/n) Σ_k <φ|U_b (|0><0|_k ⊗ I) U_b†|φ>`
//!
//! giving `C_ug = D - N`, `C_g = 1 - N/D`, `C_ul = D - L`, `C_l = 1 - L/D`.
//! Each expectation is quadratic in `|ψ>`, so the ±π/2 shift rule applies to
//! it directly and cost gradients follow by the chain rule.

use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli_lcu::{reconstruct, LcuDecomposition, LcuTerm};
use crate::quantum_kernel::{
    hadamard_expectation, pauli_circuit, sample_expectation, zero_probability, AnsatzLayout, AnsatzSpec, Circuit, Gate,
    Shots, StateVector,
};

/// `<φ|φ>` below this is treated as `A` annihilating the ansatz state.
pub const DEGENERATE_NORM: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostVariant {
    Ug,
    #[default]
    G,
    Ul,
    L,
}

impl CostVariant {
    pub const ALL: [CostVariant; 4] = [CostVariant::Ug, CostVariant::G, CostVariant::Ul, CostVariant::L];

    fn is_local(self) -> bool {
        matches!(self, CostVariant::Ul | CostVariant::L)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adagrad,
    Cobyla,
}

/// How `β`, `γ` and local terms are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermBackend {
    /// Overlaps read off the simulated state.
    #[default]
    Statevector,
    /// One ancilla-controlled circuit per term.
    HadamardTests,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VqlsConfig {
    pub cost_variant: CostVariant,
    /// Stop once the cost drops below this.
    pub gamma: f64,
    pub shots: Shots,
    pub max_iters: usize,
    pub optimizer: OptimizerKind,
    pub adagrad_step: f64,
    pub adagrad_eps: f64,
    /// Beta distribution shape `(a, b)` for initial angles.
    pub init_beta: [f64; 2],
    /// Initial angles are `lo + Beta(a, b) * (hi - lo)`.
    pub init_range: [f64; 2],
    pub ansatz: AnsatzLayout,
    pub backend: TermBackend,
    pub cobyla_rho_begin: f64,
    pub cobyla_rho_end: f64,
    pub rng_seed: u64,
}

impl Default for VqlsConfig {
    fn default() -> Self {
        Self {
            cost_variant: CostVariant::G,
            gamma: 2e-2,
            shots: Shots::Exact,
            max_iters: 150,
            optimizer: OptimizerKind::Adagrad,
            adagrad_step: 0.2,
            adagrad_eps: 1e-8,
            init_beta: [0.5, 0.5],
            init_range: [0.0, TAU],
            ansatz: AnsatzLayout::default(),
            backend: TermBackend::Statevector,
            cobyla_rho_begin: 0.5,
            cobyla_rho_end: 1e-4,
            rng_seed: 0,
        }
    }
}

impl VqlsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("vqls.gamma must lie in (0, 1]");
        }
        if self.max_iters == 0 {
            return bad("vqls.max_iters must be at least 1");
        }
        if !(self.adagrad_step > 0.0 && self.adagrad_eps > 0.0) {
            return bad("adagrad step and eps must be positive");
        }
        if !(self.init_beta[0] > 0.0 && self.init_beta[1] > 0.0) {
            return bad("init_beta shapes must be positive");
        }
        if !(self.init_range[0] < self.init_range[1]) {
            return bad("init_range must be increasing");
        }
        if !(self.cobyla_rho_begin > self.cobyla_rho_end && self.cobyla_rho_end > 0.0) {
            return bad("cobyla radii must satisfy rho_begin > rho_end > 0");
        }
        Ok(())
    }
}

/// LCU of `A` plus the circuit preparing `|b>`.
#[derive(Debug, Clone)]
pub struct VqlsProblem {
    pub lcu: LcuDecomposition,
    pub b_circuit: Circuit,
    b_state: StateVector,
    b_inverse: Circuit,
    /// Dense `A` for small registers, used by the direct statevector path.
    dense: Option<DMatrix<Complex64>>,
}

/// Registers up to this size keep a dense copy of `A`.
const DENSE_LIMIT: usize = 10;

impl VqlsProblem {
    pub fn new(lcu: LcuDecomposition, b_circuit: Circuit) -> Result<Self> {
        if lcu.n_qubits != b_circuit.n_qubits {
            return Err(Error::InvalidDimension(format!(
                "LCU on {} qubits, state preparation on {}",
                lcu.n_qubits, b_circuit.n_qubits
            )));
        }
        if lcu.is_empty() {
            return Err(Error::InvalidProblem("empty LCU".into()));
        }
        let b_state = b_circuit.run_zero()?;
        let b_inverse = b_circuit.inverse();
        let dense = (lcu.n_qubits <= DENSE_LIMIT).then(|| reconstruct(&lcu));
        Ok(Self {
            lcu,
            b_circuit,
            b_state,
            b_inverse,
            dense,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.lcu.n_qubits
    }

    pub fn b_state(&self) -> &StateVector {
        &self.b_state
    }

    /// `A† v`.
    pub fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        match &self.dense {
            Some(m) => (m.adjoint() * DVector::from_column_slice(v)).data.into(),
            None => {
                let conj = LcuDecomposition {
                    n_qubits: self.lcu.n_qubits,
                    terms: self
                        .lcu
                        .terms
                        .iter()
                        .map(|t| LcuTerm {
                            coeff: t.coeff.conj(),
                            word: t.word.clone(),
                        })
                        .collect(),
                };
                conj.apply(v)
            }
        }
    }

    /// `A v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        match &self.dense {
            Some(m) => (m * DVector::from_column_slice(v)).data.into(),
            None => self.lcu.apply(v),
        }
    }
}

/// The three expectations every cost variant is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectations {
    pub d: f64,
    pub n: f64,
    /// Only meaningful for local variants; `NaN` when not computed.
    pub l: f64,
}

impl Expectations {
    pub fn cost(&self, variant: CostVariant) -> Result<f64> {
        if self.d <= DEGENERATE_NORM {
            return Err(Error::DegenerateOperator(self.d));
        }
        let raw = match variant {
            CostVariant::Ug => self.d - self.n,
            CostVariant::G => 1.0 - self.n / self.d,
            CostVariant::Ul => self.d - self.l,
            CostVariant::L => 1.0 - self.l / self.d,
        };
        Ok(raw.max(0.0))
    }

    /// `(∂C/∂D, ∂C/∂N, ∂C/∂L)`.
    fn partials(&self, variant: CostVariant) -> (f64, f64, f64) {
        let d2 = self.d * self.d;
        match variant {
            CostVariant::Ug => (1.0, -1.0, 0.0),
            CostVariant::G => (self.n / d2, -1.0 / self.d, 0.0),
            CostVariant::Ul => (1.0, 0.0, -1.0),
            CostVariant::L => (self.l / d2, 0.0, -1.0 / self.d),
        }
    }
}

/// Term-level quantities, indexed by LCU term.
#[derive(Debug, Clone)]
pub struct TermSet {
    /// `β_ij = <ψ|A_j† A_i|ψ>`.
    pub beta: DMatrix<Complex64>,
    /// `g_i = <0|U_b† A_i V|0>`, so `γ_ij = g_i g_j*` for `i ≠ j`.
    pub g: Vec<Complex64>,
    /// `γ_ii` as the all-zeros probability of `U_b† A_i V|0>`.
    pub gamma_diag: Vec<f64>,
    /// Per qubit `k`: `<ψ|A_j† U_b Z_k U_b† A_i|ψ>`.
    pub local: Option<Vec<DMatrix<Complex64>>>,
}

impl TermSet {
    pub fn gamma(&self, i: usize, j: usize) -> Complex64 {
        if i == j {
            Complex64::new(self.gamma_diag[i], 0.0)
        } else {
            self.g[i] * self.g[j].conj()
        }
    }

    pub fn assemble(&self, lcu: &LcuDecomposition) -> Expectations {
        let a: Vec<Complex64> = lcu.terms.iter().map(|t| t.coeff).collect();
        let n_l = a.len();
        let quad = |f: &dyn Fn(usize, usize) -> Complex64| -> f64 {
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..n_l {
                for j in 0..n_l {
                    s += a[i] * a[j].conj() * f(i, j);
                }
            }
            s.re
        };
        let d = quad(&|i, j| self.beta[(i, j)]);
        let n = quad(&|i, j| self.gamma(i, j));
        let l = match &self.local {
            Some(z) => {
                let zmean = z.iter().map(|m| quad(&|i, j| m[(i, j)])).sum::<f64>() / z.len() as f64;
                0.5 * (d + zmean)
            }
            None => f64::NAN,
        };
        Expectations { d, n, l }
    }

    /// Replaces every estimated quantity by a finite-shot estimate.
    fn sampled(&self, shots: Shots, seed: u64) -> TermSet {
        let mut counter = 0u64;
        let mut next = || {
            counter += 1;
            mix_seed(seed, counter)
        };
        let mut est = |v: f64| sample_expectation(v.clamp(-1.0, 1.0), shots, next());
        let est_c = |z: Complex64, e: &mut dyn FnMut(f64) -> f64| Complex64::new(e(z.re), e(z.im));
        let n_l = self.g.len();
        let mut beta = self.beta.clone();
        for i in 0..n_l {
            for j in (i + 1)..n_l {
                let v = est_c(self.beta[(i, j)], &mut est);
                beta[(i, j)] = v;
                beta[(j, i)] = v.conj();
            }
        }
        let g = self.g.iter().map(|z| est_c(*z, &mut est)).collect();
        let gamma_diag = self
            .gamma_diag
            .iter()
            .map(|p| (est(2.0 * p - 1.0) + 1.0) / 2.0)
            .collect();
        let local = self.local.as_ref().map(|zs| {
            zs.iter()
                .map(|m| {
                    let mut out = m.clone();
                    for i in 0..n_l {
                        for j in i..n_l {
                            let v = est_c(m[(i, j)], &mut est);
                            out[(i, j)] = v;
                            out[(j, i)] = v.conj();
                        }
                    }
                    out
                })
                .collect()
        });
        TermSet {
            beta,
            g,
            gamma_diag,
            local,
        }
    }
}

fn mix_seed(seed: u64, counter: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ counter.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqlsResult {
    pub theta_star: Vec<f64>,
    pub final_cost: f64,
    pub cost_history: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    #[serde(skip)]
    pub solution_state: Option<StateVector>,
}

impl VqlsResult {
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.cost_history
            .iter()
            .map(|c| {
                best = best.min(*c);
                best
            })
            .collect()
    }

    pub fn history_csv(&self) -> String {
        let mut s = String::from("iter,cost\n");
        for (i, c) in self.cost_history.iter().enumerate() {
            s.push_str(&format!("{i},{c:.12e}\n"));
        }
        s
    }

    pub fn theta_json(&self) -> String {
        serde_json::to_string(&self.theta_star).expect("angles serialize")
    }
}

/// Solver bound to one problem and configuration.
pub struct Vqls<'a> {
    pub problem: &'a VqlsProblem,
    pub config: VqlsConfig,
    pub spec: AnsatzSpec,
}

impl<'a> Vqls<'a> {
    pub fn new(problem: &'a VqlsProblem, config: VqlsConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.ansatz.spec(problem.n_qubits());
        Ok(Self { problem, config, spec })
    }

    pub fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    pub fn state(&self, theta: &[f64]) -> Result<StateVector> {
        self.spec.circuit(theta)?.run_zero()
    }

    /// `β_ij` from a Hadamard test on the simplified product `A_j A_i`.
    pub fn beta_term(&self, i: usize, j: usize, theta: &[f64]) -> Result<Complex64> {
        let terms = &self.problem.lcu.terms;
        let (phase, word) = terms[j].word.product(&terms[i].word);
        let v = self.spec.circuit(theta)?;
        Ok(phase * hadamard_expectation(&pauli_circuit(&word), &v)?)
    }

    /// `γ_ij`; the diagonal comes from an all-zeros probability.
    pub fn gamma_term(&self, i: usize, j: usize, theta: &[f64]) -> Result<Complex64> {
        let v = self.spec.circuit(theta)?;
        if i == j {
            return Ok(Complex64::new(zero_probability(&self.g_circuit(&v, i))?, 0.0));
        }
        Ok(self.g_term(&v, i)? * self.g_term(&v, j)?.conj())
    }

    /// `U_b† A_i V`.
    fn g_circuit(&self, v: &Circuit, i: usize) -> Circuit {
        let mut c = v.clone();
        c.extend(&pauli_circuit(&self.problem.lcu.terms[i].word));
        c.extend(&self.problem.b_inverse);
        c
    }

    fn g_term(&self, v: &Circuit, i: usize) -> Result<Complex64> {
        hadamard_expectation(&self.g_circuit(v, i), &Circuit::new(v.n_qubits))
    }

    fn local_term(&self, v: &Circuit, i: usize, j: usize, k: usize) -> Result<Complex64> {
        let words = &self.problem.lcu.terms;
        let mut u = pauli_circuit(&words[i].word);
        u.extend(&self.problem.b_inverse);
        u.push(Gate::Z(k));
        u.extend(&self.problem.b_circuit);
        u.extend(&pauli_circuit(&words[j].word));
        hadamard_expectation(&u, v)
    }

    /// All terms at `theta` from the configured backend, exact.
    pub fn terms(&self, theta: &[f64], with_local: bool) -> Result<TermSet> {
        match self.config.backend {
            TermBackend::Statevector => self.terms_statevector(theta, with_local),
            TermBackend::HadamardTests => self.terms_hadamard(theta, with_local),
        }
    }

    fn terms_statevector(&self, theta: &[f64], with_local: bool) -> Result<TermSet> {
        let psi = self.state(theta)?;
        let lcu = &self.problem.lcu;
        let n_l = lcu.len();
        let applied: Vec<StateVector> = lcu
            .terms
            .iter()
            .map(|t| StateVector::from_raw(t.word.apply(psi.amplitudes())))
            .collect();
        let beta = DMatrix::from_fn(n_l, n_l, |i, j| applied[j].inner(&applied[i]));
        let g: Vec<Complex64> = applied.iter().map(|s| self.problem.b_state.inner(s)).collect();
        let gamma_diag = g.iter().map(|z| z.norm_sqr()).collect();
        let local = if with_local {
            let chi: Vec<StateVector> = applied
                .iter()
                .map(|s| self.problem.b_inverse.run(s))
                .collect::<Result<_>>()?;
            let n = self.problem.n_qubits();
            Some(
                (0..n)
                    .map(|k| {
                        let bit = 1usize << (n - 1 - k);
                        DMatrix::from_fn(n_l, n_l, |i, j| {
                            chi[j]
                                .amplitudes()
                                .iter()
                                .zip(chi[i].amplitudes())
                                .enumerate()
                                .map(|(x, (a, b))| {
                                    let v = a.conj() * b;
                                    if x & bit == 0 {
                                        v
                                    } else {
                                        -v
                                    }
                                })
                                .sum()
                        })
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok(TermSet {
            beta,
            g,
            gamma_diag,
            local,
        })
    }

    fn terms_hadamard(&self, theta: &[f64], with_local: bool) -> Result<TermSet> {
        let v = self.spec.circuit(theta)?;
        let n_l = self.problem.lcu.len();
        let pairs: Vec<(usize, usize)> = (0..n_l).flat_map(|i| (i..n_l).map(move |j| (i, j))).collect();
        let upper: Vec<Complex64> = pairs
            .par_iter()
            .map(|&(i, j)| {
                if i == j {
                    Ok(Complex64::new(1.0, 0.0))
                } else {
                    self.beta_term(i, j, theta)
                }
            })
            .collect::<Result<_>>()?;
        let mut beta = DMatrix::from_element(n_l, n_l, Complex64::new(0.0, 0.0));
        for (&(i, j), val) in pairs.iter().zip(&upper) {
            beta[(i, j)] = *val;
            beta[(j, i)] = val.conj();
        }
        let g: Vec<Complex64> = (0..n_l)
            .into_par_iter()
            .map(|i| self.g_term(&v, i))
            .collect::<Result<_>>()?;
        let gamma_diag: Vec<f64> = (0..n_l)
            .into_par_iter()
            .map(|i| zero_probability(&self.g_circuit(&v, i)))
            .collect::<Result<_>>()?;
        let local = if with_local {
            let n = self.problem.n_qubits();
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                let vals: Vec<Complex64> = pairs
                    .par_iter()
                    .map(|&(i, j)| self.local_term(&v, i, j, k))
                    .collect::<Result<_>>()?;
                let mut m = DMatrix::from_element(n_l, n_l, Complex64::new(0.0, 0.0));
                for (&(i, j), val) in pairs.iter().zip(&vals) {
                    m[(i, j)] = *val;
                    m[(j, i)] = val.conj();
                }
                out.push(m);
            }
            Some(out)
        } else {
            None
        };
        Ok(TermSet {
            beta,
            g,
            gamma_diag,
            local,
        })
    }

    /// Direct evaluation from `|φ> = A|ψ>`.
    fn expectations_direct(&self, theta: &[f64], with_local: bool) -> Result<Expectations> {
        let psi = self.state(theta)?;
        let phi = StateVector::from_raw(self.problem.apply(psi.amplitudes()));
        let d = phi.inner(&phi).re;
        let n = self.problem.b_state.inner(&phi).norm_sqr();
        let l = if with_local {
            let chi = self.problem.b_inverse.run(&phi)?;
            let nq = self.problem.n_qubits();
            let zsum: f64 = (0..nq)
                .map(|k| {
                    let bit = 1usize << (nq - 1 - k);
                    chi.amplitudes()
                        .iter()
                        .enumerate()
                        .map(|(x, a)| if x & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
                        .sum::<f64>()
                })
                .sum();
            0.5 * (d + zsum / nq as f64)
        } else {
            f64::NAN
        };
        Ok(Expectations { d, n, l })
    }

    /// Expectations under the configured backend and shot budget.
    pub fn expectations(&self, theta: &[f64], sample_seed: u64) -> Result<Expectations> {
        let with_local = self.config.cost_variant.is_local();
        match (self.config.backend, self.config.shots) {
            (TermBackend::Statevector, Shots::Exact) => self.expectations_direct(theta, with_local),
            (_, Shots::Exact) => Ok(self.terms(theta, with_local)?.assemble(&self.problem.lcu)),
            (_, shots) => Ok(self
                .terms(theta, with_local)?
                .sampled(shots, sample_seed)
                .assemble(&self.problem.lcu)),
        }
    }

    pub fn cost(&self, theta: &[f64]) -> Result<f64> {
        self.expectations(theta, self.config.rng_seed)?
            .cost(self.config.cost_variant)
    }

    /// Cost of a given variant, independent of the configured one.
    pub fn cost_variant(&self, theta: &[f64], variant: CostVariant) -> Result<f64> {
        let e = match (self.config.backend, self.config.shots) {
            (TermBackend::Statevector, Shots::Exact) => self.expectations_direct(theta, variant.is_local())?,
            _ => self.terms(theta, variant.is_local())?.assemble(&self.problem.lcu),
        };
        e.cost(variant)
    }

    /// Parameter-shift gradient of the configured cost.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.gradient_seeded(theta, self.config.rng_seed)
    }

    fn gradient_seeded(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>> {
        if self.config.backend == TermBackend::Statevector && self.config.shots == Shots::Exact {
            return self.gradient_adjoint(theta);
        }
        self.gradient_shift_seeded(theta, seed)
    }

    /// Parameter-shift gradient regardless of backend.
    pub fn gradient_parameter_shift(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.gradient_shift_seeded(theta, self.config.rng_seed)
    }

    /// Exact gradient by reverse-mode sweep through the ansatz.
    ///
    /// The cost derivative is `2 Re <λ|∂ψ>` with `λ = A† M A|ψ>` and
    /// `M = c_D I + c_N |b><b| + c_L H_L` collecting the chain-rule weights.
    pub fn gradient_adjoint(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let variant = self.config.cost_variant;
        let circuit = self.spec.circuit(theta)?;
        let nq = self.problem.n_qubits();
        let psi = circuit.run_zero()?;
        let phi = StateVector::from_raw(self.problem.apply(psi.amplitudes()));
        let d = phi.inner(&phi).re;
        if d <= DEGENERATE_NORM {
            return Err(Error::DegenerateOperator(d));
        }
        let b = &self.problem.b_state;
        let overlap = b.inner(&phi);
        let mut m_phi: Vec<Complex64> = phi.amplitudes().to_vec();
        let (l, h_phi) = if variant.is_local() {
            let mut chi = self.problem.b_inverse.run(&phi)?.into_amplitudes();
            for (x, a) in chi.iter_mut().enumerate() {
                let zsum: i64 = (0..nq).map(|k| if x & (1 << (nq - 1 - k)) == 0 { 1 } else { -1 }).sum();
                *a *= 0.5 * (1.0 + zsum as f64 / nq as f64);
            }
            let h_phi = self.problem.b_circuit.run(&StateVector::from_raw(chi))?;
            (phi.inner(&h_phi).re, Some(h_phi))
        } else {
            (f64::NAN, None)
        };
        let e = Expectations {
            d,
            n: overlap.norm_sqr(),
            l,
        };
        let (fd, fn_, fl) = e.partials(variant);
        for (i, a) in m_phi.iter_mut().enumerate() {
            *a = *a * fd + b.amplitudes()[i] * overlap * fn_;
            if let Some(h) = &h_phi {
                *a += h.amplitudes()[i] * fl;
            }
        }
        let mut lambda = self.problem.apply_adjoint(&m_phi);
        let mut state = psi.into_amplitudes();
        let mut grad = vec![0.0; theta.len()];
        let mut idx = theta.len();
        for gate in circuit.gates.iter().rev() {
            let inv = gate.inverse();
            inv.apply_to(&mut state, nq);
            if let Gate::Ry(q, t) = gate {
                idx -= 1;
                // dRY(t)/dt = RY(t + π) / 2
                let mut mu = state.clone();
                Gate::Ry(*q, t + std::f64::consts::PI).apply_to(&mut mu, nq);
                let ip: Complex64 = lambda.iter().zip(&mu).map(|(x, y)| x.conj() * y).sum();
                grad[idx] = ip.re;
            }
            inv.apply_to(&mut lambda, nq);
        }
        Ok(grad)
    }

    fn gradient_shift_seeded(&self, theta: &[f64], seed: u64) -> Result<Vec<f64>> {
        if self.config.shots != Shots::Exact {
            log::warn!("parameter-shift gradient under finite shots is noisy");
        }
        let variant = self.config.cost_variant;
        let base = self.expectations(theta, seed)?;
        if base.d <= DEGENERATE_NORM {
            return Err(Error::DegenerateOperator(base.d));
        }
        let (fd, fn_, fl) = base.partials(variant);
        (0..theta.len())
            .into_par_iter()
            .map(|j| {
                let mut t = theta.to_vec();
                t[j] = theta[j] + FRAC_PI_2;
                let plus = self.expectations(&t, mix_seed(seed, 2 * j as u64 + 1))?;
                t[j] = theta[j] - FRAC_PI_2;
                let minus = self.expectations(&t, mix_seed(seed, 2 * j as u64 + 2))?;
                let dd = (plus.d - minus.d) / 2.0;
                let dn = (plus.n - minus.n) / 2.0;
                let dl = if variant.is_local() {
                    (plus.l - minus.l) / 2.0
                } else {
                    0.0
                };
                Ok(fd * dd + fn_ * dn + fl * dl)
            })
            .collect()
    }

    pub fn initial_theta(&self) -> Vec<f64> {
        let [a, b] = self.config.init_beta;
        let [lo, hi] = self.config.init_range;
        let dist = Beta::new(a, b).expect("validated shapes");
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.rng_seed);
        (0..self.n_params())
            .map(|_| lo + dist.sample(&mut rng) * (hi - lo))
            .collect()
    }

    pub fn solve(&self) -> Result<VqlsResult> {
        self.solve_from(self.initial_theta())
    }

    pub fn solve_from(&self, theta0: Vec<f64>) -> Result<VqlsResult> {
        if theta0.len() != self.n_params() {
            return Err(Error::ParamLength {
                expected: self.n_params(),
                got: theta0.len(),
            });
        }
        let (theta_star, history) = match self.config.optimizer {
            OptimizerKind::Adagrad => self.run_adagrad(theta0)?,
            OptimizerKind::Cobyla => self.run_cobyla(theta0)?,
        };
        let final_cost = history.iter().copied().fold(f64::INFINITY, f64::min);
        let solution_state = Some(self.state(&theta_star)?);
        Ok(VqlsResult {
            converged: final_cost < self.config.gamma,
            iterations_used: history.len(),
            theta_star,
            final_cost,
            cost_history: history,
            solution_state,
        })
    }

    fn run_adagrad(&self, mut theta: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let cfg = &self.config;
        let mut accum = vec![0.0; theta.len()];
        let mut history = Vec::with_capacity(cfg.max_iters);
        let mut best = (f64::INFINITY, theta.clone());
        for it in 0..cfg.max_iters {
            let seed = mix_seed(cfg.rng_seed, (it as u64) << 20);
            let cost = self.expectations(&theta, seed)?.cost(cfg.cost_variant)?;
            history.push(cost);
            if cost < best.0 {
                best = (cost, theta.clone());
            }
            if cost < cfg.gamma {
                break;
            }
            let grad = self.gradient_seeded(&theta, seed)?;
            for ((t, g), acc) in theta.iter_mut().zip(&grad).zip(accum.iter_mut()) {
                *acc += g * g;
                *t -= cfg.adagrad_step * g / (*acc + cfg.adagrad_eps).sqrt();
            }
        }
        Ok((best.1, history))
    }

    /// Each function evaluation counts as one iteration; the history is cut
    /// at the first evaluation below `gamma`.
    fn run_cobyla(&self, theta0: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let cfg = &self.config;
        let record: RefCell<CobylaLog> = RefCell::new((Vec::new(), Vec::new(), None));
        let objective = |x: &[f64], _: &mut ()| -> f64 {
            let mut r = record.borrow_mut();
            if r.2.is_some() {
                return f64::MAX;
            }
            let seed = mix_seed(cfg.rng_seed, (r.0.len() as u64) << 20);
            match self.expectations(x, seed).and_then(|e| e.cost(cfg.cost_variant)) {
                Ok(c) => {
                    r.0.push(c);
                    r.1.push(x.to_vec());
                    c
                }
                Err(e) => {
                    r.2 = Some(e);
                    f64::MAX
                }
            }
        };
        let bounds: Vec<(f64, f64)> = theta0.iter().map(|_| (-2.0 * TAU, 2.0 * TAU)).collect();
        let tols = cobyla::StopTols {
            xtol_abs: vec![cfg.cobyla_rho_end; theta0.len()],
            ..Default::default()
        };
        let no_cons: &[fn(&[f64], &mut ()) -> f64] = &[];
        let _ = cobyla::minimize(
            objective,
            &theta0,
            &bounds,
            no_cons,
            (),
            cfg.max_iters,
            cobyla::RhoBeg::All(cfg.cobyla_rho_begin),
            Some(tols),
        );
        let (mut costs, mut points, err) = record.into_inner();
        if let Some(e) = err {
            return Err(e);
        }
        if let Some(stop) = costs.iter().position(|c| *c < cfg.gamma) {
            costs.truncate(stop + 1);
            points.truncate(stop + 1);
        }
        let best = costs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let theta = points.get(best).cloned().unwrap_or(theta0);
        Ok((theta, costs))
    }
}

/// Costs, evaluated points and the first objective error.
type CobylaLog = (Vec<f64>, Vec<Vec<f64>>, Option<Error>);

/// Reference cost from explicit `H_g` / `H_l` matrices.
pub fn dense_cost(
    matrix: &DMatrix<Complex64>,
    b_circuit: &Circuit,
    psi: &StateVector,
    variant: CostVariant,
) -> Result<f64> {
    let dim = matrix.nrows();
    let n = b_circuit.n_qubits;
    let ub = b_circuit.unitary()?;
    let id = DMatrix::<Complex64>::identity(dim, dim);
    let mut zero_proj = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    zero_proj[(0, 0)] = Complex64::new(1.0, 0.0);
    let inner = if variant.is_local() {
        let mut avg = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for k in 0..n {
            let bit = 1usize << (n - 1 - k);
            for x in 0..dim {
                if x & bit == 0 {
                    avg[(x, x)] += Complex64::new(1.0 / n as f64, 0.0);
                }
            }
        }
        &id - avg
    } else {
        &id - zero_proj
    };
    let h = matrix.adjoint() * &ub * inner * ub.adjoint() * matrix;
    let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
    let num = (v.adjoint() * h * &v)[(0, 0)].re;
    let norm = (v.adjoint() * matrix.adjoint() * matrix * &v)[(0, 0)].re;
    if norm <= DEGENERATE_NORM {
        return Err(Error::DegenerateOperator(norm));
    }
    Ok(match variant {
        CostVariant::Ug | CostVariant::Ul => num,
        CostVariant::G | CostVariant::L => num / norm,
    }
    .max(0.0))
}
