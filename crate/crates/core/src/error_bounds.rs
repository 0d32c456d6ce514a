//! Condition-number, Euler-error, step-size and threshold bounds for the
//! space-time systems, plus a dense verifier.
//!
//! The semi-discrete model is `du/dt = A u + f` with `A = alpha / dx^2 * L`,
//! `nu = ||A||_2` and `h` the time step, so `h A = c L` with `c` the
//! diffusion number.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde_model::{
    assemble_parts, build_laplacian, classical_time_march, DesignPoint, HeatProblem, InitialProfile, Scheme,
};

/// Relative slack used by [`BoundReport::satisfied`].
pub const REPORT_SLACK: f64 = 1e-9;

/// Label attached to every evaluated big-O expression.
pub const SCALING_LABEL: &str = "scaling indicator";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub nu: f64,
    pub t: f64,
    pub h: f64,
    pub n: usize,
    pub m: usize,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub quantity: String,
    pub computed: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub inputs: BoundInputs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignPoint>,
}

impl BoundReport {
    pub fn new(quantity: impl Into<String>, computed: f64, bound: f64, inputs: BoundInputs) -> Self {
        Self {
            quantity: quantity.into(),
            computed,
            bound,
            satisfied: computed <= bound * (1.0 + REPORT_SLACK),
            inputs,
            design: None,
        }
    }

    pub fn at(mut self, design: DesignPoint) -> Self {
        self.design = Some(design);
        self
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{name} = {v} must be positive")))
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("epsilon = {epsilon} outside (0, 1)")))
    }
}

/// `12 e^{nu T} / (h nu)`, valid for `h nu <= 2`.
pub fn kappa_bound_explicit(nu: f64, t: f64, h: f64) -> Result<f64> {
    positive("nu", nu)?;
    positive("h", h)?;
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("T = {t} must be non-negative")));
    }
    if h * nu > 2.0 {
        return Err(Error::Precondition(format!("h * nu = {} exceeds 2", h * nu)));
    }
    Ok(12.0 * (nu * t).exp() / (h * nu))
}

/// `2.5 (T/h + 1)` when `||(I - hA)^{-1}|| <= 1`, else `5 e^{2 nu T} / (h nu)`.
/// Valid for `h nu <= 0.5`.
pub fn kappa_bound_implicit(nu: f64, t: f64, h: f64, contraction: bool) -> Result<f64> {
    positive("nu", nu)?;
    positive("h", h)?;
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("T = {t} must be non-negative")));
    }
    if h * nu > 0.5 {
        return Err(Error::Precondition(format!("h * nu = {} exceeds 0.5", h * nu)));
    }
    Ok(if contraction {
        2.5 * (t / h + 1.0)
    } else {
        5.0 * (2.0 * nu * t).exp() / (h * nu)
    })
}

/// `2 M`, the explicit bound for normal `A` with `h <= h0`.
pub fn kappa_bound_explicit_normal(m: usize) -> f64 {
    2.0 * m as f64
}

/// `|(1 - ||psi - phi||^2 / 2)^2 + rho^2 - 1|` with `rho^2 = 1 - |<phi|psi>|^2`.
///
/// Zero whenever the overlap is real, which holds for the real amplitudes
/// produced by the pipeline.
pub fn trace_l2_identity_check(psi: &[Complex64], phi: &[Complex64]) -> f64 {
    let overlap: Complex64 = phi.iter().zip(psi).map(|(a, b)| a.conj() * b).sum();
    let dist2: f64 = psi.iter().zip(phi).map(|(a, b)| (a - b).norm_sqr()).sum();
    let rho2 = (1.0 - overlap.norm_sqr()).max(0.0);
    let lhs = 1.0 - dist2 / 2.0;
    (lhs * lhs + rho2 - 1.0).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "variant")]
pub enum StepVariant {
    Explicit,
    /// Normal `A`; `h0` from [`h0_from_eigenvalues`].
    Normal {
        h0: f64,
    },
    ImplicitContraction,
    ImplicitGeneral,
}

/// `min_j {2 delta_j / |lambda_j|^2, 2 / max_k |lambda_k|}` over eigenvalues
/// `lambda_j = -delta_j + i omega_j`. Zero eigenvalues impose no constraint.
pub fn h0_from_eigenvalues(eigs: &[Complex64]) -> Result<f64> {
    let max_abs = eigs.iter().map(|l| l.norm()).fold(0.0, f64::max);
    if max_abs == 0.0 {
        return Err(Error::Precondition("all eigenvalues vanish".into()));
    }
    let mut h0 = 2.0 / max_abs;
    for l in eigs {
        let mag2 = l.norm_sqr();
        if mag2 <= 1e-24 * max_abs * max_abs {
            continue;
        }
        let delta = -l.re;
        if delta < 0.0 {
            return Err(Error::Precondition(format!("unstable eigenvalue {l}")));
        }
        h0 = h0.min(2.0 * delta / mag2);
    }
    Ok(h0)
}

/// Largest admissible step for accuracy `epsilon` on normalized states.
///
/// `c` is the Euler global-error constant and `norm_uc` the norm of the
/// stacked continuous solution.
pub fn step_size_select(epsilon: f64, c: f64, t: f64, nu: f64, norm_uc: f64, variant: StepVariant) -> Result<f64> {
    check_epsilon(epsilon)?;
    positive("C", c)?;
    positive("T", t)?;
    positive("nu", nu)?;
    positive("||u_c||", norm_uc)?;
    let eu2 = (epsilon * norm_uc).powi(2);
    Ok(match variant {
        StepVariant::Explicit => (eu2 / (16.0 * c * c * t)).min(2.0 / nu),
        StepVariant::Normal { h0 } => {
            positive("h0", h0)?;
            (eu2 / (16.0 * c * c * t.powi(3))).min(h0)
        }
        StepVariant::ImplicitContraction => (eu2 / (4.0 * c * c * t.powi(3))).min(0.5 / nu),
        StepVariant::ImplicitGeneral => (eu2 / (4.0 * c * c * t)).min(0.5 / nu),
    })
}

fn accuracy_numerator(epsilon: f64) -> f64 {
    let a = 1.0 - epsilon * epsilon / 8.0;
    1.0 - a * a
}

/// VQLS stopping threshold for the explicit system with `T = (M - 1) h`.
/// Logarithms are base 2, so `log(NM)` is the qubit count.
pub fn gamma_threshold(epsilon: f64, h: f64, nu: f64, n: usize, m: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    positive("h", h)?;
    positive("nu", nu)?;
    if n < 2 || m < 2 {
        return Err(Error::Precondition(format!("N = {n}, M = {m} must exceed 1")));
    }
    let t = (m - 1) as f64 * h;
    let kappa = 12.0 * (nu * t).exp() / (h * nu);
    let log_nm = ((n * m) as f64).log2();
    Ok(accuracy_numerator(epsilon) / (kappa * kappa * log_nm * (2.0 + h * nu)))
}

/// Normal-matrix threshold `[1 - (1 - eps^2/8)^2] / [2 (2M)^2 log(NM)]`.
pub fn gamma_threshold_normal(epsilon: f64, n: usize, m: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    if n < 2 || m < 2 {
        return Err(Error::Precondition(format!("N = {n}, M = {m} must exceed 1")));
    }
    let two_m = 2.0 * m as f64;
    let log_nm = ((n * m) as f64).log2();
    Ok(accuracy_numerator(epsilon) / (2.0 * two_m * two_m * log_nm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Explicit,
    ExplicitNormal,
    ImplicitContraction,
    ImplicitGeneral,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::Explicit,
        Regime::ExplicitNormal,
        Regime::ImplicitContraction,
        Regime::ImplicitGeneral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Explicit => "explicit",
            Regime::ExplicitNormal => "explicit-normal",
            Regime::ImplicitContraction => "implicit-contraction",
            Regime::ImplicitGeneral => "implicit-general",
        }
    }
}

/// `max(log2 x, 1)`, so polylog factors never vanish or turn negative.
fn polylog_base(x: f64) -> f64 {
    x.log2().max(1.0)
}

/// Big-O query-complexity expression with hidden constants set to 1.
/// A [`SCALING_LABEL`], not a runtime prediction.
pub fn query_complexity(nu: f64, t: f64, n: usize, epsilon: f64, norm_uc: f64, regime: Regime) -> Result<f64> {
    check_epsilon(epsilon)?;
    positive("T", t)?;
    positive("||u_c||", norm_uc)?;
    if !(nu >= 0.0) {
        return Err(Error::Precondition(format!("nu = {nu} must be non-negative")));
    }
    let ue2 = norm_uc * norm_uc * epsilon * epsilon;
    let nf = n as f64;
    let log_eps = (1.0 / epsilon).log2();
    let (log_arg, body) = match regime {
        Regime::Explicit => (nf * t * t / ue2, t * (nu * t).exp() / ue2),
        Regime::ExplicitNormal | Regime::ImplicitContraction => (nf * t.powi(4) / ue2, t.powi(3) / ue2),
        Regime::ImplicitGeneral => (nf * t * t / ue2, t * (2.0 * nu * t).exp() / ue2),
    };
    Ok(polylog_base(log_arg).powf(8.5) * body * log_eps)
}

/// Classical explicit Euler cost `s N T^2 / (||u_c||^2 eps^2)`.
pub fn classical_explicit_cost(s: f64, n: usize, t: f64, norm_uc: f64, epsilon: f64) -> f64 {
    s * n as f64 * t * t / (norm_uc * norm_uc * epsilon * epsilon)
}

/// Classical implicit Euler cost `N^2 T / h`.
pub fn classical_implicit_cost(n: usize, t: f64, h: f64) -> f64 {
    let nf = n as f64;
    nf * nf * t / h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub regime: String,
    pub n: usize,
    pub epsilon: f64,
    pub quantum: f64,
    pub classical: f64,
    pub label: String,
}

/// Quantum versus classical scaling indicators over a range of `N`.
pub fn complexity_table(
    nu: f64,
    t: f64,
    h: f64,
    sizes: &[usize],
    epsilon: f64,
    norm_uc: f64,
) -> Result<Vec<ComplexityRow>> {
    let mut rows = Vec::new();
    for &n in sizes {
        for regime in Regime::ALL {
            let classical = match regime {
                Regime::Explicit | Regime::ExplicitNormal => classical_explicit_cost(3.0, n, t, norm_uc, epsilon),
                _ => classical_implicit_cost(n, t, h),
            };
            rows.push(ComplexityRow {
                regime: regime.name().into(),
                n,
                epsilon,
                quantum: query_complexity(nu, t, n, epsilon, norm_uc, regime)?,
                classical,
                label: SCALING_LABEL.into(),
            });
        }
    }
    Ok(rows)
}

/// Largest and smallest singular values give `kappa`.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

/// Fidelity check `1 - |<psi_cl|psi>|^2 <= n kappa^2 ||A|| C_l`.
pub fn fidelity_bound_report(
    n_qubits: usize,
    kappa: f64,
    norm_a: f64,
    c_l: f64,
    psi_cl: &[Complex64],
    psi: &[Complex64],
) -> BoundReport {
    let overlap: Complex64 = psi_cl.iter().zip(psi).map(|(a, b)| a.conj() * b).sum();
    let infidelity = (1.0 - overlap.norm_sqr()).max(0.0);
    let bound = n_qubits as f64 * kappa * kappa * norm_a * c_l;
    BoundReport::new("infidelity_bound", infidelity, bound, BoundInputs::default())
}

/// Trace-distance identity residual for one state pair, bounded by `tol`.
pub fn trace_identity_report(psi: &[Complex64], phi: &[Complex64], tol: f64) -> BoundReport {
    BoundReport::new(
        "trace_identity_residual",
        trace_l2_identity_check(psi, phi),
        tol,
        BoundInputs::default(),
    )
}

/// Largest trace-distance identity residual over `pairs` random real state pairs on 1 to
/// `max_qubits` qubits.
pub fn trace_identity_sweep(pairs: usize, max_qubits: usize, seed: u64, tol: f64) -> BoundReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = |dim: usize| -> Vec<Complex64> {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| Complex64::new(x / norm, 0.0)).collect()
    };
    let mut worst = 0.0f64;
    for i in 0..pairs {
        let dim = 1usize << (1 + i % max_qubits.max(1));
        let a = state(dim);
        let b = state(dim);
        worst = worst.max(trace_l2_identity_check(&a, &b));
    }
    BoundReport::new("trace_identity_residual_max", worst, tol, BoundInputs::default())
}

/// `||A||_2` for `A = alpha / dx^2 * L`.
pub fn generator_norm(problem: &HeatProblem, design: &DesignPoint) -> Result<f64> {
    let lap = build_laplacian(problem.n_x)?;
    let lap_norm = lap.symmetric_eigenvalues().amax();
    Ok(problem.diffusion_number(design) / problem.dt * lap_norm)
}

/// Smallest level count `M >= n_t` over the same horizon with `h nu <= cap`.
pub fn levels_for(problem: &HeatProblem, nu: f64, cap: f64) -> usize {
    let t = problem.horizon();
    let needed = (t * nu / cap - 1e-12).ceil().max(1.0) as usize + 1;
    needed.max(problem.n_t)
}

/// The same physics over the same horizon with `m` levels. The initial
/// temperatures are frozen at the base grid's values.
pub fn refined_problem(problem: &HeatProblem, design: &DesignPoint, m: usize) -> HeatProblem {
    let mut p = problem.with_grid(problem.n_x, m);
    p.dt = problem.horizon() / (m - 1) as f64;
    p.initial_profile = InitialProfile::Values {
        temps: problem.initial_temps(design),
    };
    p
}

/// Space-time matrix with `m` levels, without the stability gate.
pub fn stacked_matrix(problem: &HeatProblem, design: &DesignPoint, scheme: Scheme, m: usize) -> Result<DMatrix<f64>> {
    let p = refined_problem(problem, design, m);
    let (chain, diffusion) = assemble_parts(p.n_x, m, scheme)?;
    Ok(chain - diffusion * p.diffusion_number(design))
}

/// `||(I - hA)^{-1}||_2` on the grid with `m` levels.
pub fn implicit_step_inverse_norm(problem: &HeatProblem, design: &DesignPoint, m: usize) -> Result<f64> {
    let p = refined_problem(problem, design, m);
    let lap = build_laplacian(p.n_x)?;
    let step = DMatrix::identity(p.n_x, p.n_x) - lap * p.diffusion_number(design);
    let inv = step.try_inverse().ok_or(Error::Singular)?;
    Ok(spectral_norm(&inv))
}

fn march(problem: &HeatProblem, design: &DesignPoint, scheme: Scheme, m: usize) -> Result<DMatrix<f64>> {
    let p = refined_problem(problem, design, m);
    Ok(classical_time_march(&p, design, scheme)?.values)
}

/// Trajectory at `m` levels and its error against a reference run with
/// `(m - 1) * refine + 1` levels, sampled at the coarse times.
pub fn euler_error(
    problem: &HeatProblem,
    design: &DesignPoint,
    scheme: Scheme,
    m: usize,
    refine: usize,
) -> Result<EulerError> {
    let coarse = march(problem, design, scheme, m)?;
    let fine = march(problem, design, scheme, (m - 1) * refine + 1)?;
    let mut max_level = 0.0f64;
    let mut stacked = 0.0;
    let mut ref_stack = DVector::zeros(coarse.len());
    let mut approx_stack = DVector::zeros(coarse.len());
    let n = coarse.ncols();
    for k in 0..m {
        let diff = coarse.row(k) - fine.row(k * refine);
        let e = diff.norm();
        max_level = max_level.max(e);
        stacked += e * e;
        for i in 0..n {
            ref_stack[k * n + i] = fine[(k * refine, i)];
            approx_stack[k * n + i] = coarse[(k, i)];
        }
    }
    let state_error = (&ref_stack / ref_stack.norm() - &approx_stack / approx_stack.norm()).norm();
    Ok(EulerError {
        h: problem.horizon() / (m - 1) as f64,
        max_level,
        stacked: stacked.sqrt(),
        reference_norm: ref_stack.norm(),
        state_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerError {
    pub h: f64,
    /// `max_k ||u(t_k) - u^k||`.
    pub max_level: f64,
    /// `||u_c - u~||` over stacked levels.
    pub stacked: f64,
    pub reference_norm: f64,
    /// `|| |u_c> - |u~> ||` between normalized stacked vectors.
    pub state_error: f64,
}

/// `C = max_k ||u(t_k) - u^k|| / h` against a reference at `h / 16`.
pub fn calibrate_euler_constant(problem: &HeatProblem, design: &DesignPoint, scheme: Scheme, m: usize) -> Result<f64> {
    let e = euler_error(problem, design, scheme, m, 16)?;
    Ok(e.max_level / e.h)
}

/// Ratio `err(h) / err(h/2)` against one reference at `h / 32`.
pub fn euler_halving_ratio(problem: &HeatProblem, design: &DesignPoint, scheme: Scheme, m: usize) -> Result<f64> {
    let fine = march(problem, design, scheme, (m - 1) * 32 + 1)?;
    let mut errs = [0.0; 2];
    for (slot, r) in [1usize, 2].into_iter().enumerate() {
        let traj = march(problem, design, scheme, (m - 1) * r + 1)?;
        let mut s = 0.0;
        for k in 0..m {
            let d = traj.row(k * r) - fine.row(k * 32);
            s += d.norm_squared();
        }
        errs[slot] = s.sqrt();
    }
    Ok(errs[0] / errs[1])
}

/// Tolerance on the halving ratio: `err(h)/err(h/2)` within 20% of 2.
pub const HALVING_TOLERANCE: f64 = 0.2;

/// Dense checks on each design of the grid.
///
/// Each bound is evaluated at the base step when its precondition holds
/// there, otherwise at the largest refined step over the same horizon that
/// satisfies it (`h nu <= 2` explicit, `h nu <= 0.5` implicit). Euler order
/// is measured at `h nu <= 0.5`.
pub fn verify_bounds(problem: &HeatProblem, designs: &[DesignPoint]) -> Result<Vec<BoundReport>> {
    problem.validate()?;
    let per_design: Vec<Result<Vec<BoundReport>>> = designs.par_iter().map(|d| verify_design(problem, d)).collect();
    let mut out = Vec::new();
    for r in per_design {
        out.extend(r?);
    }
    Ok(out)
}

fn verify_design(problem: &HeatProblem, design: &DesignPoint) -> Result<Vec<BoundReport>> {
    problem.check_design(design)?;
    let nu = generator_norm(problem, design)?;
    let t = problem.horizon();
    let n = problem.n_x;
    let inputs = |m: usize| BoundInputs {
        nu,
        t,
        h: t / (m - 1) as f64,
        n,
        m,
        epsilon: None,
    };
    let mut out = Vec::new();

    let mf = levels_for(problem, nu, 2.0);
    let af = stacked_matrix(problem, design, Scheme::Explicit, mf)?;
    let inp = inputs(mf);
    let kf = condition_number(&af);
    out.push(BoundReport::new("kappa_explicit", kf, kappa_bound_explicit(nu, t, inp.h)?, inp.clone()).at(*design));
    out.push(
        BoundReport::new(
            "kappa_explicit_normal",
            kf,
            kappa_bound_explicit_normal(mf),
            inp.clone(),
        )
        .at(*design),
    );
    out.push(BoundReport::new("norm_explicit", spectral_norm(&af), 2.0 + inp.h * nu, inp).at(*design));

    let mb = levels_for(problem, nu, 0.5);
    let ab = stacked_matrix(problem, design, Scheme::Implicit, mb)?;
    let inp = inputs(mb);
    let inv_norm = implicit_step_inverse_norm(problem, design, mb)?;
    let contraction = inv_norm <= 1.0 + 1e-12;
    out.push(BoundReport::new("step_inverse_norm", inv_norm, 1.0, inp.clone()).at(*design));
    out.push(
        BoundReport::new(
            "kappa_implicit",
            condition_number(&ab),
            kappa_bound_implicit(nu, t, inp.h, contraction)?,
            inp.clone(),
        )
        .at(*design),
    );
    out.push(BoundReport::new("norm_implicit", spectral_norm(&ab), 2.0 + inp.h * nu, inp.clone()).at(*design));

    for (name, scheme) in [
        ("euler_order_explicit", Scheme::Explicit),
        ("euler_order_implicit", Scheme::Implicit),
    ] {
        let ratio = euler_halving_ratio(problem, design, scheme, mb)?;
        out.push(BoundReport::new(name, (ratio / 2.0 - 1.0).abs(), HALVING_TOLERANCE, inp.clone()).at(*design));
    }
    Ok(out)
}

pub fn reports_json(reports: &[BoundReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

/// Fixed-width text table, one report per line.
pub fn reports_table(reports: &[BoundReport]) -> String {
    let mut s = format!(
        "{:<22} {:>6} {:>6} {:>14} {:>14} {:>4} {:>8}  {}\n",
        "quantity", "l", "alpha", "computed", "bound", "M", "h*nu", "ok"
    );
    for r in reports {
        let (l, a) = r.design.map(|d| (d.l, d.alpha)).unwrap_or((f64::NAN, f64::NAN));
        s.push_str(&format!(
            "{:<22} {:>6.3} {:>6.3} {:>14.6e} {:>14.6e} {:>4} {:>8.4}  {}\n",
            r.quantity,
            l,
            a,
            r.computed,
            r.bound,
            r.inputs.m,
            r.inputs.h * r.inputs.nu,
            if r.satisfied { "yes" } else { "NO" }
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_real_state(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Complex64> {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| c(x / norm)).collect()
    }

    #[test]
    fn explicit_kappa_unit_inputs() {
        let v = kappa_bound_explicit(1.0, 1.0, 1.0).unwrap();
        assert!((v - 12.0 * std::f64::consts::E).abs() < 1e-12);
        assert!((v - 32.616).abs() < 5e-3);
    }

    #[test]
    fn explicit_kappa_boundary_and_violation() {
        assert!(kappa_bound_explicit(1.0, 1.0, 2.0).is_ok());
        assert!(matches!(
            kappa_bound_explicit(1.0, 1.0, 2.0001),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn implicit_kappa_branches() {
        assert!((kappa_bound_implicit(0.5, 3.0, 1.0, true).unwrap() - 10.0).abs() < 1e-12);
        let g = kappa_bound_implicit(0.5, 3.0, 1.0, false).unwrap();
        assert!((g - 5.0 * 3f64.exp() / 0.5).abs() < 1e-9);
        assert!(kappa_bound_implicit(1.0, 3.0, 0.6, true).is_err());
    }

    #[test]
    fn kappa_bounds_monotone() {
        let a = kappa_bound_explicit(2.0, 1.0, 0.5).unwrap();
        assert!(kappa_bound_explicit(2.0, 2.0, 0.5).unwrap() > a);
        assert!(kappa_bound_explicit(2.0, 1.0, 0.25).unwrap() > a);
        let b = kappa_bound_implicit(1.0, 1.0, 0.25, true).unwrap();
        assert!(kappa_bound_implicit(1.0, 2.0, 0.25, true).unwrap() > b);
        assert!(kappa_bound_implicit(1.0, 1.0, 0.125, true).unwrap() > b);
    }

    #[test]
    fn trace_identity_identical_and_orthogonal() {
        let psi = vec![c(0.6), c(0.8)];
        assert!(trace_l2_identity_check(&psi, &psi) <= 1e-14);
        let phi = vec![c(0.8), c(-0.6)];
        assert!(trace_l2_identity_check(&psi, &phi) <= 1e-14);
    }

    #[test]
    fn trace_identity_random_real_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst = 0.0f64;
        for i in 0..1000 {
            let dim = 1 << (1 + i % 5);
            let a = random_real_state(&mut rng, dim);
            let b = random_real_state(&mut rng, dim);
            worst = worst.max(trace_l2_identity_check(&a, &b));
        }
        assert!(worst <= 1e-12, "{worst}");
        assert!(trace_identity_sweep(1000, 5, 3, 1e-12).satisfied);
    }

    #[test]
    fn step_size_caps_and_scaling() {
        let h = step_size_select(0.999, 1e-6, 1.0, 4.0, 1.0, StepVariant::Explicit).unwrap();
        assert_eq!(h, 0.5);
        let h = step_size_select(0.999, 1e-6, 1.0, 4.0, 1.0, StepVariant::ImplicitGeneral).unwrap();
        assert_eq!(h, 0.125);
        for v in [
            StepVariant::Explicit,
            StepVariant::Normal { h0: 10.0 },
            StepVariant::ImplicitContraction,
            StepVariant::ImplicitGeneral,
        ] {
            let a = step_size_select(0.2, 50.0, 2.0, 1.0, 1.0, v).unwrap();
            let b = step_size_select(0.1, 50.0, 2.0, 1.0, 1.0, v).unwrap();
            assert!((a / b - 4.0).abs() < 1e-12, "{v:?}");
        }
        assert!(step_size_select(1.0, 1.0, 1.0, 1.0, 1.0, StepVariant::Explicit).is_err());
        assert!(step_size_select(0.0, 1.0, 1.0, 1.0, 1.0, StepVariant::Explicit).is_err());
    }

    #[test]
    fn h0_of_symmetric_and_oscillatory_spectra() {
        let eigs = [c(0.0), c(-1.0), c(-4.0)];
        assert!((h0_from_eigenvalues(&eigs).unwrap() - 0.5).abs() < 1e-15);
        // Weakly damped mode: 2*0.1/(0.01+4) limits h0.
        let eigs = [Complex64::new(-0.1, 2.0)];
        let expect = 0.2 / 4.01;
        assert!((h0_from_eigenvalues(&eigs).unwrap() - expect).abs() < 1e-15);
        assert!(h0_from_eigenvalues(&[c(0.5)]).is_err());
    }

    #[test]
    fn gamma_below_one_and_monotone() {
        for &eps in &[0.9, 0.5, 0.1, 0.01] {
            for &(n, m) in &[(2, 2), (8, 4), (64, 64)] {
                let g = gamma_threshold(eps, 0.1, 1.0, n, m).unwrap();
                assert!(g > 0.0 && g < 1.0);
                assert!(gamma_threshold_normal(eps, n, m).unwrap() < 1.0);
            }
        }
        let mut prev = f64::INFINITY;
        for k in 1..10 {
            let g = gamma_threshold(0.5f64.powi(k), 0.1, 1.0, 8, 4).unwrap();
            assert!(g < prev);
            prev = g;
        }
        assert!(gamma_threshold(0.1, 0.1, 1.0, 16, 4).unwrap() < gamma_threshold(0.1, 0.1, 1.0, 8, 4).unwrap());
        assert!(gamma_threshold_normal(0.1, 16, 4).unwrap() < gamma_threshold_normal(0.1, 8, 4).unwrap());
    }

    #[test]
    fn complexity_structure() {
        let (nu, t, eps, u) = (1.0, 2.0, 0.1, 1.0);
        let a = query_complexity(nu, t, 1 << 10, eps, u, Regime::Explicit).unwrap();
        let b = query_complexity(nu, t, 1 << 11, eps, u, Regime::Explicit).unwrap();
        let la = ((1u64 << 10) as f64 * t * t / (eps * eps)).log2();
        let lb = ((1u64 << 11) as f64 * t * t / (eps * eps)).log2();
        assert!((b / a - (lb / la).powf(8.5)).abs() < 1e-9);

        // The normal regime has no exponential factor in nu.
        let n1 = query_complexity(1.0, t, 64, eps, u, Regime::ExplicitNormal).unwrap();
        let n2 = query_complexity(5.0, t, 64, eps, u, Regime::ExplicitNormal).unwrap();
        assert_eq!(n1, n2);
        let e1 = query_complexity(1.0, t, 64, eps, u, Regime::Explicit).unwrap();
        let e2 = query_complexity(5.0, t, 64, eps, u, Regime::Explicit).unwrap();
        assert!((e2 / e1 - (4.0 * t).exp()).abs() < 1e-6 * e2 / e1);
        // T^3 body: doubling T changes the body by 8 and the polylog by a known ratio.
        let t1 = query_complexity(0.0, 2.0, 64, eps, u, Regime::ExplicitNormal).unwrap();
        let t2 = query_complexity(0.0, 4.0, 64, eps, u, Regime::ExplicitNormal).unwrap();
        let p = |t: f64| (64.0 * t.powi(4) / (eps * eps)).log2().powf(8.5);
        assert!((t2 / t1 - 8.0 * p(4.0) / p(2.0)).abs() < 1e-9);
    }

    #[test]
    fn classical_comparator_overtakes_quantum() {
        let rows = complexity_table(1.0, 1.0, 0.1, &[1 << 10, 1 << 20, 1 << 40], 0.1, 1.0).unwrap();
        let ratio = |n: usize| {
            let r = rows.iter().find(|r| r.n == n && r.regime == "explicit").unwrap();
            r.classical / r.quantum
        };
        assert!(ratio(1 << 10) < ratio(1 << 20));
        assert!(ratio(1 << 20) < ratio(1 << 40));
        assert!(rows.iter().all(|r| r.label == SCALING_LABEL));
    }

    #[test]
    fn non_normal_second_branch() {
        // Upper-triangular A with stable spectrum but ||(I - hA)^{-1}|| > 1.
        let a = DMatrix::from_row_slice(2, 2, &[-0.1, 6.0, 0.0, -0.1]);
        let nu = spectral_norm(&a);
        let h = 0.5 / nu;
        let n = 2;
        let m = 5;
        let step = DMatrix::identity(n, n) - &a * h;
        let inv = step.clone().try_inverse().unwrap();
        assert!(spectral_norm(&inv) > 1.0);
        let mut ab = DMatrix::identity(n * m, n * m);
        for k in 1..m {
            ab.view_mut((k * n, k * n), (n, n)).copy_from(&step);
            ab.view_mut((k * n, (k - 1) * n), (n, n))
                .copy_from(&(-DMatrix::identity(n, n)));
        }
        let t = (m - 1) as f64 * h;
        let bound = kappa_bound_implicit(nu, t, h, false).unwrap();
        assert!(condition_number(&ab) <= bound);
    }

    #[test]
    fn reference_grid_bounds_hold() {
        let problem = HeatProblem::reference();
        let reports = verify_bounds(&problem, &problem.bounds.grid(5)).unwrap();
        assert_eq!(reports.len(), 25 * 8);
        for r in &reports {
            assert!(r.satisfied, "{r:?}");
        }
        let table = reports_table(&reports);
        assert_eq!(table.lines().count(), reports.len() + 1);
        let json = reports_json(&reports);
        let parsed: Vec<BoundReport> = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.len(), reports.len());
        assert!(parsed
            .iter()
            .zip(&reports)
            .all(|(a, b)| a.quantity == b.quantity && a.satisfied == b.satisfied));
    }

    #[test]
    fn base_step_violates_implicit_precondition() {
        let problem = HeatProblem::reference();
        let d = DesignPoint::new(2.0, 0.3);
        let nu = generator_norm(&problem, &d).unwrap();
        assert!(problem.dt * nu > 0.5);
        assert!(kappa_bound_implicit(nu, problem.horizon(), problem.dt, true).is_err());
        assert!(levels_for(&problem, nu, 0.5) > problem.n_t);
    }

    #[test]
    fn chosen_step_meets_accuracy() {
        let problem = HeatProblem::reference();
        for d in [DesignPoint::new(2.0, 0.3), DesignPoint::new(4.0, 0.2)] {
            let nu = generator_norm(&problem, &d).unwrap();
            let t = problem.horizon();
            let m0 = levels_for(&problem, nu, 0.5);
            let base = euler_error(&problem, &d, Scheme::Implicit, m0, 16).unwrap();
            let c = base.max_level / base.h;
            let eps = 0.05;
            let h = step_size_select(eps, c, t, nu, base.reference_norm, StepVariant::ImplicitGeneral).unwrap();
            let m = ((t / h).ceil() as usize + 1).max(m0);
            let e = euler_error(&problem, &d, Scheme::Implicit, m, 16).unwrap();
            assert!(e.state_error <= eps, "{d:?}: {} > {eps}", e.state_error);
        }
    }

    #[test]
    fn fidelity_bound_report_on_exact_state() {
        let psi = vec![c(1.0), c(0.0)];
        let r = fidelity_bound_report(1, 1.0, 1.0, 0.0, &psi, &psi);
        assert!(r.satisfied);
        let phi = vec![c(0.0), c(1.0)];
        assert!(!fidelity_bound_report(1, 1.0, 1.0, 0.1, &psi, &phi).satisfied);
    }
}
