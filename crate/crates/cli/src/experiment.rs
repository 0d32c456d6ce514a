//! The four experiment modes and their artifacts.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use bvqpco_core::bayes_opt::{bo_loop, BoState, Observation};
use bvqpco_core::design_objective::{
    classical_grid, classical_state, design_cost_classical, evaluations_csv, grid_argmin, Evaluation, QuantumEvaluator,
};
use bvqpco_core::error_bounds::{
    complexity_table, condition_number, fidelity_bound_report, generator_norm, reports_json, reports_table,
    spectral_norm, trace_identity_report, trace_identity_sweep, verify_bounds, BoundReport,
};
use bvqpco_core::pauli_lcu::pad_system;
use bvqpco_core::pde_model::{assemble, DesignPoint, HeatProblem, Scheme};
use bvqpco_core::vqls::{CostVariant, Vqls, VqlsResult};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{ExperimentConfig, Mode};

/// Interface-optimal design of the reference study.
pub const REFERENCE_OPTIMUM: [f64; 2] = [2.90, 0.278];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub summary: serde_json::Value,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn write(out: &Path, name: &str, contents: &str) -> Result<()> {
    let path = out.join(name);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Runs the configured mode, writing artifacts under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(out, "config.toml", &cfg.to_toml())?;
    let started = Instant::now();
    let (checks, summary) = match cfg.mode {
        Mode::ClassicalBaseline => run_baseline(cfg, out)?,
        Mode::Bvqpco => run_bvqpco(cfg, out)?,
        Mode::VqlsOnly => run_vqls_only(cfg, out)?,
        Mode::VerifyBounds => run_verify(cfg, out)?,
    };
    log::info!("{:?} finished in {:.1}s", cfg.mode, started.elapsed().as_secs_f64());
    let report = RunReport {
        mode: cfg.mode,
        seed: cfg.seed,
        checks,
        summary,
    };
    write(out, "report.json", &pretty(&report))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub grid: usize,
    pub design: DesignPoint,
    pub cost: f64,
    /// Grid spacing in `(l, alpha)`.
    pub cell: [f64; 2],
}

pub fn grid_optimum(problem: &HeatProblem, n: usize) -> Result<(GridOptimum, Vec<Evaluation>)> {
    let evals = classical_grid(problem, n)?;
    let best = grid_argmin(&evals).context("empty grid")?;
    let b = problem.bounds;
    let step = (n - 1) as f64;
    let opt = GridOptimum {
        grid: n,
        design: best.design,
        cost: best.cost,
        cell: [(b.l_max - b.l_min) / step, (b.alpha_max - b.alpha_min) / step],
    };
    Ok((opt, evals))
}

/// Whether `design` lies within one grid cell of `target` on both axes.
pub fn within_one_cell(design: &DesignPoint, target: [f64; 2], cell: [f64; 2]) -> bool {
    let slack = 1.0 + 1e-9;
    (design.l - target[0]).abs() <= cell[0] * slack && (design.alpha - target[1]).abs() <= cell[1] * slack
}

fn run_baseline(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<Check>, serde_json::Value)> {
    let problem = cfg.problem();
    let (opt, evals) = grid_optimum(&problem, cfg.baseline.grid)?;
    write(out, "baseline_grid.csv", &evaluations_csv(&evals))?;
    let mut checks = Vec::new();
    if problem == HeatProblem::reference() {
        let ok = within_one_cell(&opt.design, REFERENCE_OPTIMUM, opt.cell);
        checks.push(Check::new(
            "argmin_within_one_cell",
            ok,
            format!(
                "argmin ({:.4}, {:.4}) vs ({}, {}), cell ({:.4}, {:.5})",
                opt.design.l, opt.design.alpha, REFERENCE_OPTIMUM[0], REFERENCE_OPTIMUM[1], opt.cell[0], opt.cell[1]
            ),
        ));
    }
    let summary = json!({ "optimum": opt });
    write(out, "baseline.json", &pretty(&summary))?;
    Ok((checks, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvqpcoSummary {
    pub budget: usize,
    pub failures: usize,
    pub best_design: DesignPoint,
    pub best_observed_cost: f64,
    pub best_observed_stderr: f64,
    /// Classical cost of the returned design.
    pub best_true_cost: f64,
    pub grid_optimum: GridOptimum,
    pub relative_error: f64,
}

/// Seed of the inner solver at outer iteration `iter`.
pub fn inner_seed(seed: u64, iter: usize) -> u64 {
    seed.wrapping_mul(1000).wrapping_add(iter as u64)
}

/// The design loop: Sobol designs, then surrogate-guided designs, each scored by
/// a VQLS solve.
pub fn bvqpco(cfg: &ExperimentConfig) -> Result<(BoState, Vec<(usize, Evaluation)>)> {
    let problem = cfg.problem();
    let mut ev = QuantumEvaluator::new(problem.clone(), cfg.bo.inner.clone())?;
    ev.noise_scale = cfg.bo.noise_scale;
    ev.restarts = cfg.bo.restarts;
    ev.oracle_injection = cfg.bo.oracle_injection;
    let b = problem.bounds;
    let bounds = [(b.l_min, b.l_max), (b.alpha_min, b.alpha_max)];
    let mut evals = Vec::new();
    let mut objective = |x: &[f64], iter: usize| {
        let d = b.clamp(DesignPoint::new(x[0], x[1]));
        let e = ev.evaluate(&d, inner_seed(cfg.seed, iter))?;
        log::info!(
            "iter {iter:2}: l={:.4} alpha={:.4} cost={:.5} stderr={:.2e}",
            d.l,
            d.alpha,
            e.cost,
            e.stderr
        );
        let obs = Observation {
            mean: e.cost,
            stderr: e.stderr,
        };
        evals.push((iter, e));
        Ok(obs)
    };
    let state = bo_loop(&mut objective, &bounds, &cfg.bo.search(cfg.seed))?;
    Ok((state, evals))
}

pub fn summarize_bvqpco(cfg: &ExperimentConfig, state: &BoState) -> Result<BvqpcoSummary> {
    let problem = cfg.problem();
    let best = state.best().context("every design evaluation failed")?;
    let obs = best.obs.expect("best record has an observation");
    let design = DesignPoint::new(best.x[0], best.x[1]);
    let true_cost = design_cost_classical(&design, &problem)?;
    let (opt, _) = grid_optimum(&problem, cfg.baseline.grid)?;
    Ok(BvqpcoSummary {
        budget: state.records.len(),
        failures: state.records.iter().filter(|r| r.obs.is_none()).count(),
        best_design: design,
        best_observed_cost: obs.mean,
        best_observed_stderr: obs.stderr,
        best_true_cost: true_cost,
        relative_error: (true_cost - opt.cost) / opt.cost.abs(),
        grid_optimum: opt,
    })
}

fn run_bvqpco(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<Check>, serde_json::Value)> {
    let (state, evals) = bvqpco(cfg)?;
    write(out, "trace.csv", &state.trace_csv(&["l", "alpha"]))?;
    let rows: Vec<Evaluation> = evals.iter().map(|(_, e)| e.clone()).collect();
    write(out, "evaluations.csv", &evaluations_csv(&rows))?;
    for (iter, e) in &evals {
        if let Some(res) = &e.vqls {
            write(out, &format!("vqls/iter_{iter:03}.csv"), &res.history_csv())?;
        }
    }
    let failures = state.records.iter().filter(|r| r.obs.is_none()).count();
    if 2 * failures > state.records.len() {
        bail!("{failures} of {} design evaluations failed", state.records.len());
    }
    let summary = summarize_bvqpco(cfg, &state)?;
    write(out, "best.json", &pretty(&summary))?;
    let mut checks = vec![Check::new(
        "failed_designs_at_most_half",
        true,
        format!("{failures} of {}", summary.budget),
    )];
    if cfg.problem() == HeatProblem::reference() {
        checks.push(Check::new(
            "best_within_1pct_of_grid_optimum",
            summary.relative_error <= 0.01,
            format!(
                "true cost {:.5} vs grid optimum {:.5} ({:.3}%)",
                summary.best_true_cost,
                summary.grid_optimum.cost,
                100.0 * summary.relative_error
            ),
        ));
    }
    Ok((checks, serde_json::to_value(&summary)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqlsDesignSummary {
    pub design: DesignPoint,
    pub best_seed: u64,
    pub final_cost: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub local_cost: f64,
    pub fidelity: f64,
    pub kappa: f64,
    pub norm_a: f64,
    pub fidelity_bound: BoundReport,
    pub trace_identity: BoundReport,
}

/// Best-of-seeds VQLS solve of one design with its classical comparison.
pub fn vqls_study(cfg: &ExperimentConfig, design: &DesignPoint) -> Result<(VqlsDesignSummary, Vec<VqlsResult>)> {
    let problem = cfg.problem();
    let ev = QuantumEvaluator::new(problem.clone(), cfg.vqls.solver.clone())?;
    let vp = ev.vqls_problem(design)?;
    let mut runs = Vec::new();
    for s in 0..cfg.vqls.seeds as u64 {
        let solver = bvqpco_core::vqls::VqlsConfig {
            rng_seed: cfg.seed.wrapping_add(s),
            ..cfg.vqls.solver.clone()
        };
        runs.push(Vqls::new(&vp, solver)?.solve()?);
    }
    let (best_idx, best) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.final_cost.total_cmp(&b.1.final_cost))
        .context("no VQLS runs")?;
    let psi = best.solution_state.clone().context("solver returned no state")?;
    let psi_cl = classical_state(&problem, design)?;
    let system = assemble(&problem, design, Scheme::Implicit)?;
    let (padded, _) = pad_system(&system.matrix, &system.rhs);
    let kappa = condition_number(&padded);
    let norm_a = spectral_norm(&padded);
    let local_cost = Vqls::new(&vp, cfg.vqls.solver.clone())?.cost_variant(&best.theta_star, CostVariant::L)?;
    let n = vp.n_qubits();
    let fidelity_bound = fidelity_bound_report(n, kappa, norm_a, local_cost, psi_cl.amplitudes(), psi.amplitudes());
    let trace_identity = trace_identity_report(psi.amplitudes(), psi_cl.amplitudes(), 1e-12);
    let summary = VqlsDesignSummary {
        design: *design,
        best_seed: cfg.seed.wrapping_add(best_idx as u64),
        final_cost: best.final_cost,
        iterations_used: best.iterations_used,
        converged: best.converged,
        local_cost,
        fidelity: psi_cl.fidelity(&psi),
        kappa,
        norm_a,
        fidelity_bound,
        trace_identity,
    };
    Ok((summary, runs))
}

/// `level,node,x,classical,quantum`; the quantum profile is the solver state
/// rescaled to the classical norm with its global phase removed.
pub fn profiles_csv(problem: &HeatProblem, design: &DesignPoint, psi: &[num_complex::Complex64]) -> Result<String> {
    let system = assemble(problem, design, Scheme::Implicit)?;
    let u = bvqpco_core::pde_model::classical_solve(&system)?;
    let overlap: num_complex::Complex64 = u.iter().zip(psi).map(|(a, b)| b * *a).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap.conj() / overlap.norm()
    } else {
        1.0.into()
    };
    let scale = u.norm();
    let dx = design.l * problem.dy();
    let mut s = String::from("level,node,x,classical,quantum\n");
    for k in 0..problem.n_t {
        for i in 0..problem.n_x {
            let idx = k * problem.n_x + i;
            let q = (psi[idx] * phase).re * scale;
            s.push_str(&format!("{k},{i},{:.12},{:.12e},{:.12e}\n", i as f64 * dx, u[idx], q));
        }
    }
    Ok(s)
}

fn run_vqls_only(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<Check>, serde_json::Value)> {
    let problem = cfg.problem();
    let mut checks = Vec::new();
    let mut summaries = Vec::new();
    let mut histories = String::from("design,seed,iter,cost\n");
    for (i, d) in cfg.vqls_designs().iter().enumerate() {
        let (summary, runs) = vqls_study(cfg, d)?;
        for (s, run) in runs.iter().enumerate() {
            for (it, c) in run.cost_history.iter().enumerate() {
                histories.push_str(&format!("{i},{},{it},{c:.12e}\n", cfg.seed.wrapping_add(s as u64)));
            }
        }
        let best = &runs[(summary.best_seed - cfg.seed) as usize];
        write(out, &format!("vqls_design{i}_history.csv"), &best.history_csv())?;
        let psi = best.solution_state.as_ref().context("solver returned no state")?;
        write(
            out,
            &format!("vqls_design{i}_profiles.csv"),
            &profiles_csv(&problem, d, psi.amplitudes())?,
        )?;
        let tag = format!("({}, {})", d.l, d.alpha);
        checks.push(Check::new(
            format!("converged {tag}"),
            summary.converged,
            format!(
                "C_g = {:.3e} after {} iterations (gamma {:.1e}, best seed {})",
                summary.final_cost, summary.iterations_used, cfg.vqls.solver.gamma, summary.best_seed
            ),
        ));
        checks.push(Check::new(
            format!("fidelity_bound {tag}"),
            summary.fidelity_bound.satisfied,
            format!(
                "1 - F = {:.3e} <= n kappa^2 ||A|| C_l = {:.3e}",
                summary.fidelity_bound.computed, summary.fidelity_bound.bound
            ),
        ));
        summaries.push(summary);
    }
    write(out, "cost_histories.csv", &histories)?;
    let value = serde_json::to_value(&summaries)?;
    write(out, "vqls.json", &pretty(&value))?;
    Ok((checks, value))
}

fn run_verify(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<Check>, serde_json::Value)> {
    let problem = cfg.problem();
    let mut reports = verify_bounds(&problem, &problem.bounds.grid(cfg.verify.grid))?;
    reports.push(trace_identity_sweep(1000, 5, cfg.seed, 1e-12));
    write(out, "bounds.json", &reports_json(&reports))?;
    write(out, "bounds.txt", &reports_table(&reports))?;

    let mid = problem.bounds.from_unit([0.5, 0.5]);
    let nu = generator_norm(&problem, &mid)?;
    let sizes: Vec<usize> = (3..=40).step_by(4).map(|k| 1usize << k).collect();
    let rows = complexity_table(nu, problem.horizon(), problem.dt, &sizes, 0.01, 1.0)?;
    let mut csv = String::from("regime,n,epsilon,quantum,classical,label\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{:.6e},{:.6e},{}\n",
            r.regime, r.n, r.epsilon, r.quantum, r.classical, r.label
        ));
    }
    write(out, "complexity.csv", &csv)?;

    let failed: Vec<&BoundReport> = reports.iter().filter(|r| !r.satisfied).collect();
    let checks = vec![Check::new(
        "all_bounds_satisfied",
        failed.is_empty(),
        format!(
            "{} of {} reports satisfied",
            reports.len() - failed.len(),
            reports.len()
        ),
    )];
    let summary = json!({ "reports": reports.len(), "failed": failed });
    Ok((checks, summary))
}
