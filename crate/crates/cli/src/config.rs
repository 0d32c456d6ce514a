//! Experiment configuration, read from one TOML file.

use std::path::Path;

use anyhow::Context;
use bvqpco_core::bayes_opt::{Acquisition, BoConfig, FitConfig};
use bvqpco_core::pde_model::{CostWeights, DesignBounds, DesignPoint, HeatProblem, InitialProfile};
use bvqpco_core::quantum_kernel::{AnsatzLayout, Shots};
use bvqpco_core::vqls::VqlsConfig;
use serde::{Deserialize, Serialize};

use crate::ValidationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Bvqpco,
    ClassicalBaseline,
    VqlsOnly,
    VerifyBounds,
}

/// Heat problem with a constant boundary flux `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemBlock {
    pub n_x: usize,
    pub n_t: usize,
    pub dt: f64,
    pub conductivity: f64,
    pub q: f64,
    pub initial_profile: InitialProfile,
    pub bounds: DesignBounds,
    pub weights: CostWeights,
}

impl Default for ProblemBlock {
    fn default() -> Self {
        let p = HeatProblem::reference();
        Self {
            n_x: p.n_x,
            n_t: p.n_t,
            dt: p.dt,
            conductivity: p.conductivity,
            q: p.flux[0],
            initial_profile: p.initial_profile,
            bounds: p.bounds,
            weights: p.weights,
        }
    }
}

impl ProblemBlock {
    pub fn build(&self) -> HeatProblem {
        HeatProblem {
            n_x: self.n_x,
            n_t: self.n_t,
            dt: self.dt,
            conductivity: self.conductivity,
            flux: vec![self.q; self.n_t.saturating_sub(1)],
            initial_profile: self.initial_profile.clone(),
            bounds: self.bounds,
            weights: self.weights,
        }
    }
}

/// Single-system convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqlsBlock {
    pub solver: VqlsConfig,
    /// Designs `[l, alpha]` to solve.
    pub designs: Vec<[f64; 2]>,
    /// Independent initializations per design; the best is reported.
    pub seeds: usize,
}

impl Default for VqlsBlock {
    fn default() -> Self {
        Self {
            solver: VqlsConfig::default(),
            designs: vec![[4.0, 0.2], [2.0, 0.3]],
            seeds: 5,
        }
    }
}

/// Inner solver settings used inside the design loop.
pub fn design_loop_solver() -> VqlsConfig {
    VqlsConfig {
        gamma: 1e-5,
        max_iters: 2000,
        adagrad_step: 0.05,
        ansatz: AnsatzLayout {
            layers: 8,
            ..AnsatzLayout::default()
        },
        ..VqlsConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoBlock {
    pub n_init: usize,
    pub iterations: usize,
    pub n_mc: usize,
    pub acquisition: Acquisition,
    pub acquisition_starts: usize,
    pub scramble: bool,
    pub fit: FitConfig,
    /// `c` in the standard-error model `c √(C_g ln N)`.
    pub noise_scale: f64,
    pub restarts: usize,
    pub oracle_injection: bool,
    pub inner: VqlsConfig,
}

impl Default for BoBlock {
    fn default() -> Self {
        let bo = BoConfig::default();
        Self {
            n_init: bo.n_init,
            iterations: bo.iterations,
            n_mc: bo.n_mc,
            acquisition: bo.acquisition,
            acquisition_starts: bo.acquisition_starts,
            scramble: bo.scramble,
            fit: bo.fit,
            noise_scale: 0.1,
            restarts: 3,
            oracle_injection: false,
            inner: design_loop_solver(),
        }
    }
}

impl BoBlock {
    pub fn search(&self, seed: u64) -> BoConfig {
        BoConfig {
            n_init: self.n_init,
            iterations: self.iterations,
            n_mc: self.n_mc,
            acquisition: self.acquisition,
            acquisition_starts: self.acquisition_starts,
            scramble: self.scramble,
            fit: FitConfig { seed, ..self.fit },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    /// Points per axis.
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Master seed; every random stream derives from it.
    pub seed: u64,
    #[serde(default)]
    pub problem: ProblemBlock,
    #[serde(default)]
    pub vqls: VqlsBlock,
    #[serde(default)]
    pub bo: BoBlock,
    #[serde(default = "baseline_default")]
    pub baseline: GridBlock,
    #[serde(default = "verify_default")]
    pub verify: GridBlock,
}

fn baseline_default() -> GridBlock {
    GridBlock { grid: 41 }
}

fn verify_default() -> GridBlock {
    GridBlock { grid: 5 }
}

impl Default for GridBlock {
    fn default() -> Self {
        baseline_default()
    }
}

impl ExperimentConfig {
    pub fn reference(mode: Mode, seed: u64) -> Self {
        Self {
            mode,
            seed,
            problem: ProblemBlock::default(),
            vqls: VqlsBlock::default(),
            bo: BoBlock::default(),
            baseline: baseline_default(),
            verify: verify_default(),
        }
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ValidationError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(|e| ValidationError(format!("{e:#}")))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn problem(&self) -> HeatProblem {
        self.problem.build()
    }

    pub fn vqls_designs(&self) -> Vec<DesignPoint> {
        self.vqls.designs.iter().map(|d| DesignPoint::new(d[0], d[1])).collect()
    }

    /// Overrides the shot budget of every solver block.
    pub fn set_shots(&mut self, shots: Shots) {
        self.vqls.solver.shots = shots;
        self.bo.inner.shots = shots;
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let v = |e: bvqpco_core::Error| ValidationError(e.to_string());
        let problem = self.problem();
        problem.validate().map_err(v)?;
        let bad = |m: &str| Err(ValidationError(m.to_string()));
        match self.mode {
            Mode::Bvqpco => {
                self.bo.inner.validate().map_err(v)?;
                if self.bo.n_init == 0 {
                    return bad("bo.n_init must be at least 1");
                }
                if self.bo.restarts == 0 {
                    return bad("bo.restarts must be at least 1");
                }
                if self.bo.noise_scale.is_nan() || self.bo.noise_scale < 0.0 {
                    return bad("bo.noise_scale must be non-negative");
                }
                if self.bo.acquisition == Acquisition::NoisyEi && self.bo.n_mc == 0 {
                    return bad("bo.n_mc must be positive for noisy EI");
                }
            }
            Mode::VqlsOnly => {
                self.vqls.solver.validate().map_err(v)?;
                if self.vqls.designs.is_empty() || self.vqls.seeds == 0 {
                    return bad("vqls.designs and vqls.seeds must be non-empty");
                }
                for d in self.vqls_designs() {
                    problem.check_design(&d).map_err(v)?;
                }
            }
            Mode::ClassicalBaseline => {
                if self.baseline.grid < 2 {
                    return bad("baseline.grid must be at least 2");
                }
            }
            Mode::VerifyBounds => {
                if self.verify.grid < 2 {
                    return bad("verify.grid must be at least 2");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_uses_reference_blocks() {
        let cfg = ExperimentConfig::from_toml("mode = \"classical-baseline\"\nseed = 3\n").unwrap();
        assert_eq!(cfg.problem(), HeatProblem::reference());
        assert_eq!(cfg.baseline.grid, 41);
        assert_eq!(cfg.verify.grid, 5);
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(ExperimentConfig::from_toml("mode = \"bvqpco\"\n").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "mode = \"bvqpco\"\nseed = 0\n[bo]\nitersations = 3\n";
        assert!(ExperimentConfig::from_toml(text).is_err());
    }

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::reference(Mode::Bvqpco, 7);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_blocks_rejected() {
        let text = "mode = \"vqls-only\"\nseed = 0\n[vqls]\ndesigns = [[9.0, 0.2]]\n";
        assert!(ExperimentConfig::from_toml(text).is_err());
        let text = "mode = \"bvqpco\"\nseed = 0\n[problem]\ndt = -1.0\n";
        assert!(ExperimentConfig::from_toml(text).is_err());
        let text = "mode = \"bvqpco\"\nseed = 0\n[bo.inner]\ngamma = 0.0\n";
        assert!(ExperimentConfig::from_toml(text).is_err());
    }

    #[test]
    fn shipped_reference_config_parses() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.problem(), HeatProblem::reference());
        assert_eq!(cfg.bo.inner, design_loop_solver());
    }
}
