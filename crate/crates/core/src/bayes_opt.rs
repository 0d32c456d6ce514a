//! Gaussian-process Bayesian optimization over a box.
//!
//! The surrogate works in unit-cube coordinates. Observations carry their own
//! noise variances (fixed-noise GP); kernel length-scales and signal variance
//! come from maximizing the log marginal likelihood, with the constant mean
//! profiled out by generalized least squares.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sobol::params::JoeKuoD6;
use sobol::Sobol;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

const LOG_2PI: f64 = 1.837_877_066_409_345_5;
const SQRT5: f64 = 2.236_067_977_499_79;
/// Length-scale search range in unit-cube coordinates.
const LENGTH_RANGE: (f64, f64) = (0.01, 10.0);

/// Matérn-5/2 ARD kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matern52 {
    pub length_scales: Vec<f64>,
    pub signal_var: f64,
}

impl Matern52 {
    fn scaled_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((x, y), l)| ((x - y) / l).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r = self.scaled_dist(a, b);
        self.signal_var * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0) * (-SQRT5 * r).exp()
    }

    /// `∂k/∂ log ℓ_j`.
    fn dlog_length(&self, a: &[f64], b: &[f64], j: usize) -> f64 {
        let r = self.scaled_dist(a, b);
        let d = (a[j] - b[j]) / self.length_scales[j];
        self.signal_var * 5.0 / 3.0 * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp() * d * d
    }

    pub fn gram(&self, x: &[Vec<f64>]) -> DMatrix<f64> {
        let m = x.len();
        DMatrix::from_fn(m, m, |i, j| self.eval(&x[i], &x[j]))
    }

    pub fn cross(&self, x: &[Vec<f64>], p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().map(|xi| self.eval(xi, p)))
    }
}

/// Cholesky with geometric jitter escalation.
fn robust_cholesky(m: &DMatrix<f64>, scale: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = m.clone().cholesky() {
        return Ok((c, 0.0));
    }
    let n = m.nrows();
    let mut jitter = 1e-10 * scale.max(f64::MIN_POSITIVE);
    for _ in 0..7 {
        let shifted = m + DMatrix::identity(n, n) * jitter;
        if let Some(c) = shifted.cholesky() {
            log::debug!("cholesky needed jitter {jitter:e}");
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Cholesky)
}

/// Fitted fixed-noise GP.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub kernel: Matern52,
    pub mean: f64,
    pub x: Vec<Vec<f64>>,
    pub y: DVector<f64>,
    /// Per-observation noise variances.
    pub noise: DVector<f64>,
    /// Diagonal shift added to make the kernel matrix factorizable.
    pub jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    pub log_likelihood: f64,
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters; the constant mean is the
    /// generalized least-squares estimate.
    pub fn condition(kernel: Matern52, x: Vec<Vec<f64>>, y: DVector<f64>, noise: DVector<f64>) -> Result<Self> {
        let m = x.len();
        if m == 0 || y.len() != m || noise.len() != m {
            return Err(Error::InvalidDimension(format!(
                "{m} inputs, {} outputs, {} noise values",
                y.len(),
                noise.len()
            )));
        }
        let k = kernel.gram(&x) + DMatrix::from_diagonal(&noise);
        let (chol, jitter) = robust_cholesky(&k, kernel.signal_var)?;
        let ones = DVector::from_element(m, 1.0);
        let k_ones = chol.solve(&ones);
        let mean = k_ones.dot(&y) / k_ones.dot(&ones);
        let resid = y.add_scalar(-mean);
        let alpha = chol.solve(&resid);
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let log_likelihood = -0.5 * resid.dot(&alpha) - 0.5 * log_det - 0.5 * m as f64 * LOG_2PI;
        Ok(Self {
            kernel,
            mean,
            x,
            y,
            noise,
            jitter,
            chol,
            alpha,
            log_likelihood,
        })
    }

    /// Gradient of the log marginal likelihood in `(log ℓ_1.., log σ²)`.
    fn likelihood_gradient(&self) -> Vec<f64> {
        let m = self.x.len();
        let k_inv = self.chol.inverse();
        let w = &self.alpha * self.alpha.transpose() - k_inv;
        let d = self.kernel.length_scales.len();
        let mut grad = vec![0.0; d + 1];
        for i in 0..m {
            for j in 0..m {
                let wij = w[(i, j)];
                for (k, g) in grad.iter_mut().enumerate().take(d) {
                    *g += wij * self.kernel.dlog_length(&self.x[i], &self.x[j], k);
                }
                grad[d] += wij * self.kernel.eval(&self.x[i], &self.x[j]);
            }
        }
        grad.iter_mut().for_each(|g| *g *= 0.5);
        grad
    }

    pub fn predict(&self, p: &[f64]) -> (f64, f64) {
        let ks = self.kernel.cross(&self.x, p);
        let mu = self.mean + ks.dot(&self.alpha);
        let v = self
            .chol
            .l()
            .solve_lower_triangular(&ks)
            .expect("cholesky factor is nonsingular");
        let var = (self.kernel.signal_var - v.norm_squared()).max(0.0);
        (mu, var)
    }

    pub fn best_observed(&self) -> f64 {
        self.y.min()
    }
}

/// Hyperparameter fitting controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_steps: 200,
            seed: 0,
        }
    }
}

/// Maximum-likelihood fit by multi-start projected gradient ascent.
pub fn gp_fit(x: &[Vec<f64>], y: &[f64], noise: &[f64], cfg: &FitConfig) -> Result<GpModel> {
    let m = x.len();
    if m < 2 {
        return Err(Error::InvalidProblem(format!("need at least 2 points to fit, got {m}")));
    }
    let dim = x[0].len();
    if x.iter().any(|xi| xi.len() != dim) {
        return Err(Error::InvalidDimension("inputs of mixed dimension".into()));
    }
    let ybar = y.iter().sum::<f64>() / m as f64;
    let var = y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>() / m as f64;
    // all-equal data still gets a strictly positive signal variance
    let var = var.max(1e-10 * ybar.abs().max(1.0).powi(2));
    let lo: Vec<f64> = (0..dim)
        .map(|_| LENGTH_RANGE.0.ln())
        .chain([(1e-4 * var).ln()])
        .collect();
    let hi: Vec<f64> = (0..dim)
        .map(|_| LENGTH_RANGE.1.ln())
        .chain([(1e2 * var).ln()])
        .collect();
    let yv = DVector::from_column_slice(y);
    let nv = DVector::from_column_slice(noise);
    let build = |h: &[f64]| -> Result<GpModel> {
        let kernel = Matern52 {
            length_scales: h[..dim].iter().map(|v| v.exp()).collect(),
            signal_var: h[dim].exp(),
        };
        GpModel::condition(kernel, x.to_vec(), yv.clone(), nv.clone())
    };
    let clamp = |h: &mut Vec<f64>| {
        for (i, v) in h.iter_mut().enumerate() {
            *v = v.clamp(lo[i], hi[i]);
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut starts = vec![(0..dim).map(|_| 0.3f64.ln()).chain([var.ln()]).collect::<Vec<f64>>()];
    for _ in 1..cfg.restarts.max(1) {
        starts.push((0..=dim).map(|i| rng.random_range(lo[i]..hi[i])).collect());
    }

    let mut best: Option<GpModel> = None;
    for mut h in starts {
        let Ok(mut model) = build(&h) else { continue };
        let mut step = 0.5;
        for _ in 0..cfg.max_steps {
            let g = model.likelihood_gradient();
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm < 1e-8 {
                break;
            }
            let mut improved = false;
            while step > 1e-8 {
                let mut cand: Vec<f64> = h.iter().zip(&g).map(|(v, gi)| v + step * gi / gnorm).collect();
                clamp(&mut cand);
                if let Ok(next) = build(&cand) {
                    if next.log_likelihood > model.log_likelihood {
                        h = cand;
                        model = next;
                        improved = true;
                        step *= 1.5;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| model.log_likelihood > b.log_likelihood) {
            best = Some(model);
        }
    }
    best.ok_or(Error::Cholesky)
}

pub fn gp_predict(model: &GpModel, p: &[f64]) -> (f64, f64) {
    model.predict(p)
}

/// Closed-form expected improvement for minimization.
pub fn expected_improvement_from(mu: f64, sigma: f64, f_star: f64) -> f64 {
    if sigma <= 0.0 {
        return (f_star - mu).max(0.0);
    }
    let z = (f_star - mu) / sigma;
    let n = Normal::standard();
    ((f_star - mu) * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

pub fn expected_improvement(model: &GpModel, p: &[f64], f_star: f64) -> f64 {
    let (mu, var) = model.predict(p);
    expected_improvement_from(mu, var.sqrt(), f_star)
}

/// First `n` points of a Sobol sequence in `[0,1)^dim`.
///
/// Unscrambled sequences skip the origin and start at `(0.5, …)`; scrambled
/// ones use an Owen scramble keyed by `seed`.
pub fn sobol_unit(n: usize, dim: usize, seed: u64, scramble: bool) -> Vec<Vec<f64>> {
    if scramble {
        let key = (seed ^ (seed >> 32)) as u32;
        (0..n as u32)
            .map(|i| {
                (0..dim as u32)
                    .map(|d| sobol_burley::sample(i, d, key) as f64)
                    .collect()
            })
            .collect()
    } else {
        let params = JoeKuoD6::minimal();
        Sobol::<f64>::new(dim, &params).skip(1).take(n).collect()
    }
}

/// Quasi-random initial designs mapped into `bounds`.
pub fn sobol_init(bounds: &[(f64, f64)], n: usize, seed: u64, scramble: bool) -> Vec<Vec<f64>> {
    sobol_unit(n, bounds.len(), seed, scramble)
        .into_iter()
        .map(|u| from_unit(bounds, &u))
        .collect()
}

pub fn to_unit(bounds: &[(f64, f64)], x: &[f64]) -> Vec<f64> {
    x.iter().zip(bounds).map(|(v, (lo, hi))| (v - lo) / (hi - lo)).collect()
}

pub fn from_unit(bounds: &[(f64, f64)], u: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(bounds)
        .map(|(v, (lo, hi))| (lo + v * (hi - lo)).clamp(*lo, *hi))
        .collect()
}

/// Monte-Carlo noisy expected improvement with a fixed set of quasi-random
/// draws of the latent function at the training inputs.
pub struct NoisyEi<'a> {
    model: &'a GpModel,
    /// Latent draws minus the constant mean, one column per draw.
    draws: DMatrix<f64>,
    f_stars: Vec<f64>,
    noiseless: Cholesky<f64, Dyn>,
}

impl<'a> NoisyEi<'a> {
    pub fn new(model: &'a GpModel, n_draws: usize, seed: u64) -> Result<Self> {
        if n_draws == 0 {
            return Err(Error::InvalidProblem("noisy EI needs at least one draw".into()));
        }
        let m = model.x.len();
        let kf = model.kernel.gram(&model.x);
        // posterior of the latent values at the training inputs
        let solved = model.chol.solve(&kf);
        let post_mean = kf.transpose() * &model.alpha;
        let mut post_cov = &kf - kf.transpose() * solved;
        post_cov = (&post_cov + post_cov.transpose()) * 0.5;
        let (lam, _) = robust_cholesky(&post_cov, model.kernel.signal_var)?;
        let lam = lam.l();
        let normal = Normal::standard();
        let u = sobol_unit(n_draws, m, seed, true);
        let mut draws = DMatrix::zeros(m, n_draws);
        let mut f_stars = Vec::with_capacity(n_draws);
        for (i, ui) in u.iter().enumerate() {
            let z = DVector::from_iterator(m, ui.iter().map(|s| normal.inverse_cdf(s.clamp(1e-9, 1.0 - 1e-9))));
            let f = &post_mean + &lam * z;
            f_stars.push(model.mean + f.min());
            draws.set_column(i, &f);
        }
        let (noiseless, _) = robust_cholesky(&kf, model.kernel.signal_var)?;
        Ok(Self {
            model,
            draws,
            f_stars,
            noiseless,
        })
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        let ks = self.model.kernel.cross(&self.model.x, p);
        let w = self.noiseless.solve(&ks);
        let var = (self.model.kernel.signal_var - ks.dot(&w)).max(0.0);
        let sigma = var.sqrt();
        let mus = self.draws.tr_mul(&w);
        let total: f64 = mus
            .iter()
            .zip(&self.f_stars)
            .map(|(dm, fs)| expected_improvement_from(self.model.mean + dm, sigma, *fs))
            .sum();
        total / self.f_stars.len() as f64
    }
}

pub fn noisy_ei(model: &GpModel, p: &[f64], n_draws: usize, seed: u64) -> Result<f64> {
    Ok(NoisyEi::new(model, n_draws, seed)?.value(p))
}

/// Multi-start compass search maximizing `f` over the unit cube.
pub fn maximize_unit(f: &dyn Fn(&[f64]) -> f64, dim: usize, starts: usize, seed: u64) -> (Vec<f64>, f64) {
    let mut best = (vec![0.5; dim], f64::NEG_INFINITY);
    for start in sobol_unit(starts.max(1), dim, seed, true) {
        let mut x = start;
        let mut fx = f(&x);
        let mut step = 0.125;
        while step > 1e-5 {
            let mut moved = false;
            for d in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut cand = x.clone();
                    cand[d] = (cand[d] + sign * step).clamp(0.0, 1.0);
                    if cand[d] == x[d] {
                        continue;
                    }
                    let fc = f(&cand);
                    if fc > fx {
                        x = cand;
                        fx = fc;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Acquisition {
    Ei,
    #[default]
    NoisyEi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    /// Sobol initial designs.
    pub n_init: usize,
    /// Model-guided evaluations after the initial designs.
    pub iterations: usize,
    /// Draws for noisy EI.
    pub n_mc: usize,
    pub acquisition: Acquisition,
    pub acquisition_starts: usize,
    pub scramble: bool,
    pub fit: FitConfig,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            n_init: 10,
            iterations: 20,
            n_mc: 256,
            acquisition: Acquisition::NoisyEi,
            acquisition_starts: 32,
            scramble: true,
            fit: FitConfig::default(),
            seed: 0,
        }
    }
}

/// Noisy objective value: mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoRecord {
    pub iter: usize,
    pub x: Vec<f64>,
    /// `None` when the objective failed at this point.
    pub obs: Option<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoState {
    pub bounds: Vec<(f64, f64)>,
    pub records: Vec<BoRecord>,
}

impl BoState {
    pub fn successes(&self) -> impl Iterator<Item = (&BoRecord, Observation)> {
        self.records.iter().filter_map(|r| r.obs.map(|o| (r, o)))
    }

    /// Record with the lowest observed mean.
    pub fn best(&self) -> Option<&BoRecord> {
        self.successes()
            .min_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
            .map(|(r, _)| r)
    }

    pub fn best_observed(&self) -> Option<f64> {
        self.best().and_then(|r| r.obs).map(|o| o.mean)
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                if let Some(o) = r.obs {
                    best = best.min(o.mean);
                }
                best
            })
            .collect()
    }

    /// `iter,<names>,cost_mean,cost_stderr,best_so_far`; failed rows leave
    /// the cost fields empty.
    pub fn trace_csv(&self, names: &[&str]) -> String {
        let mut s = format!("iter,{},cost_mean,cost_stderr,best_so_far\n", names.join(","));
        for (r, b) in self.records.iter().zip(self.best_so_far()) {
            let xs: Vec<String> = r.x.iter().map(|v| format!("{v:.12}")).collect();
            let (m, e) = match r.obs {
                Some(o) => (format!("{:.12e}", o.mean), format!("{:.12e}", o.stderr)),
                None => (String::new(), String::new()),
            };
            let b = if b.is_finite() {
                format!("{b:.12e}")
            } else {
                String::new()
            };
            s.push_str(&format!("{},{},{m},{e},{b}\n", r.iter, xs.join(",")));
        }
        s
    }

    /// Surrogate fitted to all successful observations.
    pub fn surrogate(&self, fit: &FitConfig) -> Result<GpModel> {
        let (x, y, noise) = training_data(self);
        gp_fit(&x, &y, &noise, fit)
    }
}

fn training_data(state: &BoState) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut noise = Vec::new();
    for (r, o) in state.successes() {
        x.push(to_unit(&state.bounds, &r.x));
        y.push(o.mean);
        noise.push(o.stderr * o.stderr);
    }
    (x, y, noise)
}

fn mix(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Next design (in box coordinates) from the current data.
pub fn optimize_acquisition(state: &BoState, cfg: &BoConfig, iter: usize) -> Result<Vec<f64>> {
    let fit = FitConfig {
        seed: mix(cfg.seed, 2 * iter as u64),
        ..cfg.fit
    };
    let model = state.surrogate(&fit)?;
    let dim = state.bounds.len();
    let starts_seed = mix(cfg.seed, 2 * iter as u64 + 1);
    let (u, _) = match cfg.acquisition {
        Acquisition::Ei => {
            let f_star = model.best_observed();
            maximize_unit(
                &|p| expected_improvement(&model, p, f_star),
                dim,
                cfg.acquisition_starts,
                starts_seed,
            )
        }
        Acquisition::NoisyEi => {
            let nei = NoisyEi::new(&model, cfg.n_mc, starts_seed)?;
            maximize_unit(&|p| nei.value(p), dim, cfg.acquisition_starts, starts_seed)
        }
    };
    Ok(from_unit(&state.bounds, &u))
}

/// Sobol initialization followed by model-guided selection, to a fixed budget.
pub fn bo_loop(
    objective: &mut dyn FnMut(&[f64], usize) -> Result<Observation>,
    bounds: &[(f64, f64)],
    cfg: &BoConfig,
) -> Result<BoState> {
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(Error::InvalidProblem(
            "bounds must be non-empty increasing intervals".into(),
        ));
    }
    if cfg.n_init == 0 {
        return Err(Error::InvalidProblem("need at least one initial design".into()));
    }
    let mut state = BoState {
        bounds: bounds.to_vec(),
        records: Vec::new(),
    };
    let total = cfg.n_init + cfg.iterations;
    // spare Sobol points stand in when too few observations succeeded to fit
    let init = sobol_init(bounds, total, cfg.seed, cfg.scramble);
    let mut spare = init[cfg.n_init..].iter();
    for iter in 0..total {
        let x = if iter < cfg.n_init {
            init[iter].clone()
        } else if state.successes().count() >= 2 {
            match optimize_acquisition(&state, cfg, iter) {
                Ok(x) => x,
                Err(e) => {
                    log::warn!("acquisition failed at iteration {iter}: {e}");
                    spare.next().cloned().unwrap_or_else(|| init[iter % cfg.n_init].clone())
                }
            }
        } else {
            spare.next().cloned().unwrap_or_else(|| init[iter % cfg.n_init].clone())
        };
        let obs = match objective(&x, iter) {
            Ok(o) if o.mean.is_finite() && o.stderr.is_finite() => Some(o),
            Ok(o) => {
                log::warn!("non-finite observation {o:?} at iteration {iter}");
                None
            }
            Err(e) => {
                log::warn!("objective failed at iteration {iter}: {e}");
                None
            }
        };
        state.records.push(BoRecord { iter, x, obs });
    }
    Ok(state)
}

/// Posterior mean and standard deviation on an `n × n` grid over a 2-D box,
/// as CSV `x0,x1,mean,stderr`.
pub fn posterior_grid_csv(model: &GpModel, bounds: &[(f64, f64)], n: usize, names: [&str; 2]) -> String {
    let mut s = format!("{},{},mean,stderr\n", names[0], names[1]);
    for i in 0..n {
        for j in 0..n {
            let u = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
            let x = from_unit(bounds, &u);
            let (mu, var) = model.predict(&u);
            s.push_str(&format!("{:.12},{:.12},{mu:.12e},{:.12e}\n", x[0], x[1], var.sqrt()));
        }
    }
    s
}
