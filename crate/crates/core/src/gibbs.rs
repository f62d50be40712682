//! Gibbs sampler for structural time-series models with spike-and-slab
//! regression.
//!
//! One systematic scan per iteration:
//!
//! 1. latent states given all parameters (simulation smoother);
//! 2. each state disturbance variance from its inverse-gamma full conditional;
//! 3. inclusion indicators by single-site sweeps with coefficients integrated
//!    out, then coefficients given the indicators;
//! 4. observation variance given states and coefficients.
//!
//! Regressors are centred on their observed-day means before sampling, so the
//! level absorbs the intercept. Coefficients are reported on that scale.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{AlignedPanel, DateStamp, Series};
use crate::ssm::{build_model, simulate_states, Regressors, StatePath, TrendSpec};
use crate::stats;

/// Minimum number of present observations accepted by [`run_mcmc`].
pub const MIN_PRESENT_OBSERVATIONS: usize = 30;

/// Inverse-gamma distribution with density proportional to
/// `x^(-shape-1) exp(-scale / x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "inverse-gamma needs shape, scale > 0 (got {shape}, {scale})"
            )));
        }
        Ok(InverseGamma { shape, scale })
    }

    /// Conjugate update after observing `n` zero-mean Gaussian values with
    /// sum of squares `ss`.
    pub fn updated(&self, n: usize, ss: f64) -> InverseGamma {
        InverseGamma { shape: self.shape + 0.5 * n as f64, scale: self.scale + 0.5 * ss }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.shape, 1.0 / self.scale).expect("validated gamma parameters");
        1.0 / g.sample(rng)
    }
}

/// Prior hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub sigma2: InverseGamma,
    /// One prior per state disturbance variance (level, then slope).
    pub state_variances: Vec<InverseGamma>,
    /// Prior inclusion probability of each regressor.
    pub inclusion_prob: f64,
    /// Slab prior information weight `kappa`: the slab precision is
    /// `kappa * (w X'X + (1 - w) diag(X'X)) / n`, scaled by `1 / sigma2`.
    pub slab_weight: f64,
    /// The `w` above.
    pub slab_offdiag_weight: f64,
}

pub const DEFAULT_EXPECTED_MODEL_SIZE: f64 = 5.0;
pub const DEFAULT_SLAB_WEIGHT: f64 = 0.01;

impl Priors {
    /// Weakly informative, scale-aware defaults: `IG(0.01, 0.01 * var(y))`
    /// for the observation variance, `IG(0.01, 1e-6 * var(y))` for every
    /// state variance (prior guess `0.01 * sd(y)` with 0.01 pseudo
    /// observations) and an expected model size of 5 regressors.
    pub fn default_for(spec: TrendSpec, obs: &[Option<f64>], n_regressors: usize) -> Priors {
        let present: Vec<f64> = obs.iter().flatten().copied().collect();
        let var = stats::variance(&present).max(1e-10);
        let ig = InverseGamma { shape: 0.01, scale: 0.01 * var };
        let level = InverseGamma { shape: 0.01, scale: 1e-6 * var };
        let inclusion_prob = if n_regressors == 0 {
            0.5
        } else {
            (DEFAULT_EXPECTED_MODEL_SIZE / n_regressors as f64).min(0.5)
        };
        Priors {
            sigma2: ig,
            state_variances: vec![level; spec.n_state_variances()],
            inclusion_prob,
            slab_weight: DEFAULT_SLAB_WEIGHT,
            slab_offdiag_weight: 0.5,
        }
    }

    pub fn validate(&self, spec: TrendSpec) -> Result<()> {
        InverseGamma::new(self.sigma2.shape, self.sigma2.scale)?;
        if self.state_variances.len() != spec.n_state_variances() {
            return Err(Error::Dimension(format!(
                "{} state-variance priors for a trend with {} variances",
                self.state_variances.len(),
                spec.n_state_variances()
            )));
        }
        for p in &self.state_variances {
            InverseGamma::new(p.shape, p.scale)?;
        }
        if !(self.inclusion_prob > 0.0 && self.inclusion_prob < 1.0) {
            return Err(Error::OutOfRange(format!(
                "inclusion probability {} must lie in (0, 1)",
                self.inclusion_prob
            )));
        }
        if !(self.slab_weight > 0.0 && self.slab_weight.is_finite()) {
            return Err(Error::OutOfRange("slab weight must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.slab_offdiag_weight) {
            return Err(Error::OutOfRange("slab off-diagonal weight must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Chain length settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig { iterations: 2000, burn_in: 500, thin: 1, seed: 0 }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::Input(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::Input("thinning must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of retained draws, `(iterations - burn_in) / thin`.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    fn keeps(&self, iteration: usize) -> bool {
        iteration >= self.burn_in && (iteration - self.burn_in + 1).is_multiple_of(self.thin)
    }
}

/// Per-chain diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub mean_model_size: f64,
    pub ess_sigma2: f64,
    pub ess_state_variances: Vec<f64>,
}

/// Retained MCMC output.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub trend: TrendSpec,
    /// First day of the modelled axis when fitted from a dated series.
    pub start: Option<DateStamp>,
    pub observations: Vec<Option<f64>>,
    pub sigma2: Vec<f64>,
    /// Per draw, one variance per state component.
    pub state_variances: Vec<Vec<f64>>,
    /// Per draw, coefficients on the centred regressors (exactly zero when
    /// excluded).
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<bool>>,
    pub states: Vec<StatePath>,
    pub regressor_names: Vec<String>,
    /// Centring applied to each regressor column.
    pub regressor_means: Vec<f64>,
    /// Centred design matrix on the modelled axis.
    pub design: Option<DMatrix<f64>>,
    pub diagnostics: Diagnostics,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.sigma2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma2.is_empty()
    }

    pub fn n_regressors(&self) -> usize {
        self.regressor_names.len()
    }

    /// Days on the modelled axis, if the fit was dated.
    pub fn dates(&self) -> Option<Vec<DateStamp>> {
        let start = self.start?;
        Some((0..self.observations.len()).map(|i| start.add_days(i as i64)).collect())
    }

    /// Regression contribution `beta' x_t` of draw `d` on every day.
    pub fn regression_effect(&self, d: usize) -> Option<Vec<f64>> {
        let x = self.design.as_ref()?;
        let b = DVector::from_column_slice(&self.beta[d]);
        Some((x * b).iter().copied().collect())
    }
}

fn state_innovations_ss(spec: TrendSpec, path: &StatePath) -> Vec<f64> {
    let n = path.len();
    let mut ss = vec![0.0; spec.n_state_variances()];
    for t in 0..n.saturating_sub(1) {
        let (cur, next) = (path.state(t), path.state(t + 1));
        match spec {
            TrendSpec::LocalLevel => ss[0] += (next[0] - cur[0]).powi(2),
            TrendSpec::LocalLinearTrend => {
                ss[0] += (next[0] - cur[0] - cur[1]).powi(2);
                ss[1] += (next[1] - cur[1]).powi(2);
            }
            TrendSpec::SemilocalLinearTrend { phi, long_run_slope } => {
                ss[0] += (next[0] - cur[0] - cur[1]).powi(2);
                ss[1] += (next[1] - long_run_slope - phi * (cur[1] - long_run_slope)).powi(2);
            }
        }
    }
    ss
}

/// Full conditionals of the state disturbance variances given a state path.
pub fn state_variance_posteriors(spec: TrendSpec, path: &StatePath, priors: &Priors) -> Vec<InverseGamma> {
    let n = path.len().saturating_sub(1);
    state_innovations_ss(spec, path)
        .into_iter()
        .zip(&priors.state_variances)
        .map(|(ss, prior)| prior.updated(n, ss))
        .collect()
}

/// One draw of every state disturbance variance given a state path.
pub fn draw_state_variances<R: Rng + ?Sized>(
    spec: TrendSpec,
    path: &StatePath,
    priors: &Priors,
    rng: &mut R,
) -> Vec<f64> {
    state_variance_posteriors(spec, path, priors).iter().map(|p| p.sample(rng)).collect()
}

/// Sufficient statistics for the regression block on observed days.
struct RegressionBlock {
    /// Centred design on observed rows.
    x_obs: DMatrix<f64>,
    xtx: DMatrix<f64>,
    /// Prior precision (before the `1 / sigma2` scaling).
    omega: DMatrix<f64>,
    /// Columns with zero variance never enter the model.
    usable: Vec<bool>,
    log_pi: f64,
    log_1m_pi: f64,
}

struct Marginal {
    log_m: f64,
    cols: Vec<usize>,
    chol_l: Option<DMatrix<f64>>,
    beta_mean: DVector<f64>,
}

impl RegressionBlock {
    fn new(x_obs: DMatrix<f64>, priors: &Priors) -> Self {
        let n = x_obs.nrows() as f64;
        let xtx = x_obs.transpose() * &x_obs;
        let p = xtx.nrows();
        let w = priors.slab_offdiag_weight;
        let mut omega = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                let v = if i == j { xtx[(i, i)] } else { w * xtx[(i, j)] };
                omega[(i, j)] = priors.slab_weight * v / n;
            }
        }
        let scale = xtx.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
        let usable = (0..p).map(|j| xtx[(j, j)] > 1e-12 * scale && xtx[(j, j)] > 0.0).collect();
        RegressionBlock {
            x_obs,
            xtx,
            omega,
            usable,
            log_pi: priors.inclusion_prob.ln(),
            log_1m_pi: (1.0 - priors.inclusion_prob).ln(),
        }
    }

    /// Log marginal likelihood of indicator set `gamma` (up to terms common
    /// to every model) plus its log prior, coefficients integrated out.
    fn marginal(&self, gamma: &[bool], xty: &DVector<f64>, sigma2: f64) -> Marginal {
        let cols: Vec<usize> = (0..gamma.len()).filter(|j| gamma[*j]).collect();
        let k = cols.len();
        let log_prior = k as f64 * self.log_pi + (gamma.len() - k) as f64 * self.log_1m_pi;
        if k == 0 {
            return Marginal { log_m: log_prior, cols, chol_l: None, beta_mean: DVector::zeros(0) };
        }
        let omega_g = DMatrix::from_fn(k, k, |a, b| self.omega[(cols[a], cols[b])]);
        let post_prec = DMatrix::from_fn(k, k, |a, b| omega_g[(a, b)] + self.xtx[(cols[a], cols[b])]);
        let xty_g = DVector::from_fn(k, |a, _| xty[cols[a]]);
        let (ch_prior, ch_post) = match (omega_g.cholesky(), post_prec.cholesky()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Marginal {
                    log_m: f64::NEG_INFINITY,
                    cols,
                    chol_l: None,
                    beta_mean: DVector::zeros(k),
                }
            }
        };
        let logdet = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let beta_mean = ch_post.solve(&xty_g);
        let log_m = log_prior + 0.5 * logdet(&ch_prior.l()) - 0.5 * logdet(&ch_post.l())
            + 0.5 * xty_g.dot(&beta_mean) / sigma2;
        Marginal { log_m, cols, chol_l: Some(ch_post.l()), beta_mean }
    }

    /// Single-site sweep over the indicators, then a coefficient draw.
    fn sweep<R: Rng + ?Sized>(
        &self,
        gamma: &mut [bool],
        beta: &mut [f64],
        resid: &DVector<f64>,
        sigma2: f64,
        rng: &mut R,
    ) {
        let xty = self.x_obs.transpose() * resid;
        let mut current = self.marginal(gamma, &xty, sigma2);
        for j in 0..gamma.len() {
            if !self.usable[j] {
                gamma[j] = false;
                continue;
            }
            gamma[j] = !gamma[j];
            let flipped = self.marginal(gamma, &xty, sigma2);
            gamma[j] = !gamma[j];
            let (on, off) = if gamma[j] { (&current, &flipped) } else { (&flipped, &current) };
            let p_on = 1.0 / (1.0 + (off.log_m - on.log_m).exp());
            let new = rng.random::<f64>() < p_on;
            if new != gamma[j] {
                gamma[j] = new;
                current = flipped;
            }
        }

        beta.iter_mut().for_each(|b| *b = 0.0);
        if let Some(l) = &current.chol_l {
            let k = current.cols.len();
            let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            // L L' is the posterior precision / sigma2-free part, so
            // L'^{-1} z has covariance (L L')^{-1}.
            let dev = l
                .transpose()
                .solve_upper_triangular(&z)
                .expect("cholesky factor is nonsingular");
            let draw = &current.beta_mean + dev * sigma2.sqrt();
            for (a, &j) in current.cols.iter().enumerate() {
                beta[j] = draw[a];
            }
        }
    }
}

/// Fits a structural time-series model to a dated series, optionally with
/// every column of `regressors` as a candidate regressor. The panel must
/// cover the target's span with no missing cells.
pub fn run_mcmc(
    spec: TrendSpec,
    target: &Series,
    regressors: Option<&AlignedPanel>,
    priors: &Priors,
    config: &McmcConfig,
) -> Result<PosteriorDraws> {
    let range = target.range().ok_or(Error::EmptySeries)?;
    let obs = target.values();
    let reg = match regressors {
        Some(panel) => {
            let sub = panel.restrict(&range)?;
            let names: Vec<&str> = sub.names().iter().map(String::as_str).collect();
            Some(Regressors::from_panel(&sub, &names)?)
        }
        None => None,
    };
    let mut draws = run_mcmc_values(spec, &obs, reg.as_ref(), priors, config)?;
    draws.start = Some(range.start);
    Ok(draws)
}

/// [`run_mcmc`] on an undated vector of observations.
pub fn run_mcmc_values(
    spec: TrendSpec,
    obs: &[Option<f64>],
    regressors: Option<&Regressors>,
    priors: &Priors,
    config: &McmcConfig,
) -> Result<PosteriorDraws> {
    spec.validate()?;
    priors.validate(spec)?;
    config.validate()?;
    let present: Vec<usize> = (0..obs.len()).filter(|t| obs[*t].is_some()).collect();
    if present.len() < MIN_PRESENT_OBSERVATIONS {
        return Err(Error::TooShort { present: present.len(), required: MIN_PRESENT_OBSERVATIONS });
    }
    if let Some(t) = present.iter().find(|t| !obs[**t].unwrap().is_finite()) {
        return Err(Error::Input(format!("non-finite observation on day {t}")));
    }
    if let Some(r) = regressors {
        if r.len() != obs.len() {
            return Err(Error::Dimension(format!(
                "regressors cover {} days, target covers {}",
                r.len(),
                obs.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let y_obs = DVector::from_iterator(present.len(), present.iter().map(|t| obs[*t].unwrap()));
    let y_var = stats::variance(y_obs.as_slice()).max(1e-10);

    // Centre regressors on observed days.
    let (names, means, design) = match regressors {
        Some(r) => {
            let means: Vec<f64> = (0..r.n_regressors())
                .map(|j| present.iter().map(|t| r.x[(*t, j)]).sum::<f64>() / present.len() as f64)
                .collect();
            let mut xc = r.x.clone();
            for j in 0..xc.ncols() {
                for t in 0..xc.nrows() {
                    xc[(t, j)] -= means[j];
                }
            }
            (r.names.clone(), means, Some(xc))
        }
        None => (Vec::new(), Vec::new(), None),
    };
    let p = names.len();
    let block = design.as_ref().map(|xc| {
        let x_obs = DMatrix::from_fn(present.len(), p, |i, j| xc[(present[i], j)]);
        RegressionBlock::new(x_obs, priors)
    });

    let mut sigma2 = 0.5 * y_var;
    let mut state_vars: Vec<f64> = match spec {
        TrendSpec::LocalLevel => vec![0.1 * y_var],
        _ => vec![0.1 * y_var, 0.001 * y_var],
    };
    let mut beta = vec![0.0; p];
    let mut gamma = vec![false; p];

    let keep = config.retained();
    let mut out = PosteriorDraws {
        trend: spec,
        start: None,
        observations: obs.to_vec(),
        sigma2: Vec::with_capacity(keep),
        state_variances: Vec::with_capacity(keep),
        beta: Vec::with_capacity(keep),
        gamma: Vec::with_capacity(keep),
        states: Vec::with_capacity(keep),
        regressor_names: names,
        regressor_means: means,
        design: design.clone(),
        diagnostics: Diagnostics {
            chains: 1,
            iterations: config.iterations,
            burn_in: config.burn_in,
            thin: config.thin,
            mean_model_size: 0.0,
            ess_sigma2: 0.0,
            ess_state_variances: Vec::new(),
        },
    };

    for iteration in 0..config.iterations {
        let offset_model = match &design {
            Some(xc) => {
                let reg = Regressors { names: Vec::new(), x: xc.clone() };
                build_model(spec, sigma2, &state_vars, Some(&reg), Some(&beta))
            }
            None => build_model(spec, sigma2, &state_vars, None, None),
        };
        let model = offset_model.map_err(|e| nonfinite(iteration, e))?;
        let path = simulate_states(&model, obs, &mut rng).map_err(|e| nonfinite(iteration, e))?;

        state_vars = draw_state_variances(spec, &path, priors, &mut rng);

        let mut resid = DVector::from_iterator(
            present.len(),
            present.iter().map(|t| obs[*t].unwrap() - path.level(*t)),
        );
        let mut prior_quad = 0.0;
        if let Some(block) = &block {
            block.sweep(&mut gamma, &mut beta, &resid, sigma2, &mut rng);
            let b = DVector::from_column_slice(&beta);
            resid -= &block.x_obs * &b;
            prior_quad = b.dot(&(&block.omega * &b));
        }
        let n_included = gamma.iter().filter(|g| **g).count();
        let post = priors.sigma2.updated(present.len() + n_included, resid.norm_squared() + prior_quad);
        sigma2 = post.sample(&mut rng);

        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::NonFinite { iteration, what: format!("sigma2 = {sigma2}") });
        }
        if let Some(v) = state_vars.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::NonFinite { iteration, what: format!("state variance = {v}") });
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite { iteration, what: "regression coefficient".into() });
        }

        if config.keeps(iteration) {
            out.sigma2.push(sigma2);
            out.state_variances.push(state_vars.clone());
            out.beta.push(beta.clone());
            out.gamma.push(gamma.clone());
            out.states.push(path);
        }
    }
    out.diagnostics = diagnostics(&out, 1);
    Ok(out)
}

fn nonfinite(iteration: usize, e: Error) -> Error {
    Error::NonFinite { iteration, what: e.to_string() }
}

fn diagnostics(d: &PosteriorDraws, chains: usize) -> Diagnostics {
    let n = d.len().max(1) as f64;
    let sizes: f64 = d.gamma.iter().map(|g| g.iter().filter(|x| **x).count() as f64).sum();
    let k = d.trend.n_state_variances();
    Diagnostics {
        chains,
        iterations: d.diagnostics.iterations,
        burn_in: d.diagnostics.burn_in,
        thin: d.diagnostics.thin,
        mean_model_size: sizes / n,
        ess_sigma2: stats::effective_sample_size(&d.sigma2),
        ess_state_variances: (0..k)
            .map(|j| {
                let xs: Vec<f64> = d.state_variances.iter().map(|v| v[j]).collect();
                stats::effective_sample_size(&xs)
            })
            .collect(),
    }
}

/// Runs independent chains with seeds `seed, seed + 1, ...` in parallel and
/// concatenates their retained draws in seed order.
pub fn run_mcmc_chains(
    spec: TrendSpec,
    obs: &[Option<f64>],
    regressors: Option<&Regressors>,
    priors: &Priors,
    config: &McmcConfig,
    chains: usize,
) -> Result<PosteriorDraws> {
    if chains == 0 {
        return Err(Error::Input("need at least one chain".into()));
    }
    let runs: Vec<PosteriorDraws> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let cfg = McmcConfig { seed: config.seed.wrapping_add(c as u64), ..*config };
            run_mcmc_values(spec, obs, regressors, priors, &cfg)
        })
        .collect::<Result<_>>()?;
    let mut iter = runs.into_iter();
    let mut merged = iter.next().expect("at least one chain");
    for r in iter {
        merged.sigma2.extend(r.sigma2);
        merged.state_variances.extend(r.state_variances);
        merged.beta.extend(r.beta);
        merged.gamma.extend(r.gamma);
        merged.states.extend(r.states);
    }
    merged.diagnostics = diagnostics(&merged, chains);
    Ok(merged)
}

/// Fraction of retained draws including each regressor, sorted descending
/// (ties keep regressor order). Empty when the model has no regressors.
pub fn inclusion_probabilities(draws: &PosteriorDraws) -> Vec<(String, f64)> {
    let n = draws.len().max(1) as f64;
    let mut out: Vec<(String, f64)> = draws
        .regressor_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let count = draws.gamma.iter().filter(|g| g[j]).count();
            (name.clone(), count as f64 / n)
        })
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

/// Posterior summary of one scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub parameter: String,
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub inclusion: Option<f64>,
}

fn summarize(name: String, xs: &[f64], inclusion: Option<f64>) -> ParameterSummary {
    let s = stats::sorted(xs);
    ParameterSummary {
        parameter: name,
        mean: stats::mean(xs),
        median: stats::quantile_sorted(&s, 0.5),
        lower: stats::quantile_sorted(&s, 0.025),
        upper: stats::quantile_sorted(&s, 0.975),
        inclusion,
    }
}

/// Mean, median and central 95% interval for the variances and the
/// `top_k` regressors with the highest inclusion probability.
pub fn posterior_summary(draws: &PosteriorDraws, top_k: usize) -> Vec<ParameterSummary> {
    let mut out = vec![summarize("sigma2".into(), &draws.sigma2, None)];
    for (j, comp) in draws.trend.component_names().iter().enumerate() {
        let xs: Vec<f64> = draws.state_variances.iter().map(|v| v[j]).collect();
        out.push(summarize(format!("var_{comp}"), &xs, None));
    }
    for (name, prob) in inclusion_probabilities(draws).into_iter().take(top_k) {
        let j = draws.regressor_names.iter().position(|n| *n == name).expect("known regressor");
        let xs: Vec<f64> = draws.beta.iter().map(|b| b[j]).collect();
        out.push(summarize(format!("beta_{name}"), &xs, Some(prob)));
    }
    out
}

/// One row of the in-sample fit table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub date: Option<DateStamp>,
    pub index: usize,
    pub observed: Option<f64>,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Pointwise posterior mean and central 95% band of the fitted value
/// (level plus regression effect) on every modelled day.
pub fn fit_report(draws: &PosteriorDraws) -> Result<Vec<FitRow>> {
    if draws.is_empty() {
        return Err(Error::InsufficientDraws { have: 0, need: 1 });
    }
    let n = draws.observations.len();
    let effects: Vec<Option<Vec<f64>>> = (0..draws.len()).map(|d| draws.regression_effect(d)).collect();
    let dates = draws.dates();
    let mut rows = Vec::with_capacity(n);
    let mut col = vec![0.0; draws.len()];
    for t in 0..n {
        for (d, path) in draws.states.iter().enumerate() {
            col[d] = path.level(t) + effects[d].as_ref().map_or(0.0, |e| e[t]);
        }
        let s = stats::sorted(&col);
        rows.push(FitRow {
            date: dates.as_ref().map(|d| d[t]),
            index: t,
            observed: draws.observations[t],
            mean: stats::mean(&col),
            lower: stats::quantile_sorted(&s, 0.025),
            upper: stats::quantile_sorted(&s, 0.975),
        });
    }
    Ok(rows)
}

/// Writes one CSV row per retained draw:
/// `draw,sigma2,var_<component>...,model_size,beta_<regressor>...`.
pub fn write_draws_csv<W: Write>(draws: &PosteriorDraws, w: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["draw".to_string(), "sigma2".to_string()];
    header.extend(draws.trend.component_names().iter().map(|c| format!("var_{c}")));
    header.push("model_size".into());
    header.extend(draws.regressor_names.iter().map(|n| format!("beta_{n}")));
    wtr.write_record(&header)?;
    for d in 0..draws.len() {
        let mut row = vec![d.to_string(), draws.sigma2[d].to_string()];
        row.extend(draws.state_variances[d].iter().map(|v| v.to_string()));
        row.push(draws.gamma[d].iter().filter(|g| **g).count().to_string());
        row.extend(draws.beta[d].iter().map(|b| b.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()
}
