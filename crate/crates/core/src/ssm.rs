//! Linear-Gaussian state-space models for trend + regression series.
//!
//! ```text
//! y_t       = z' alpha_t + offset_t + eps_t,      eps_t ~ N(0, H)
//! alpha_t+1 = c + T alpha_t + R eta_t,            eta_t ~ N(0, diag(Q))
//! ```
//!
//! Regression effects enter as a known observation offset `offset_t =
//! beta' x_t`, so the state stays one- or two-dimensional regardless of the
//! number of regressors. Missing observations skip the update step.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::AlignedPanel;

/// Variance placed on level (and random-walk slope) components at t = 1.
pub const DIFFUSE_VARIANCE: f64 = 1e6;

/// Trend component of the model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum TrendSpec {
    /// Random-walk level.
    #[default]
    LocalLevel,
    /// Random-walk level plus random-walk slope.
    LocalLinearTrend,
    /// Random-walk level plus a slope following an AR(1) around
    /// `long_run_slope` with coefficient `phi`.
    SemilocalLinearTrend { phi: f64, long_run_slope: f64 },
}

impl TrendSpec {
    /// Semilocal trend with the default slope dynamics.
    pub fn semilocal() -> Self {
        TrendSpec::SemilocalLinearTrend { phi: 0.9, long_run_slope: 0.0 }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            TrendSpec::LocalLevel => 1,
            _ => 2,
        }
    }

    /// Number of state disturbance variances.
    pub fn n_state_variances(&self) -> usize {
        self.state_dim()
    }

    pub fn component_names(&self) -> &'static [&'static str] {
        match self {
            TrendSpec::LocalLevel => &["level"],
            _ => &["level", "slope"],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TrendSpec::LocalLevel => "local-level",
            TrendSpec::LocalLinearTrend => "local-linear",
            TrendSpec::SemilocalLinearTrend { .. } => "semilocal",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TrendSpec::SemilocalLinearTrend { phi, long_run_slope } = self {
            if !(phi.is_finite() && phi.abs() < 1.0) {
                return Err(Error::OutOfRange(format!("slope AR coefficient {phi} must lie in (-1, 1)")));
            }
            if !long_run_slope.is_finite() {
                return Err(Error::OutOfRange("long-run slope must be finite".into()));
            }
        }
        Ok(())
    }

    /// Parses the CLI spelling: `local-level`, `local-linear`, `semilocal`.
    pub fn from_label(s: &str) -> Result<Self> {
        match s {
            "local-level" => Ok(TrendSpec::LocalLevel),
            "local-linear" => Ok(TrendSpec::LocalLinearTrend),
            "semilocal" => Ok(TrendSpec::semilocal()),
            other => Err(Error::Input(format!("unknown trend `{other}`"))),
        }
    }
}

/// Initial state distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Level at the first present observation with variance
    /// [`DIFFUSE_VARIANCE`]; random-walk slope at zero with the same variance;
    /// semilocal slope at its stationary distribution.
    Diffuse,
    Explicit { mean: DVector<f64>, cov: DMatrix<f64> },
}

/// Regressor design matrix (rows = time, columns = regressors).
#[derive(Debug, Clone, PartialEq)]
pub struct Regressors {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
}

impl Regressors {
    pub fn new(names: Vec<String>, x: DMatrix<f64>) -> Result<Self> {
        if names.len() != x.ncols() {
            return Err(Error::Dimension(format!(
                "{} regressor names for {} columns",
                names.len(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("regressor matrix contains non-finite values".into()));
        }
        Ok(Regressors { names, x })
    }

    /// Design matrix from panel columns; every cell must be present.
    pub fn from_panel(panel: &AlignedPanel, names: &[&str]) -> Result<Self> {
        let t = panel.len();
        let mut x = DMatrix::zeros(t, names.len());
        for (j, name) in names.iter().enumerate() {
            let col = panel
                .column(name)
                .ok_or_else(|| Error::Input(format!("panel has no column `{name}`")))?;
            for (i, v) in col.iter().enumerate() {
                x[(i, j)] = v.ok_or_else(|| {
                    Error::Input(format!("regressor `{name}` is missing on day {i} of the panel"))
                })?;
            }
        }
        Regressors::new(names.iter().map(|s| s.to_string()).collect(), x)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn n_regressors(&self) -> usize {
        self.x.ncols()
    }
}

/// A univariate-observation linear-Gaussian state-space model.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub trend: TrendSpec,
    /// Observation loading `z` (length m).
    pub z: DVector<f64>,
    /// Transition `T` (m x m).
    pub transition: DMatrix<f64>,
    /// State intercept `c` (length m).
    pub intercept: DVector<f64>,
    /// Disturbance selector `R` (m x q).
    pub selector: DMatrix<f64>,
    /// Observation variance `H`.
    pub obs_variance: f64,
    /// Diagonal of the state disturbance covariance `Q` (length q).
    pub state_variances: Vec<f64>,
    pub initial: InitialState,
    /// Known additive observation mean, e.g. a regression effect.
    pub obs_offset: Option<Vec<f64>>,
}

/// Builds the state-space form of a trend model, optionally with a
/// regression effect `beta' x_t` folded into the observation mean.
pub fn build_model(
    spec: TrendSpec,
    sigma2: f64,
    state_variances: &[f64],
    regressors: Option<&Regressors>,
    beta: Option<&[f64]>,
) -> Result<StateSpaceModel> {
    spec.validate()?;
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::OutOfRange(format!("observation variance {sigma2} must be >= 0")));
    }
    if state_variances.len() != spec.n_state_variances() {
        return Err(Error::Dimension(format!(
            "{} trend needs {} state variances, got {}",
            spec.label(),
            spec.n_state_variances(),
            state_variances.len()
        )));
    }
    if let Some(v) = state_variances.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::OutOfRange(format!("state variance {v} must be >= 0")));
    }

    let m = spec.state_dim();
    let (transition, intercept) = match spec {
        TrendSpec::LocalLevel => (DMatrix::from_element(1, 1, 1.0), DVector::zeros(1)),
        TrendSpec::LocalLinearTrend => {
            (DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), DVector::zeros(2))
        }
        TrendSpec::SemilocalLinearTrend { phi, long_run_slope } => (
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, phi]),
            DVector::from_vec(vec![0.0, long_run_slope * (1.0 - phi)]),
        ),
    };
    let mut z = DVector::zeros(m);
    z[0] = 1.0;

    let obs_offset = match (regressors, beta) {
        (Some(reg), Some(beta)) => {
            if beta.len() != reg.n_regressors() {
                return Err(Error::Dimension(format!(
                    "beta has length {}, regressors have {} columns",
                    beta.len(),
                    reg.n_regressors()
                )));
            }
            let b = DVector::from_column_slice(beta);
            Some((&reg.x * b).iter().copied().collect())
        }
        (None, None) => None,
        (Some(_), None) => {
            return Err(Error::Input("regressors supplied without coefficients".into()))
        }
        (None, Some(_)) => {
            return Err(Error::Input("coefficients supplied without regressors".into()))
        }
    };

    Ok(StateSpaceModel {
        trend: spec,
        z,
        transition,
        intercept,
        selector: DMatrix::identity(m, m),
        obs_variance: sigma2,
        state_variances: state_variances.to_vec(),
        initial: InitialState::Diffuse,
        obs_offset,
    })
}

impl StateSpaceModel {
    pub fn state_dim(&self) -> usize {
        self.z.len()
    }

    pub fn with_initial(mut self, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let m = self.state_dim();
        if mean.len() != m || cov.nrows() != m || cov.ncols() != m {
            return Err(Error::Dimension(format!("initial state must have dimension {m}")));
        }
        self.initial = InitialState::Explicit { mean, cov };
        Ok(self)
    }

    /// `R Q R'`.
    pub fn state_noise_cov(&self) -> DMatrix<f64> {
        let q = DMatrix::from_diagonal(&DVector::from_column_slice(&self.state_variances));
        &self.selector * q * self.selector.transpose()
    }

    pub fn offset(&self, t: usize) -> f64 {
        self.obs_offset.as_ref().map_or(0.0, |o| o[t])
    }

    fn check_obs(&self, obs: &[Option<f64>]) -> Result<()> {
        if let Some(off) = &self.obs_offset {
            if off.len() != obs.len() {
                return Err(Error::Dimension(format!(
                    "model offset covers {} days, observations cover {}",
                    off.len(),
                    obs.len()
                )));
            }
        }
        Ok(())
    }

    /// Initial state mean and covariance, resolving the diffuse default
    /// against the data.
    pub fn initial_state(&self, obs: &[Option<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        match &self.initial {
            InitialState::Explicit { mean, cov } => (mean.clone(), cov.clone()),
            InitialState::Diffuse => {
                let m = self.state_dim();
                let mut a = DVector::zeros(m);
                let mut p = DMatrix::zeros(m, m);
                a[0] = obs
                    .iter()
                    .enumerate()
                    .find_map(|(t, y)| y.map(|y| y - self.offset(t)))
                    .unwrap_or(0.0);
                p[(0, 0)] = DIFFUSE_VARIANCE;
                match self.trend {
                    TrendSpec::LocalLevel => {}
                    TrendSpec::LocalLinearTrend => p[(1, 1)] = DIFFUSE_VARIANCE,
                    TrendSpec::SemilocalLinearTrend { phi, long_run_slope } => {
                        a[1] = long_run_slope;
                        p[(1, 1)] = self.state_variances[1] / (1.0 - phi * phi);
                    }
                }
                (a, p)
            }
        }
    }
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

/// Output of the forward Kalman recursion. Index `t` refers to day `t` of
/// the observation vector.
#[derive(Debug, Clone)]
pub struct FilterResult {
    /// `E[alpha_t | y_1..t-1]`.
    pub predicted_mean: Vec<DVector<f64>>,
    pub predicted_cov: Vec<DMatrix<f64>>,
    /// `E[alpha_t | y_1..t]`.
    pub filtered_mean: Vec<DVector<f64>>,
    pub filtered_cov: Vec<DMatrix<f64>>,
    /// One-step prediction error, `None` where the observation is missing.
    pub innovation: Vec<Option<f64>>,
    pub innovation_variance: Vec<f64>,
    /// Filtering gain `P_t z / F_t` (zero where no update happened).
    pub gain: Vec<DVector<f64>>,
    pub log_likelihood: f64,
}

impl FilterResult {
    pub fn len(&self) -> usize {
        self.predicted_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted_mean.is_empty()
    }
}

/// Forward Kalman filter with Joseph-form covariance updates.
///
/// Missing observations contribute nothing to the log-likelihood and leave
/// the filtered state equal to the predicted one.
pub fn kalman_filter(model: &StateSpaceModel, obs: &[Option<f64>]) -> Result<FilterResult> {
    model.check_obs(obs)?;
    let (a1, p1) = model.initial_state(obs);
    run_filter(model, obs, a1, p1, &model.intercept)
}

fn run_filter(
    model: &StateSpaceModel,
    obs: &[Option<f64>],
    a1: DVector<f64>,
    p1: DMatrix<f64>,
    intercept: &DVector<f64>,
) -> Result<FilterResult> {
    let n = obs.len();
    let m = model.state_dim();
    let h = model.obs_variance;
    let rqr = model.state_noise_cov();
    let tt = &model.transition;
    let z = &model.z;
    let eye = DMatrix::<f64>::identity(m, m);

    let mut out = FilterResult {
        predicted_mean: Vec::with_capacity(n),
        predicted_cov: Vec::with_capacity(n),
        filtered_mean: Vec::with_capacity(n),
        filtered_cov: Vec::with_capacity(n),
        innovation: Vec::with_capacity(n),
        innovation_variance: Vec::with_capacity(n),
        gain: Vec::with_capacity(n),
        log_likelihood: 0.0,
    };

    let mut a = a1;
    let mut p = p1;
    for (t, y) in obs.iter().enumerate() {
        let pz = &p * z;
        let f = z.dot(&pz) + h;
        let (af, pf, v, k) = match y {
            Some(y) => {
                let v = y - model.offset(t) - z.dot(&a);
                if f <= 0.0 {
                    if v.abs() > 1e-12 * (1.0 + y.abs()) {
                        return Err(Error::Degenerate {
                            t,
                            message: format!("zero prediction variance with innovation {v}"),
                        });
                    }
                    (a.clone(), p.clone(), Some(v), DVector::zeros(m))
                } else {
                    let k = pz / f;
                    let af = &a + &k * v;
                    let ikz = &eye - &k * z.transpose();
                    let mut pf = &ikz * &p * ikz.transpose() + (&k * k.transpose()) * h;
                    symmetrize(&mut pf);
                    out.log_likelihood -= 0.5 * ((2.0 * PI).ln() + f.ln() + v * v / f);
                    (af, pf, Some(v), k)
                }
            }
            None => (a.clone(), p.clone(), None, DVector::zeros(m)),
        };
        let a_next = intercept + tt * &af;
        let mut p_next = tt * &pf * tt.transpose() + &rqr;
        symmetrize(&mut p_next);

        out.predicted_mean.push(a);
        out.predicted_cov.push(p);
        out.filtered_mean.push(af);
        out.filtered_cov.push(pf);
        out.innovation.push(v);
        out.innovation_variance.push(f);
        out.gain.push(k);
        a = a_next;
        p = p_next;
    }
    if !out.log_likelihood.is_finite() {
        return Err(Error::Degenerate { t: n, message: "non-finite log-likelihood".into() });
    }
    Ok(out)
}

/// Smoothed state means and covariances `E[alpha_t | y_1..n]`.
#[derive(Debug, Clone)]
pub struct SmootherResult {
    pub mean: Vec<DVector<f64>>,
    pub cov: Vec<DMatrix<f64>>,
}

/// Fixed-interval smoother. Means come from the disturbance-form `r`
/// recursion. With `H > 0` covariances come from a backward information
/// recursion, `V_t = (I + P_t Omega_t)^{-1} P_t`, which avoids the
/// cancellation in `P - P N P` under a diffuse start.
pub fn kalman_smoother(model: &StateSpaceModel, filter: &FilterResult) -> Result<SmootherResult> {
    let mut out = smooth(model, filter, true)?;
    if model.obs_variance > 0.0 {
        out.cov = information_covariances(model, filter)?;
    }
    Ok(out)
}

fn information_covariances(model: &StateSpaceModel, filter: &FilterResult) -> Result<Vec<DMatrix<f64>>> {
    let n = filter.len();
    let m = model.state_dim();
    let tt = &model.transition;
    let rqr = model.state_noise_cov();
    let eye = DMatrix::<f64>::identity(m, m);
    let mut cov = vec![DMatrix::zeros(m, m); n];
    // Information about alpha_{t+1} carried by y_{t+1..n}.
    let mut next = DMatrix::<f64>::zeros(m, m);
    for t in (0..n).rev() {
        let mut omega = if t + 1 < n {
            let through_noise = (&eye + &next * &rqr)
                .lu()
                .solve(&next)
                .ok_or_else(|| Error::Degenerate { t, message: "singular backward information".into() })?;
            tt.transpose() * through_noise * tt
        } else {
            DMatrix::zeros(m, m)
        };
        if filter.innovation[t].is_some() {
            omega += &model.z * model.z.transpose() / model.obs_variance;
        }
        let p = &filter.predicted_cov[t];
        let mut v = (&eye + p * &omega)
            .lu()
            .solve(p)
            .ok_or_else(|| Error::Degenerate { t, message: "singular smoothed covariance".into() })?;
        symmetrize(&mut v);
        cov[t] = v;
        symmetrize(&mut omega);
        next = omega;
    }
    Ok(cov)
}

fn smooth(model: &StateSpaceModel, filter: &FilterResult, with_cov: bool) -> Result<SmootherResult> {
    let n = filter.len();
    let m = model.state_dim();
    let tt = &model.transition;
    let z = &model.z;
    let mut r = DVector::<f64>::zeros(m);
    let mut nn = DMatrix::<f64>::zeros(m, m);
    let mut mean = vec![DVector::zeros(m); n];
    let mut cov = if with_cov { vec![DMatrix::zeros(m, m); n] } else { Vec::new() };

    for t in (0..n).rev() {
        let p = &filter.predicted_cov[t];
        let f = filter.innovation_variance[t];
        match filter.innovation[t] {
            Some(v) if f > 0.0 => {
                // L = T (I - K z'), with K the filtering gain.
                let k = &filter.gain[t];
                let l = tt - tt * k * z.transpose();
                r = z * (v / f) + l.transpose() * &r;
                if with_cov {
                    nn = z * z.transpose() / f + l.transpose() * &nn * &l;
                }
            }
            _ => {
                r = tt.transpose() * &r;
                if with_cov {
                    nn = tt.transpose() * &nn * tt;
                }
            }
        }
        mean[t] = &filter.predicted_mean[t] + p * &r;
        if with_cov {
            let mut v = p - p * &nn * p;
            symmetrize(&mut v);
            cov[t] = v;
        }
        if !mean[t].iter().all(|x| x.is_finite()) {
            return Err(Error::Degenerate { t, message: "non-finite smoothed state".into() });
        }
    }
    Ok(SmootherResult { mean, cov })
}

/// A sampled latent state path, `dim` values per day.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    dim: usize,
    data: Vec<f64>,
}

impl StatePath {
    pub fn from_states(states: &[DVector<f64>]) -> Self {
        let dim = states.first().map_or(1, |s| s.len());
        let data = states.iter().flat_map(|s| s.iter().copied()).collect();
        StatePath { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn level(&self, t: usize) -> f64 {
        self.data[t * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

/// Draws `x ~ N(mean, cov)` for a PSD (possibly singular) covariance.
pub(crate) fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let m = mean.len();
    let e = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    if m == 1 {
        let v = cov[(0, 0)];
        if v < 0.0 {
            return Err(Error::Degenerate { t: 0, message: format!("negative variance {v}") });
        }
        return Ok(DVector::from_element(1, mean[0] + v.sqrt() * e[0]));
    }
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(mean + ch.l() * e);
    }
    let eig = cov.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt());
    let scaled = DVector::from_iterator(m, scale.zip(e.iter()).map(|(s, e)| s * e));
    Ok(mean + eig.eigenvectors * scaled)
}

/// Draws one state path from `p(alpha | y, parameters)` with the
/// mean-corrected simulation smoother: simulate `(alpha+, y+)` from the
/// model, then shift by the smoothed mean of `y - y+`.
pub fn simulate_states<R: Rng + ?Sized>(
    model: &StateSpaceModel,
    obs: &[Option<f64>],
    rng: &mut R,
) -> Result<StatePath> {
    model.check_obs(obs)?;
    let n = obs.len();
    let m = model.state_dim();
    let (a1, p1) = model.initial_state(obs);
    let sd_h = model.obs_variance.sqrt();
    let sd_q: Vec<f64> = model.state_variances.iter().map(|v| v.sqrt()).collect();

    let mut plus = Vec::with_capacity(n);
    let mut diff = Vec::with_capacity(n);
    let mut alpha = sample_mvn(&a1, &p1, rng)?;
    for y in obs {
        let eps: f64 = rng.sample(StandardNormal);
        let y_plus = model.z.dot(&alpha) + sd_h * eps;
        // run_filter subtracts the offset itself.
        diff.push(y.map(|y| y - y_plus));
        let eta = DVector::from_iterator(
            sd_q.len(),
            sd_q.iter().map(|s| s * rng.sample::<f64, _>(StandardNormal)),
        );
        let next = &model.intercept + &model.transition * &alpha + &model.selector * eta;
        plus.push(std::mem::replace(&mut alpha, next));
    }

    let zero_intercept = DVector::zeros(m);
    let filt = run_filter(model, &diff, DVector::zeros(m), p1, &zero_intercept)?;
    let sm = smooth(model, &filt, false)?;
    let states: Vec<DVector<f64>> = plus.iter().zip(&sm.mean).map(|(a, s)| a + s).collect();
    if states.iter().any(|s| s.iter().any(|x| !x.is_finite())) {
        return Err(Error::Degenerate { t: 0, message: "non-finite simulated state".into() });
    }
    Ok(StatePath::from_states(&states))
}

/// [`simulate_states`] with a dedicated generator seeded from `seed`.
pub fn simulate_states_seeded(
    model: &StateSpaceModel,
    obs: &[Option<f64>],
    seed: u64,
) -> Result<StatePath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_states(model, obs, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn ll(sigma2: f64, tau2: f64) -> StateSpaceModel {
        build_model(TrendSpec::LocalLevel, sigma2, &[tau2], None, None).unwrap()
    }

    #[test]
    fn local_level_shape() {
        let m = ll(1.0, 0.0);
        assert_eq!(m.state_dim(), 1);
        assert_eq!(m.transition[(0, 0)], 1.0);
        assert_eq!(m.z[0], 1.0);
        let m = build_model(TrendSpec::LocalLinearTrend, 1.0, &[0.1, 0.01], None, None).unwrap();
        assert_eq!(m.state_dim(), 2);
        let m = build_model(TrendSpec::semilocal(), 1.0, &[0.1, 0.01], None, None).unwrap();
        assert!((m.transition[(1, 1)] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn build_errors() {
        assert!(build_model(TrendSpec::LocalLevel, -1.0, &[0.1], None, None).is_err());
        assert!(build_model(TrendSpec::LocalLevel, 1.0, &[0.1, 0.1], None, None).is_err());
        let bad = TrendSpec::SemilocalLinearTrend { phi: 1.0, long_run_slope: 0.0 };
        assert!(build_model(bad, 1.0, &[0.1, 0.1], None, None).is_err());
        let reg = Regressors::new(vec!["a".into(), "b".into()], DMatrix::zeros(3, 2)).unwrap();
        assert!(matches!(
            build_model(TrendSpec::LocalLevel, 1.0, &[0.1], Some(&reg), Some(&[1.0])),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn constant_level_when_state_noise_is_zero() {
        // tau2 = 0 with a diffuse level: filtered level is the running mean.
        let y = [0.3, 0.7, 0.4, 0.6, 0.55, 0.35];
        let obs: Vec<_> = y.iter().map(|v| Some(*v)).collect();
        let m = ll(0.02, 0.0)
            .with_initial(DVector::from_element(1, 0.0), DMatrix::from_element(1, 1, 1e10))
            .unwrap();
        let f = kalman_filter(&m, &obs).unwrap();
        for t in 0..y.len() {
            let running = y[..=t].iter().sum::<f64>() / (t + 1) as f64;
            assert!(close(f.filtered_mean[t][0], running, 1e-8), "t={t}");
        }
    }

    #[test]
    fn noise_free_observation_pins_level() {
        let obs = vec![Some(0.4), Some(0.45), None, Some(0.5)];
        let m = ll(0.0, 1.0);
        let f = kalman_filter(&m, &obs).unwrap();
        assert!(close(f.filtered_mean[1][0], 0.45, 1e-12));
        assert!(f.filtered_cov[1][(0, 0)].abs() < 1e-9);
        let s = kalman_smoother(&m, &f).unwrap();
        assert!(close(s.mean[3][0], 0.5, 1e-12));
        let path = simulate_states_seeded(&m, &obs, 7).unwrap();
        for t in [0, 1, 3] {
            assert!(close(path.level(t), obs[t].unwrap(), 1e-8));
        }
    }

    #[test]
    fn all_missing_gives_zero_likelihood_and_prior_propagation() {
        let obs = vec![None; 5];
        let m = ll(0.1, 0.2)
            .with_initial(DVector::from_element(1, 0.3), DMatrix::from_element(1, 1, 1.0))
            .unwrap();
        let f = kalman_filter(&m, &obs).unwrap();
        assert_eq!(f.log_likelihood, 0.0);
        for t in 0..5 {
            assert!(close(f.filtered_mean[t][0], 0.3, 1e-15));
            assert!(close(f.filtered_cov[t][(0, 0)], 1.0 + 0.2 * t as f64, 1e-12));
        }
    }

    #[test]
    fn zero_variance_with_innovation_is_degenerate() {
        let m = ll(0.0, 0.0)
            .with_initial(DVector::from_element(1, 0.5), DMatrix::zeros(1, 1))
            .unwrap();
        let err = kalman_filter(&m, &[Some(0.5), Some(0.6)]).unwrap_err();
        assert!(matches!(err, Error::Degenerate { t: 1, .. }));
    }

    #[test]
    fn zero_coefficients_leave_likelihood_unchanged() {
        let obs: Vec<_> = (0..40).map(|i| Some(0.5 + 0.01 * ((i * 7) % 5) as f64)).collect();
        let x = DMatrix::from_fn(40, 50, |i, j| ((i * 31 + j * 17) % 13) as f64 / 13.0);
        let names = (0..50).map(|j| format!("x{j}")).collect();
        let reg = Regressors::new(names, x).unwrap();
        let with = build_model(TrendSpec::LocalLevel, 0.01, &[0.001], Some(&reg), Some(&[0.0; 50])).unwrap();
        let without = ll(0.01, 0.001);
        let a = kalman_filter(&with, &obs).unwrap().log_likelihood;
        let b = kalman_filter(&without, &obs).unwrap().log_likelihood;
        assert_eq!(a, b);
    }

    #[test]
    fn appending_missing_day_changes_nothing() {
        let obs: Vec<_> = [0.5, 0.52, 0.49, 0.55].iter().map(|v| Some(*v)).collect();
        for spec in [TrendSpec::LocalLevel, TrendSpec::LocalLinearTrend, TrendSpec::semilocal()] {
            let vars = vec![0.001; spec.n_state_variances()];
            let m = build_model(spec, 0.01, &vars, None, None).unwrap();
            let a = kalman_filter(&m, &obs).unwrap();
            let mut longer = obs.clone();
            longer.push(None);
            let b = kalman_filter(&m, &longer).unwrap();
            assert_eq!(a.log_likelihood, b.log_likelihood);
            for t in 0..obs.len() {
                assert_eq!(a.filtered_mean[t], b.filtered_mean[t]);
                assert_eq!(a.filtered_cov[t], b.filtered_cov[t]);
            }
        }
    }

    #[test]
    fn prediction_variance_is_monotone_in_state_noise() {
        let obs: Vec<_> = (0..30).map(|i| if i % 4 == 3 { None } else { Some(0.5 + 0.02 * (i % 3) as f64) }).collect();
        let grid = [0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
        let runs: Vec<_> = grid.iter().map(|t| kalman_filter(&ll(0.01, *t), &obs).unwrap()).collect();
        for w in runs.windows(2) {
            for t in 0..obs.len() {
                assert!(w[1].innovation_variance[t] >= w[0].innovation_variance[t] - 1e-12);
            }
        }
    }

    #[test]
    fn variance_ordering_smoothed_filtered_predicted() {
        let obs: Vec<_> = (0..25)
            .map(|i| if i % 5 == 2 { None } else { Some(0.4 + 0.01 * ((i * 3) % 7) as f64) })
            .collect();
        for spec in [TrendSpec::LocalLevel, TrendSpec::LocalLinearTrend, TrendSpec::semilocal()] {
            let vars = vec![0.002; spec.n_state_variances()];
            let m = build_model(spec, 0.01, &vars, None, None).unwrap();
            let f = kalman_filter(&m, &obs).unwrap();
            let s = kalman_smoother(&m, &f).unwrap();
            for t in 0..obs.len() {
                for i in 0..m.state_dim() {
                    let (sv, fv, pv) = (s.cov[t][(i, i)], f.filtered_cov[t][(i, i)], f.predicted_cov[t][(i, i)]);
                    let tol = 1e-9 * pv.abs().max(1.0);
                    assert!(sv <= fv + tol, "{spec:?} t={t} i={i}: {sv} > {fv}");
                    assert!(fv <= pv + tol, "{spec:?} t={t} i={i}: {fv} > {pv}");
                    assert!(sv >= -tol);
                }
            }
        }
    }

    #[test]
    fn single_observation_smoothed_equals_filtered() {
        let m = ll(0.05, 0.01);
        let f = kalman_filter(&m, &[Some(0.42)]).unwrap();
        let s = kalman_smoother(&m, &f).unwrap();
        assert!(close(s.mean[0][0], f.filtered_mean[0][0], 1e-12));
        assert!(close(s.cov[0][(0, 0)], f.filtered_cov[0][(0, 0)], 1e-9));
    }

    #[test]
    fn tiny_observation_noise_smooths_onto_data() {
        let obs = vec![Some(0.3), Some(0.5), None, Some(0.45), Some(0.6)];
        let m = ll(1e-12, 0.01);
        let s = kalman_smoother(&m, &kalman_filter(&m, &obs).unwrap()).unwrap();
        for t in [0, 1, 3, 4] {
            assert!((s.mean[t][0] - obs[t].unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let obs: Vec<_> = (0..20).map(|i| Some(0.5 + 0.01 * (i % 4) as f64)).collect();
        let m = ll(0.01, 0.001);
        let a = simulate_states_seeded(&m, &obs, 42).unwrap();
        let b = simulate_states_seeded(&m, &obs, 42).unwrap();
        let c = simulate_states_seeded(&m, &obs, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn trend_labels_round_trip() {
        for s in ["local-level", "local-linear", "semilocal"] {
            assert_eq!(TrendSpec::from_label(s).unwrap().label(), s);
        }
        assert!(TrendSpec::from_label("seasonal").is_err());
    }
}
