//! Brute-force oracles shared by the integration and acceptance tests.
//!
//! Everything here works on the full joint Gaussian of states and
//! observations, built by unrolling the transition equation, and never
//! touches the recursive filter code paths.
#![allow(dead_code)]

use bsts_core::ssm::StateSpaceModel;
use nalgebra::{DMatrix, DVector};

/// Joint linear representation of a state-space model over `n` days:
/// `alpha_t = A_t alpha_1 + B_t eta + d_t`, with `eta` the stacked state
/// disturbances of days `0..n-1`.
pub struct Unrolled {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub d: Vec<DVector<f64>>,
    pub q_big: DMatrix<f64>,
}

pub fn unroll(model: &StateSpaceModel, n: usize) -> Unrolled {
    let m = model.state_dim();
    let q = model.state_variances.len();
    let k = q * n.saturating_sub(1);
    let mut a = vec![DMatrix::identity(m, m)];
    let mut b = vec![DMatrix::zeros(m, k)];
    let mut d = vec![DVector::zeros(m)];
    for t in 1..n {
        let a_next = &model.transition * &a[t - 1];
        let mut b_next = &model.transition * &b[t - 1];
        for i in 0..m {
            for j in 0..q {
                b_next[(i, (t - 1) * q + j)] += model.selector[(i, j)];
            }
        }
        let d_next = &model.intercept + &model.transition * &d[t - 1];
        a.push(a_next);
        b.push(b_next);
        d.push(d_next);
    }
    let mut q_big = DMatrix::zeros(k, k);
    for t in 0..n.saturating_sub(1) {
        for j in 0..q {
            q_big[(t * q + j, t * q + j)] = model.state_variances[j];
        }
    }
    Unrolled { a, b, d, q_big }
}

/// Observed indices, their mean and covariance, the loading of the initial
/// state and the covariance excluding the initial-state term.
pub type JointMoments = (Vec<usize>, DVector<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>);

/// Mean and covariance of the observed entries of `y`, plus their indices.
pub fn joint_observation_moments(
    model: &StateSpaceModel,
    obs: &[Option<f64>],
    a1: &DVector<f64>,
    p1: &DMatrix<f64>,
) -> JointMoments {
    let n = obs.len();
    let u = unroll(model, n);
    let idx: Vec<usize> = (0..n).filter(|t| obs[*t].is_some()).collect();
    let k = idx.len();
    let m = model.state_dim();
    let mut mu = DVector::zeros(k);
    let mut load_init = DMatrix::zeros(k, m);
    let mut load_eta = DMatrix::zeros(k, u.q_big.nrows());
    for (r, &t) in idx.iter().enumerate() {
        let zt = model.z.transpose();
        mu[r] = (&zt * (&u.a[t] * a1 + &u.d[t]))[0] + model.offset(t);
        load_init.row_mut(r).copy_from(&(&zt * &u.a[t]));
        load_eta.row_mut(r).copy_from(&(&zt * &u.b[t]));
    }
    let noise = DMatrix::identity(k, k) * model.obs_variance;
    let cov_rest = &load_eta * &u.q_big * load_eta.transpose() + noise;
    let cov = &load_init * p1 * load_init.transpose() + &cov_rest;
    (idx, mu, cov, load_init, cov_rest)
}

/// Log-density of the observed entries under the joint Gaussian, by a dense
/// Cholesky factorisation of the full covariance.
pub fn brute_force_loglik(
    model: &StateSpaceModel,
    obs: &[Option<f64>],
    a1: &DVector<f64>,
    p1: &DMatrix<f64>,
) -> f64 {
    let (idx, mu, cov, _, _) = joint_observation_moments(model, obs, a1, p1);
    if idx.is_empty() {
        return 0.0;
    }
    let y = DVector::from_iterator(idx.len(), idx.iter().map(|t| obs[*t].unwrap()));
    mvn_logpdf(&y, &mu, &cov)
}

/// Same density, splitting off the initial-state term with the Woodbury
/// identity so that very diffuse `p1` stays well conditioned.
pub fn brute_force_loglik_diffuse(
    model: &StateSpaceModel,
    obs: &[Option<f64>],
    a1: &DVector<f64>,
    p1: &DMatrix<f64>,
) -> f64 {
    let (idx, mu, _, u, a) = joint_observation_moments(model, obs, a1, p1);
    if idx.is_empty() {
        return 0.0;
    }
    let y = DVector::from_iterator(idx.len(), idx.iter().map(|t| obs[*t].unwrap()));
    let e = y - mu;
    let ach = a.clone().cholesky().expect("residual covariance must be PD");
    let ainv_e = ach.solve(&e);
    let ainv_u = ach.solve(&u);
    let p1_inv = p1.clone().try_inverse().expect("p1 invertible");
    let inner = &p1_inv + u.transpose() * &ainv_u;
    let inner_ch = inner.clone().cholesky().expect("inner PD");
    let logdet_a: f64 = 2.0 * ach.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let logdet_p1 = p1.clone().cholesky().unwrap().l().diagonal().iter().map(|v| 2.0 * v.ln()).sum::<f64>();
    let logdet_inner: f64 = 2.0 * inner_ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let logdet = logdet_a + logdet_p1 + logdet_inner;
    let ut_ainv_e = u.transpose() * &ainv_e;
    let quad = e.dot(&ainv_e) - ut_ainv_e.dot(&inner_ch.solve(&ut_ainv_e));
    -0.5 * (idx.len() as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
}

pub fn mvn_logpdf(y: &DVector<f64>, mu: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let ch = cov.clone().cholesky().expect("covariance must be PD");
    let e = y - mu;
    let sol = ch.solve(&e);
    let logdet: f64 = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * (y.len() as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + e.dot(&sol))
}

/// Posterior mean and covariance of the state on day `t` by conditioning the
/// joint Gaussian of `(alpha_t, y_obs)`.
pub fn conditional_state(
    model: &StateSpaceModel,
    obs: &[Option<f64>],
    a1: &DVector<f64>,
    p1: &DMatrix<f64>,
    t: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = obs.len();
    let u = unroll(model, n);
    let (idx, mu_y, cov_y, _, _) = joint_observation_moments(model, obs, a1, p1);
    let mean_t = &u.a[t] * a1 + &u.d[t];
    let cov_t = &u.a[t] * p1 * u.a[t].transpose() + &u.b[t] * &u.q_big * u.b[t].transpose();
    let m = model.state_dim();
    let mut cross = DMatrix::zeros(m, idx.len());
    for (r, &s) in idx.iter().enumerate() {
        let zt = model.z.transpose();
        let c = &u.a[t] * p1 * (&zt * &u.a[s]).transpose()
            + &u.b[t] * &u.q_big * (&zt * &u.b[s]).transpose();
        cross.column_mut(r).copy_from(&c.column(0));
    }
    if idx.is_empty() {
        return (mean_t, cov_t);
    }
    let y = DVector::from_iterator(idx.len(), idx.iter().map(|s| obs[*s].unwrap()));
    let ch = cov_y.cholesky().unwrap();
    let gain_t = ch.solve(&cross.transpose()).transpose();
    let mean = mean_t + &gain_t * (y - mu_y);
    let cov = cov_t - &gain_t * cross.transpose();
    (mean, cov)
}

/// Tiny deterministic generator for test-parameter draws, kept separate from
/// the library's RNG stack.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn log_range(&mut self, lo: f64, hi: f64) -> f64 {
        (lo.ln() + (hi.ln() - lo.ln()) * self.uniform()).exp()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Asymptotic Kolmogorov-Smirnov p-value of a sample against a CDF.
pub fn ks_p_value(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

/// Log-density of an inverse-gamma distribution.
pub fn inv_gamma_logpdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Hyperparameters of the local-level spike-and-slab model used by
/// [`ssvs_model_posterior`].
pub struct SsvsSetup {
    pub sigma2_prior: (f64, f64),
    pub tau2_prior: (f64, f64),
    pub inclusion_prob: f64,
    pub kappa: f64,
    pub offdiag_weight: f64,
    /// Initial level mean and variance.
    pub init: (f64, f64),
}

/// Posterior probabilities of every inclusion pattern over the columns of
/// `x` (ordered by bitmask, bit j = regressor j) for a local-level model
/// with spike-and-slab regression.
///
/// Coefficients and the initial level are integrated out analytically in the
/// joint Gaussian of `y`; the two variances by midpoint quadrature on a
/// log-scale grid.
pub fn ssvs_model_posterior(y: &[f64], x: &DMatrix<f64>, s: &SsvsSetup) -> Vec<f64> {
    let n = y.len();
    let p = x.ncols();
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * x;
    let omega = DMatrix::from_fn(p, p, |i, j| {
        let v = if i == j { xtx[(i, i)] } else { s.offdiag_weight * xtx[(i, j)] };
        s.kappa * v / n as f64
    });
    // Random-walk covariance min(i, j) for the level increments.
    let walk = DMatrix::from_fn(n, n, |i, j| i.min(j) as f64);
    let ones = DVector::from_element(n, 1.0);
    let mean = DVector::from_element(n, s.init.0);

    let grid = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
        (0..k).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / k as f64).collect()
    };
    let log_s2 = grid((1e-4f64).ln(), (0.2f64).ln(), 100);
    let log_t2 = grid((1e-6f64).ln(), (0.05f64).ln(), 100);

    let mut log_post = Vec::with_capacity(1 << p);
    for mask in 0..(1usize << p) {
        let cols: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
        let k = cols.len();
        // X_g Omega_g^{-1} X_g'
        let proj = if k == 0 {
            DMatrix::zeros(n, n)
        } else {
            let xg = DMatrix::from_fn(n, k, |t, a| x[(t, cols[a])]);
            let og = DMatrix::from_fn(k, k, |a, b| omega[(cols[a], cols[b])]);
            let oinv = og.try_inverse().unwrap();
            &xg * oinv * xg.transpose()
        };
        let mut terms = Vec::with_capacity(log_s2.len() * log_t2.len());
        for &ls in &log_s2 {
            for &lt in &log_t2 {
                let (s2, t2) = (ls.exp(), lt.exp());
                let a = (DMatrix::identity(n, n) + &proj) * s2 + &walk * t2;
                let ll = gaussian_rank_one_logpdf(&yv, &mean, &a, &ones, s.init.1);
                let lp = inv_gamma_logpdf(s2, s.sigma2_prior.0, s.sigma2_prior.1)
                    + inv_gamma_logpdf(t2, s.tau2_prior.0, s.tau2_prior.1)
                    + ls
                    + lt;
                terms.push(ll + lp);
            }
        }
        let prior = k as f64 * s.inclusion_prob.ln() + (p - k) as f64 * (1.0 - s.inclusion_prob).ln();
        log_post.push(prior + log_sum_exp(&terms));
    }
    let z = log_sum_exp(&log_post);
    log_post.iter().map(|l| (l - z).exp()).collect()
}

/// log N(y; mu, A + v u u'), via the matrix determinant lemma and
/// Sherman-Morrison so that a large `v` stays well conditioned.
pub fn gaussian_rank_one_logpdf(
    y: &DVector<f64>,
    mu: &DVector<f64>,
    a: &DMatrix<f64>,
    u: &DVector<f64>,
    v: f64,
) -> f64 {
    let ch = a.clone().cholesky().expect("PD covariance");
    let e = y - mu;
    let ainv_e = ch.solve(&e);
    let ainv_u = ch.solve(u);
    let c = 1.0 + v * u.dot(&ainv_u);
    let logdet = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() + c.ln();
    let quad = e.dot(&ainv_e) - v * u.dot(&ainv_e).powi(2) / c;
    -0.5 * (y.len() as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn local_level_data(n: usize, sigma2: f64, tau2: f64, rng: &mut SplitMix) -> Vec<f64> {
    let mut level = 0.5;
    (0..n)
        .map(|_| {
            let y = level + sigma2.sqrt() * rng.normal();
            level += tau2.sqrt() * rng.normal();
            y
        })
        .collect()
}

/// p = 2, T = 50 micro-instance shared with the acceptance suite.
pub fn ssvs_micro_instance() -> (Vec<f64>, DMatrix<f64>, SsvsSetup) {
    let mut rng = SplitMix(2024);
    let n = 50;
    let x = DMatrix::from_fn(n, 2, |_, _| rng.normal());
    let mut x = x;
    for t in 0..n {
        x[(t, 1)] = 0.6 * x[(t, 0)] + 0.8 * x[(t, 1)];
    }
    let base = local_level_data(n, 0.01, 0.0005, &mut rng);
    let y: Vec<f64> = (0..n).map(|t| base[t] + 0.06 * x[(t, 0)]).collect();
    let setup = SsvsSetup {
        sigma2_prior: (3.0, 0.02),
        tau2_prior: (3.0, 0.002),
        inclusion_prob: 0.4,
        kappa: 0.01,
        offdiag_weight: 0.5,
        init: (y[0], 1e6),
    };
    (y, x, setup)
}
