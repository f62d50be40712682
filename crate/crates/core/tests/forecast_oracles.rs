use bsts_core::gibbs::{Diagnostics, PosteriorDraws};
use bsts_core::forecast::forecast_from_draws;
use bsts_core::ssm::{StatePath, TrendSpec};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn draws_with(trend: TrendSpec, sigma2: f64, vars: &[f64], terminal: Vec<Vec<f64>>) -> PosteriorDraws {
    let n = terminal.len();
    PosteriorDraws {
        trend,
        start: None,
        observations: vec![None],
        sigma2: vec![sigma2; n],
        state_variances: vec![vars.to_vec(); n],
        beta: vec![Vec::new(); n],
        gamma: vec![Vec::new(); n],
        states: terminal.iter().map(|s| StatePath::from_states(&[DVector::from_column_slice(s)])).collect(),
        regressor_names: Vec::new(),
        regressor_means: Vec::new(),
        design: None,
        diagnostics: Diagnostics {
            chains: 1,
            iterations: n,
            burn_in: 0,
            thin: 1,
            mean_model_size: 0.0,
            ess_sigma2: n as f64,
            ess_state_variances: vec![n as f64; vars.len()],
        },
    }
}

/// Empirical quantiles at 2.5% and 97.5% against the analytic Gaussian,
/// within five asymptotic standard errors of a sample quantile.
fn check_against_gaussian(sample: &mut [f64], mean: f64, var: f64, label: &str) {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let normal = Normal::new(mean, var.sqrt()).unwrap();
    for p in [0.025, 0.5, 0.975] {
        let q = normal.inverse_cdf(p);
        let dens = (-(q - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        let se = (p * (1.0 - p) / n).sqrt() / dens;
        let idx = ((n - 1.0) * p).round() as usize;
        assert!((sample[idx] - q).abs() < 5.0 * se, "{label} p={p}: {} vs {q} (se {se})", sample[idx]);
    }
}

#[test]
fn local_level_predictive_variance_is_pt_plus_h_tau2_plus_sigma2() {
    let (sigma2, tau2, p_t): (f64, f64, f64) = (0.004, 0.001, 0.0005);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Normal::new(0.5, p_t.sqrt()).unwrap();
    let terminal: Vec<Vec<f64>> = (0..20_000).map(|_| vec![normal.inverse_cdf(rand::Rng::random::<f64>(&mut rng))]).collect();
    let draws = draws_with(TrendSpec::LocalLevel, sigma2, &[tau2], terminal);
    let out = forecast_from_draws(&draws, 30, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    for h in [1usize, 10, 30] {
        let mut s = out[h - 1].clone();
        check_against_gaussian(&mut s, 0.5, p_t + h as f64 * tau2 + sigma2, &format!("h={h}"));
    }
}

#[test]
fn local_linear_trend_predictive_moments() {
    let (sigma2, tau_l, tau_s) = (0.002, 0.0008, 0.00002);
    let (level, slope) = (0.45, 0.002);
    let draws = draws_with(TrendSpec::LocalLinearTrend, sigma2, &[tau_l, tau_s], vec![vec![level, slope]; 20_000]);
    let out = forecast_from_draws(&draws, 40, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    for h in [1usize, 15, 40] {
        let hf = h as f64;
        let sum_sq: f64 = (1..h).map(|j| (j * j) as f64).sum();
        let var = hf * tau_l + tau_s * sum_sq + sigma2;
        let mut s = out[h - 1].clone();
        check_against_gaussian(&mut s, level + hf * slope, var, &format!("h={h}"));
    }
}

#[test]
fn semilocal_slope_reverts_to_long_run_drift() {
    let spec = TrendSpec::SemilocalLinearTrend { phi: 0.5, long_run_slope: 0.0 };
    let draws = draws_with(spec, 1e-6, &[1e-6, 1e-8], vec![vec![0.5, 0.01]; 5_000]);
    let out = forecast_from_draws(&draws, 20, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    // Level gains sum_{k=0}^{h-1} 0.01 * 0.5^k, bounded by 0.02.
    let mean20: f64 = out[19].iter().sum::<f64>() / 5_000.0;
    let expected = 0.5 + 0.01 * (1.0 - 0.5f64.powi(20)) / 0.5;
    assert!((mean20 - expected).abs() < 1e-3, "{mean20} vs {expected}");
}
