//! Property tests for the structural invariants of each module.

use bsts_core::compare::call_from_interval;
use bsts_core::compare::Winner;
use bsts_core::forecast::forecast_at_cutoff;
use bsts_core::gibbs::{run_mcmc_values, McmcConfig, Priors};
use bsts_core::series::aggregate_same_day;
use bsts_core::ssm::{build_model, kalman_filter, kalman_smoother, Regressors};
use bsts_core::{DateStamp, PollRecord, Series, Source, TrendSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn trend(k: u8) -> TrendSpec {
    match k % 3 {
        0 => TrendSpec::LocalLevel,
        1 => TrendSpec::LocalLinearTrend,
        _ => TrendSpec::semilocal(),
    }
}

fn variances(spec: TrendSpec, level: f64, slope: f64) -> Vec<f64> {
    match spec.n_state_variances() {
        1 => vec![level],
        _ => vec![level, slope],
    }
}

fn obs_strategy(max: usize) -> impl Strategy<Value = Vec<Option<f64>>> {
    proptest::collection::vec(proptest::option::weighted(0.8, 0.0f64..1.0), 1..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn date_arithmetic_round_trips(offset in 0i64..20000, k in -5000i64..5000) {
        let d = DateStamp::parse("1990-01-01").unwrap().add_days(offset);
        let e = d.add_days(k);
        prop_assert_eq!(d.days_until(e), k);
        prop_assert_eq!(d < e, k > 0);
        prop_assert_eq!(DateStamp::parse(&d.to_string()).unwrap(), d);
        prop_assert_eq!(d.succ().pred(), d);
    }

    #[test]
    fn same_day_mean_lies_within_the_day_range(vals in proptest::collection::vec(0.0f64..=1.0, 1..12)) {
        let d = DateStamp::parse("2024-05-01").unwrap();
        let recs: Vec<PollRecord> =
            vals.iter().enumerate().map(|(i, v)| PollRecord::new(d, "PA", format!("p{i}"), *v).unwrap()).collect();
        let s = aggregate_same_day(&recs).unwrap();
        let m = s.value(d).unwrap();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
        prop_assert_eq!(s.dispersion(d).is_some(), vals.len() > 1);
        if let Some(sd) = s.dispersion(d) {
            prop_assert!(sd >= 0.0);
        }
    }

    #[test]
    fn appending_a_missing_day_leaves_the_filter_unchanged(
        obs in obs_strategy(25),
        k in 0u8..3,
        sigma2 in 1e-4f64..0.1,
        level in 1e-5f64..0.05,
        slope in 1e-6f64..0.01,
    ) {
        let spec = trend(k);
        let model = build_model(spec, sigma2, &variances(spec, level, slope), None, None).unwrap();
        let a = kalman_filter(&model, &obs).unwrap();
        let mut longer = obs.clone();
        longer.push(None);
        let b = kalman_filter(&model, &longer).unwrap();
        prop_assert!((a.log_likelihood - b.log_likelihood).abs() <= 1e-10 * a.log_likelihood.abs().max(1.0));
        for t in 0..obs.len() {
            prop_assert!((&a.filtered_mean[t] - &b.filtered_mean[t]).amax() < 1e-12);
            prop_assert!((&a.filtered_cov[t] - &b.filtered_cov[t]).amax() < 1e-12);
        }
    }

    #[test]
    fn local_level_prediction_variance_is_monotone_in_state_noise(
        obs in obs_strategy(20),
        sigma2 in 1e-4f64..0.1,
        tau_lo in 1e-6f64..0.01,
        bump in 1e-6f64..0.05,
    ) {
        let f = |tau2: f64| {
            let m = build_model(TrendSpec::LocalLevel, sigma2, &[tau2], None, None).unwrap();
            kalman_filter(&m, &obs).unwrap().innovation_variance
        };
        let lo = f(tau_lo);
        let hi = f(tau_lo + bump);
        for t in 0..obs.len() {
            prop_assert!(hi[t] >= lo[t] * (1.0 - 1e-10));
        }
    }

    #[test]
    fn covariances_are_psd_and_ordered(
        obs in obs_strategy(20),
        k in 0u8..3,
        sigma2 in 1e-4f64..0.1,
        level in 1e-5f64..0.05,
        slope in 1e-6f64..0.01,
    ) {
        let spec = trend(k);
        let model = build_model(spec, sigma2, &variances(spec, level, slope), None, None).unwrap();
        let f = kalman_filter(&model, &obs).unwrap();
        let s = kalman_smoother(&model, &f).unwrap();
        prop_assert!(f.log_likelihood.is_finite());
        for t in 0..obs.len() {
            for p in [&f.predicted_cov[t], &f.filtered_cov[t], &s.cov[t]] {
                prop_assert!((p - p.transpose()).amax() <= 1e-9 * p.amax().max(1.0));
                let eig = p.clone().symmetric_eigen().eigenvalues;
                prop_assert!(eig.iter().all(|e| *e >= -1e-8 * p.amax().max(1.0)), "t={} eig={:?} p={}", t, eig, p);
            }
            for i in 0..model.state_dim() {
                let (pp, pf, ps) = (f.predicted_cov[t][(i, i)], f.filtered_cov[t][(i, i)], s.cov[t][(i, i)]);
                let tol = 1e-9 * pp.abs().max(1.0);
                prop_assert!(ps <= pf + tol && pf <= pp + tol);
            }
        }
    }

    #[test]
    fn interval_calls_follow_the_band(lower in 0.0f64..1.0, width in 0.0f64..0.5, boundary in 0.05f64..0.95) {
        let upper = (lower + width).min(1.0);
        let call = call_from_interval(lower, upper, boundary);
        let expected = if lower > boundary {
            Winner::Candidate
        } else if upper < boundary {
            Winner::Opponent
        } else {
            Winner::TooClose
        };
        prop_assert_eq!(call, expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn posterior_draws_respect_their_invariants(
        seed in any::<u64>(),
        n in 35usize..50,
        iterations in 30usize..60,
        burn_in in 0usize..20,
        thin in 1usize..4,
    ) {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let obs: Vec<Option<f64>> = (0..n).map(|t| if t % 7 == 3 { None } else { Some(0.4 + 0.2 * next()) }).collect();
        let x = DMatrix::from_fn(n, 3, |_, _| next());
        let reg = Regressors::new(vec!["a".into(), "b".into(), "c".into()], x).unwrap();
        let priors = Priors::default_for(TrendSpec::LocalLevel, &obs, 3);
        let config = McmcConfig { iterations, burn_in, thin, seed };
        let d = run_mcmc_values(TrendSpec::LocalLevel, &obs, Some(&reg), &priors, &config).unwrap();
        prop_assert_eq!(d.len(), (iterations - burn_in) / thin);
        prop_assert_eq!(d.len(), config.retained());
        for i in 0..d.len() {
            prop_assert!(d.sigma2[i] > 0.0);
            prop_assert!(d.state_variances[i].iter().all(|v| *v > 0.0));
            for (b, g) in d.beta[i].iter().zip(&d.gamma[i]) {
                if !*g {
                    prop_assert_eq!(*b, 0.0);
                }
            }
        }
    }

    #[test]
    fn forecast_quantiles_are_monotone_and_end_on_election_day(
        seed in any::<u64>(),
        vals in proptest::collection::vec(0.2f64..0.8, 30..45),
        gap in 1i64..20,
    ) {
        let start = DateStamp::parse("2024-09-01").unwrap();
        let obs: Vec<Option<f64>> = vals.iter().map(|v| Some(*v)).collect();
        let s = Series::from_values("national", Source::Market, start, &obs).unwrap();
        let cutoff = start.add_days(obs.len() as i64 - 1);
        let election = cutoff.add_days(gap);
        let config = McmcConfig { iterations: 80, burn_in: 20, thin: 1, seed };
        let r = forecast_at_cutoff(&s, cutoff, election, TrendSpec::LocalLevel, None, &config).unwrap();
        prop_assert_eq!(r.dates.len() as i64, gap);
        prop_assert_eq!(*r.dates.last().unwrap(), election);
        prop_assert!(r.dates.windows(2).all(|w| w[0] < w[1]));
        for h in 0..r.dates.len() {
            prop_assert!(r.quantiles[h].windows(2).all(|w| w[0] <= w[1]));
            let rep = r.reported_quantiles(h);
            prop_assert!(rep.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(rep.iter().all(|q| (0.0..=1.0).contains(q)));
        }
    }
}
