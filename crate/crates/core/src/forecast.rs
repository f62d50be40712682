//! Rolling-origin posterior-predictive forecasts to election day.
//!
//! For every cutoff the trend model is refitted on data up to and including
//! the cutoff, without regressors. Each retained draw then carries its own
//! terminal state and variances forward with fresh noise, so parameter and
//! state uncertainty both reach the predictive distribution.
//!
//! Seeds: the MCMC chain for cutoff `i` runs with `seed ^ i`; the propagation
//! step uses the same seed on a separate ChaCha stream.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::{run_mcmc_values, McmcConfig, PosteriorDraws, Priors};
use crate::series::{DateRange, DateStamp, Series, Source};
use crate::ssm::{build_model, TrendSpec};
use crate::stats;

/// Levels of the stored quantiles.
pub const QUANTILE_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

pub const DEFAULT_CUTOFFS: [&str; 8] = [
    "2024-06-07",
    "2024-06-28",
    "2024-07-19",
    "2024-08-09",
    "2024-08-30",
    "2024-09-20",
    "2024-10-18",
    "2024-10-29",
];

pub const ELECTION_DAY: &str = "2024-11-05";

pub fn default_cutoffs() -> Vec<DateStamp> {
    DEFAULT_CUTOFFS.iter().map(|s| DateStamp::parse(s).expect("valid constant")).collect()
}

pub fn election_day() -> DateStamp {
    DateStamp::parse(ELECTION_DAY).expect("valid constant")
}

/// Seed for a labelled task: `base` xor the 64-bit FNV-1a hash of `label`.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    base ^ h
}

/// Forecast from one cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub source: Source,
    pub jurisdiction: String,
    pub cutoff: DateStamp,
    /// `cutoff + 1 ..= election day`.
    pub dates: Vec<DateStamp>,
    /// Unclamped predictive mean per date.
    pub mean: Vec<f64>,
    /// Unclamped quantiles at [`QUANTILE_LEVELS`] per date.
    pub quantiles: Vec<[f64; 5]>,
    /// Unclamped predictive draws, `draws[date][draw]`, each date sorted.
    pub draws: Vec<Vec<f64>>,
}

impl ForecastResult {
    pub fn n_draws(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    pub fn horizon(&self) -> usize {
        self.dates.len()
    }

    pub fn election_day(&self) -> DateStamp {
        *self.dates.last().expect("horizon is never empty")
    }

    /// Reported quantiles for date index `h`, clamped to [0, 1].
    pub fn reported_quantiles(&self, h: usize) -> [f64; 5] {
        self.quantiles[h].map(|q| q.clamp(0.0, 1.0))
    }

    pub fn reported_mean(&self, h: usize) -> f64 {
        self.mean[h].clamp(0.0, 1.0)
    }

    /// Reported 95% band on election day.
    pub fn election_band(&self) -> (f64, f64) {
        let q = self.reported_quantiles(self.horizon() - 1);
        (q[0], q[4])
    }
}

/// Central predictive band at one horizon date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictiveBand {
    pub date: DateStamp,
    pub lower: f64,
    pub upper: f64,
}

/// Empirical central interval at `level` per horizon date, clamped to [0, 1].
/// Needs at least `40 / (1 - level)` draws.
pub fn predictive_interval(result: &ForecastResult, level: f64) -> Result<Vec<PredictiveBand>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::OutOfRange(format!("interval level {level} must lie in (0, 1)")));
    }
    let need = (40.0 / (1.0 - level)).ceil() as usize;
    let have = result.n_draws();
    if have < need {
        return Err(Error::InsufficientDraws { have, need });
    }
    // Levels with a stored quantile pair reuse it bit for bit.
    let stored = [(0.95, 0usize, 4usize), (0.5, 1, 3)]
        .into_iter()
        .find(|(l, _, _)| (level - l).abs() < 1e-12)
        .map(|(_, lo, hi)| (lo, hi));
    let tail = 0.5 * (1.0 - level);
    Ok((0..result.horizon())
        .map(|h| {
            let (lower, upper) = match stored {
                Some((lo, hi)) => (result.quantiles[h][lo], result.quantiles[h][hi]),
                None => {
                    let d = &result.draws[h];
                    (stats::quantile_sorted(d, tail), stats::quantile_sorted(d, 1.0 - tail))
                }
            };
            PredictiveBand { date: result.dates[h], lower: lower.clamp(0.0, 1.0), upper: upper.clamp(0.0, 1.0) }
        })
        .collect())
}

/// Predictive draws `h = 1..=horizon` steps past the last modelled day, one
/// per posterior draw: `out[h - 1][d]`.
pub fn forecast_from_draws<R: Rng + ?Sized>(
    draws: &PosteriorDraws,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::with_capacity(draws.len()); horizon];
    for d in 0..draws.len() {
        let model = build_model(draws.trend, draws.sigma2[d], &draws.state_variances[d], None, None)?;
        let sd_h = draws.sigma2[d].sqrt();
        let sd_q: Vec<f64> = draws.state_variances[d].iter().map(|v| v.sqrt()).collect();
        let mut alpha = DVector::from_column_slice(draws.states[d].last());
        for slot in out.iter_mut() {
            let eta = DVector::from_iterator(sd_q.len(), sd_q.iter().map(|s| s * rng.sample::<f64, _>(StandardNormal)));
            alpha = &model.intercept + &model.transition * &alpha + &model.selector * eta;
            slot.push(model.z.dot(&alpha) + sd_h * rng.sample::<f64, _>(StandardNormal));
        }
    }
    Ok(out)
}

fn summarize(
    source: Source,
    jurisdiction: &str,
    cutoff: DateStamp,
    mut paths: Vec<Vec<f64>>,
) -> ForecastResult {
    let dates = (1..=paths.len()).map(|h| cutoff.add_days(h as i64)).collect();
    let mean = paths.iter().map(|d| stats::mean(d)).collect();
    for d in paths.iter_mut() {
        d.sort_by(f64::total_cmp);
    }
    let quantiles = paths.iter().map(|d| QUANTILE_LEVELS.map(|q| stats::quantile_sorted(d, q))).collect();
    ForecastResult { source, jurisdiction: jurisdiction.to_string(), cutoff, dates, mean, quantiles, draws: paths }
}

/// Fits on data up to `cutoff` and forecasts every day through `election`.
pub fn forecast_at_cutoff(
    series: &Series,
    cutoff: DateStamp,
    election: DateStamp,
    spec: TrendSpec,
    priors: Option<&Priors>,
    config: &McmcConfig,
) -> Result<ForecastResult> {
    if cutoff >= election {
        return Err(Error::Input(format!("cutoff {cutoff} is not before election day {election}")));
    }
    let first = series.first_present_date().ok_or(Error::EmptySeries)?;
    if cutoff < first {
        return Err(Error::NoDataBeforeCutoff { cutoff: cutoff.to_string(), first: first.to_string() });
    }
    let obs = series.values_on(&DateRange::new(first, cutoff)?);
    let default_priors;
    let priors = match priors {
        Some(p) => p,
        None => {
            default_priors = Priors::default_for(spec, &obs, 0);
            &default_priors
        }
    };
    let mut draws = run_mcmc_values(spec, &obs, None, priors, config)?;
    draws.start = Some(first);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let horizon = cutoff.days_until(election) as usize;
    let paths = forecast_from_draws(&draws, horizon, &mut rng)?;
    Ok(summarize(series.source(), series.jurisdiction(), cutoff, paths))
}

/// One [`forecast_at_cutoff`] per cutoff, run in parallel with seed
/// `config.seed ^ i` for the `i`-th cutoff. Results follow cutoff order.
pub fn rolling_forecast(
    series: &Series,
    cutoffs: &[DateStamp],
    election: DateStamp,
    spec: TrendSpec,
    priors: Option<&Priors>,
    config: &McmcConfig,
) -> Result<Vec<ForecastResult>> {
    rolling_forecast_each(series, cutoffs, election, spec, priors, config)?.into_iter().collect()
}

/// [`rolling_forecast`] keeping each cutoff's outcome separately, so callers
/// can skip cutoffs with too little data. Seeds are identical.
pub fn rolling_forecast_each(
    series: &Series,
    cutoffs: &[DateStamp],
    election: DateStamp,
    spec: TrendSpec,
    priors: Option<&Priors>,
    config: &McmcConfig,
) -> Result<Vec<Result<ForecastResult>>> {
    if cutoffs.is_empty() {
        return Err(Error::Input("no forecast cutoffs given".into()));
    }
    Ok(cutoffs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let cfg = McmcConfig { seed: config.seed ^ i as u64, ..*config };
            forecast_at_cutoff(series, *c, election, spec, priors, &cfg)
        })
        .collect())
}

/// Writes the tidy table
/// `source,jurisdiction,cutoff,date,mean,q025,q25,q50,q75,q975` with
/// reported (clamped) values.
pub fn write_forecast_csv<W: Write>(results: &[ForecastResult], w: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["source", "jurisdiction", "cutoff", "date", "mean", "q025", "q25", "q50", "q75", "q975"])?;
    for r in results {
        for (h, date) in r.dates.iter().enumerate() {
            let q = r.reported_quantiles(h);
            let mut row = vec![
                r.source.to_string(),
                r.jurisdiction.clone(),
                r.cutoff.to_string(),
                date.to_string(),
                r.reported_mean(h).to_string(),
            ];
            row.extend(q.iter().map(|v| v.to_string()));
            wtr.write_record(&row)?;
        }
    }
    wtr.flush()
}

/// Reads tables written by [`write_forecast_csv`]. The values are the
/// reported (clamped) ones and no draws are attached, so the results support
/// band comparisons but not [`predictive_interval`].
pub fn read_forecast_csv(path: &Path) -> Result<Vec<ForecastResult>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let want = ["source", "jurisdiction", "cutoff", "date", "mean", "q025", "q25", "q50", "q75", "q975"];
    if let Some(missing) = want.iter().find(|c| !headers.iter().any(|h| h == **c)) {
        return Err(Error::MissingColumn { path: path.into(), column: missing.to_string() });
    }
    let row_err = |row: usize, message: String| Error::Row { path: path.into(), row, message };
    let mut out: Vec<ForecastResult> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let source: Source = rec[0].parse().map_err(|e: Error| row_err(row, e.to_string()))?;
        let cutoff = DateStamp::parse(&rec[2]).map_err(|e| row_err(row, e.to_string()))?;
        let date = DateStamp::parse(&rec[3]).map_err(|e| row_err(row, e.to_string()))?;
        let mut nums = [0.0; 6];
        for (k, slot) in nums.iter_mut().enumerate() {
            let cell = &rec[4 + k];
            *slot = cell.parse().map_err(|_| row_err(row, format!("unparseable number `{cell}`")))?;
        }
        let same = out.last().is_some_and(|f| f.source == source && f.jurisdiction == rec[1] && f.cutoff == cutoff);
        if !same {
            out.push(ForecastResult {
                source,
                jurisdiction: rec[1].to_string(),
                cutoff,
                dates: Vec::new(),
                mean: Vec::new(),
                quantiles: Vec::new(),
                draws: Vec::new(),
            });
        }
        let f = out.last_mut().expect("pushed above");
        let expected = f.dates.last().map_or(cutoff.succ(), DateStamp::succ);
        if date != expected {
            return Err(row_err(row, format!("expected horizon date {expected}, found {date}")));
        }
        f.dates.push(date);
        f.mean.push(nums[0]);
        f.quantiles.push([nums[1], nums[2], nums[3], nums[4], nums[5]]);
    }
    Ok(out)
}
