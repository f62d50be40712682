//! The four pipeline stages. Each stage reads the previous stage's files
//! under the output root, so stages can be rerun independently:
//!
//! ```text
//! <out>/ingest/                  dataset.json, market_panel.csv, regressor_panel.csv,
//!                                fill_report.csv, poll_panel.csv, poll_sd_panel.csv,
//!                                poll_summary.csv, completeness.csv, events.csv
//! <out>/fit/<trend>/             summary.csv, inclusion.csv, fit.csv, draws.csv,
//!                                diagnostics.csv, fit.svg
//! <out>/forecast/<trend>/        forecast_<jurisdiction>.csv, skipped.csv, fan_<jurisdiction>.svg
//! <out>/compare/<trend>/         report.json, calls.csv, divergence.csv, reactivity.csv,
//!                                completeness.csv, overlay_<jurisdiction>.csv/.svg
//! ```
//!
//! Seeds: the fit uses `derive_seed(seed, "fit/national")`; the forecasts for
//! one series use `derive_seed(seed, "<source>/<jurisdiction>")`, xor-ed with
//! the cutoff index inside the forecast module.

use std::fs;
use std::path::{Path, PathBuf};

use bsts_core::compare::{
    completeness_stats, event_reactivity, ComparisonReport, Completeness, Event, DEFAULT_BOUNDARY,
    DEFAULT_REACTIVITY_WINDOW,
};
use bsts_core::forecast::{
    derive_seed, read_forecast_csv, rolling_forecast_each, write_forecast_csv, ForecastResult,
};
use bsts_core::gibbs::{
    fit_report, inclusion_probabilities, posterior_summary, run_mcmc, write_draws_csv, McmcConfig, PosteriorDraws,
    Priors,
};
use bsts_core::ingest::{
    load_events_csv, load_markets, load_poll_series, read_panel_csv, regressor_panel_from, write_panel_csv,
    DatasetManifest, FillReport, PollLoad, NATIONAL,
};
use bsts_core::{AlignedPanel, DateRange, DateStamp, Series, Source, TrendSpec};
use log::{info, warn};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::svg::{Chart, FIT_COLOR, MARKET_COLOR, POLL_COLOR};

/// Everything a command needs; built from command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub trend: TrendSpec,
    pub cutoffs: Vec<DateStamp>,
    /// Forecast/compare jurisdictions; `None` means national plus the
    /// manifest's swing states.
    pub jurisdictions: Option<Vec<String>>,
    pub svg: bool,
}

impl RunConfig {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        RunConfig {
            manifest: None,
            out: out.into(),
            seed: 2024,
            iterations: 2000,
            burn_in: 500,
            trend: TrendSpec::LocalLevel,
            cutoffs: bsts_core::forecast::default_cutoffs(),
            jurisdictions: None,
            svg: true,
        }
    }

    fn mcmc(&self, seed: u64) -> CliResult<McmcConfig> {
        let c = McmcConfig { iterations: self.iterations, burn_in: self.burn_in, thin: 1, seed };
        c.validate().map_err(|e| CliError::Input(format!("MCMC settings: {e}")))?;
        Ok(c)
    }

    fn validate_cutoffs(&self, election: DateStamp) -> CliResult<()> {
        if self.cutoffs.is_empty() {
            return Err(CliError::Input("no forecast cutoffs given".into()));
        }
        if let Some(c) = self.cutoffs.iter().find(|c| **c >= election) {
            return Err(CliError::Input(format!("cutoff {c} is not before election day {election}")));
        }
        if self.cutoffs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Input("cutoffs must be strictly increasing".into()));
        }
        Ok(())
    }

    fn stage_dir(&self, stage: &str) -> PathBuf {
        match stage {
            "ingest" => self.out.join("ingest"),
            other => self.out.join(other).join(self.trend.label()),
        }
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| CliError::Input(format!("cannot move {} into place: {e}", path.display())))
}

fn write_csv_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> CliResult<()> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Internal(format!("serializing {}: {e}", path.display())))?;
    write_atomic(path, &buf)
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    write_csv_with(path, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Outputs of [`cmd_ingest`], also reloadable with [`load_ingest`].
#[derive(Debug, Clone)]
pub struct Ingested {
    pub manifest: DatasetManifest,
    /// National and state prices on the analysis window, not filled.
    pub market: AlignedPanel,
    /// National target (not filled) plus gap-filled state columns.
    pub regressors: AlignedPanel,
    /// Same-day mean poll value per jurisdiction.
    pub polls: AlignedPanel,
    /// Same-day standard deviation across polls (days with two or more).
    pub poll_sd: AlignedPanel,
    pub events: Vec<Event>,
}

impl Ingested {
    pub fn window(&self) -> DateRange {
        self.manifest.window
    }

    pub fn market_series(&self, jurisdiction: &str) -> Option<Series> {
        self.market.series(jurisdiction, Source::Market)
    }

    /// `None` when the jurisdiction has no poll on any day.
    pub fn poll_series(&self, jurisdiction: &str) -> Option<Series> {
        let col = self.polls.column(jurisdiction)?;
        if col.iter().all(Option::is_none) {
            return None;
        }
        self.polls.series(jurisdiction, Source::Polls)
    }

    fn jurisdictions(&self, cfg: &RunConfig) -> CliResult<Vec<String>> {
        let list = match &cfg.jurisdictions {
            Some(l) => l.clone(),
            None => std::iter::once(NATIONAL.to_string()).chain(self.manifest.swing_states.iter().cloned()).collect(),
        };
        if let Some(j) = list.iter().find(|j| !self.manifest.jurisdictions.contains(j)) {
            return Err(CliError::Input(format!("jurisdiction `{j}` is not in the dataset")));
        }
        Ok(list)
    }
}

fn completeness(ing: &Ingested) -> Vec<Completeness> {
    let window = Some(ing.window());
    let mut rows = Vec::new();
    for (source, panel) in [(Source::Market, &ing.market), (Source::Polls, &ing.polls)] {
        for mut c in completeness_stats(panel, window) {
            c.column = format!("{source}/{}", c.column);
            rows.push(c);
        }
    }
    rows
}

/// Loads the manifest's files and writes the canonical panels.
pub fn cmd_ingest(cfg: &RunConfig) -> CliResult<Ingested> {
    let path = cfg.manifest.as_ref().ok_or_else(|| CliError::Input("ingest needs --manifest".into()))?;
    let manifest = DatasetManifest::load(path)?;
    let window = manifest.window;
    let markets = load_markets(&manifest)?;
    let market = AlignedPanel::from_columns(
        window,
        markets.iter().map(|s| (s.jurisdiction().to_string(), s.values_on(&window))).collect(),
    )?;
    let panel = regressor_panel_from(&markets, window)?;
    let (poll_series, load) = load_poll_series(&manifest)?;
    let mut poll_cols = Vec::new();
    let mut sd_cols = Vec::new();
    for j in &manifest.jurisdictions {
        let s = poll_series.iter().find(|s| s.jurisdiction() == j);
        poll_cols.push((j.clone(), s.map_or_else(|| vec![None; window.len()], |s| s.values_on(&window))));
        sd_cols.push((j.clone(), window.days().map(|d| s.and_then(|s| s.dispersion(d))).collect()));
    }
    let polls = AlignedPanel::from_columns(window, poll_cols)?;
    let poll_sd = AlignedPanel::from_columns(window, sd_cols)?;
    let events = match &manifest.events {
        Some(p) => load_events_csv(p)?,
        None => Vec::new(),
    };
    let ing = Ingested { manifest, market, regressors: panel.panel, polls, poll_sd, events };
    write_ingest(cfg, &ing, &panel.fills, &load)?;
    info!(
        "ingest: {} market columns, {} filled regressor cells, {} poll records",
        ing.market.names().len(),
        panel.fills.total(),
        load.records.len()
    );
    Ok(ing)
}

fn write_ingest(cfg: &RunConfig, ing: &Ingested, fills: &FillReport, load: &PollLoad) -> CliResult<()> {
    let dir = cfg.stage_dir("ingest");
    let json = serde_json::to_string_pretty(&ing.manifest).map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(&dir.join("dataset.json"), format!("{json}\n").as_bytes())?;
    write_csv_with(&dir.join("market_panel.csv"), |b| write_panel_csv(&ing.market, b))?;
    write_csv_with(&dir.join("regressor_panel.csv"), |b| write_panel_csv(&ing.regressors, b))?;
    write_csv_with(&dir.join("fill_report.csv"), |b| fills.write_csv(b))?;
    write_csv_with(&dir.join("poll_panel.csv"), |b| write_panel_csv(&ing.polls, b))?;
    write_csv_with(&dir.join("poll_sd_panel.csv"), |b| write_panel_csv(&ing.poll_sd, b))?;
    write_rows(
        &dir.join("poll_summary.csv"),
        &["metric", "value"],
        [
            ("rows_read", load.rows_read),
            ("records_kept", load.records.len()),
            ("dropped_outside_window", load.dropped_outside_window),
            ("dropped_jurisdiction", load.dropped_jurisdiction),
            ("dropped_no_opponent", load.dropped_no_opponent),
        ]
        .map(|(k, v)| vec![k.to_string(), v.to_string()]),
    )?;
    write_csv_with(&dir.join("completeness.csv"), |b| bsts_core::compare::write_completeness_csv(&completeness(ing), b))?;
    write_rows(&dir.join("events.csv"), &["date", "label"], ing.events.iter().map(|e| vec![e.date.to_string(), e.label.clone()]))
}

/// Reads the files written by [`cmd_ingest`].
pub fn load_ingest(out: &Path) -> CliResult<Ingested> {
    let dir = out.join("ingest");
    let need = |name: &str| -> CliResult<PathBuf> {
        let p = dir.join(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(CliError::Input(format!("{} not found; run `bsts ingest` first", p.display())))
        }
    };
    let text = fs::read_to_string(need("dataset.json")?).map_err(|e| CliError::Input(e.to_string()))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("dataset.json: {e}")))?;
    Ok(Ingested {
        market: read_panel_csv(&need("market_panel.csv")?)?,
        regressors: read_panel_csv(&need("regressor_panel.csv")?)?,
        polls: read_panel_csv(&need("poll_panel.csv")?)?,
        poll_sd: read_panel_csv(&need("poll_sd_panel.csv")?)?,
        events: load_events_csv(&need("events.csv")?)?,
        manifest,
    })
}

/// Result of [`cmd_fit`].
#[derive(Debug, Clone)]
pub struct Fitted {
    pub draws: PosteriorDraws,
    /// Regressors by descending inclusion probability.
    pub inclusion: Vec<(String, f64)>,
}

/// Regression fit of the national market on all state markets.
pub fn cmd_fit(cfg: &RunConfig) -> CliResult<Fitted> {
    let ing = load_ingest(&cfg.out)?;
    let target = ing
        .regressors
        .series(NATIONAL, Source::Market)
        .ok_or_else(|| CliError::Input("regressor panel has no national column".into()))?;
    let states: Vec<&str> = ing.regressors.names().iter().map(String::as_str).filter(|n| *n != NATIONAL).collect();
    let regs = ing.regressors.select(&states)?;
    let priors = Priors::default_for(cfg.trend, &target.values(), states.len());
    let config = cfg.mcmc(derive_seed(cfg.seed, &format!("fit/{NATIONAL}")))?;
    let draws = run_mcmc(cfg.trend, &target, Some(&regs), &priors, &config)?;
    let inclusion = inclusion_probabilities(&draws);
    write_fit(cfg, &draws, &inclusion)?;
    info!("fit: {} draws, mean model size {:.2}", draws.len(), draws.diagnostics.mean_model_size);
    Ok(Fitted { draws, inclusion })
}

fn write_fit(cfg: &RunConfig, draws: &PosteriorDraws, inclusion: &[(String, f64)]) -> CliResult<()> {
    let dir = cfg.stage_dir("fit");
    write_rows(
        &dir.join("summary.csv"),
        &["parameter", "mean", "median", "lower", "upper", "inclusion"],
        posterior_summary(draws, 10).into_iter().map(|s| {
            vec![s.parameter, s.mean.to_string(), s.median.to_string(), s.lower.to_string(), s.upper.to_string(), opt(s.inclusion)]
        }),
    )?;
    write_rows(
        &dir.join("inclusion.csv"),
        &["regressor", "probability"],
        inclusion.iter().map(|(n, p)| vec![n.clone(), p.to_string()]),
    )?;
    let rows = fit_report(draws)?;
    write_rows(
        &dir.join("fit.csv"),
        &["date", "observed", "mean", "lower", "upper"],
        rows.iter().map(|r| {
            vec![
                r.date.map(|d| d.to_string()).unwrap_or_else(|| r.index.to_string()),
                opt(r.observed),
                r.mean.to_string(),
                r.lower.to_string(),
                r.upper.to_string(),
            ]
        }),
    )?;
    write_csv_with(&dir.join("draws.csv"), |b| write_draws_csv(draws, b))?;
    let d = &draws.diagnostics;
    let mut diag: Vec<(String, String)> = vec![
        ("trend".into(), cfg.trend.label().to_string()),
        ("chains".into(), d.chains.to_string()),
        ("iterations".into(), d.iterations.to_string()),
        ("burn_in".into(), d.burn_in.to_string()),
        ("thin".into(), d.thin.to_string()),
        ("retained".into(), draws.len().to_string()),
        ("mean_model_size".into(), d.mean_model_size.to_string()),
        ("ess_sigma2".into(), d.ess_sigma2.to_string()),
    ];
    for (name, ess) in draws.trend.component_names().iter().zip(&d.ess_state_variances) {
        diag.push((format!("ess_var_{name}"), ess.to_string()));
    }
    write_rows(&dir.join("diagnostics.csv"), &["metric", "value"], diag.into_iter().map(|(k, v)| vec![k, v]))?;
    if cfg.svg {
        if let (Some(first), Some(last)) = (rows.first().and_then(|r| r.date), rows.last().and_then(|r| r.date)) {
            let mut c = Chart::new("National market: fitted level plus regression (95% band)", first, last);
            let band: Vec<_> = rows.iter().filter_map(|r| r.date.map(|d| (d, r.lower, r.upper))).collect();
            c.band(&band, FIT_COLOR, 0.25, Some("95% band"));
            let fit: Vec<_> = rows.iter().filter_map(|r| r.date.map(|d| (d, Some(r.mean)))).collect();
            c.line(&fit, FIT_COLOR, 1.5, Some("posterior mean"));
            let obs: Vec<_> = rows.iter().filter_map(|r| Some((r.date?, r.observed?))).collect();
            c.dots(&obs, MARKET_COLOR, Some("market price"));
            write_atomic(&dir.join("fit.svg"), c.render().as_bytes())?;
        }
    }
    Ok(())
}

/// A cutoff without a forecast because the series had too little data.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub source: Source,
    pub jurisdiction: String,
    pub cutoff: DateStamp,
    pub reason: String,
}

/// Result of [`cmd_forecast`].
#[derive(Debug, Clone)]
pub struct Forecasts {
    pub results: Vec<ForecastResult>,
    pub skipped: Vec<Skipped>,
}

impl Forecasts {
    pub fn select(&self, source: Source, jurisdiction: &str) -> Vec<&ForecastResult> {
        self.results.iter().filter(|r| r.source == source && r.jurisdiction == jurisdiction).collect()
    }
}

/// Rolling forecasts for both sources in every selected jurisdiction.
pub fn cmd_forecast(cfg: &RunConfig) -> CliResult<Forecasts> {
    let ing = load_ingest(&cfg.out)?;
    cfg.validate_cutoffs(ing.manifest.election)?;
    let jurisdictions = ing.jurisdictions(cfg)?;
    let mut tasks = Vec::new();
    for j in &jurisdictions {
        match ing.market_series(j) {
            Some(s) => tasks.push(s),
            None => return Err(CliError::Input(format!("no market column for `{j}`"))),
        }
        match ing.poll_series(j) {
            Some(s) => tasks.push(s),
            None => warn!("{j}: no polls in the window; poll forecasts skipped"),
        }
    }
    let outcomes: Vec<CliResult<(Vec<ForecastResult>, Vec<Skipped>)>> = tasks
        .par_iter()
        .map(|series| {
            let label = format!("{}/{}", series.source(), series.jurisdiction());
            let config = cfg.mcmc(derive_seed(cfg.seed, &label))?;
            let each = rolling_forecast_each(series, &cfg.cutoffs, ing.manifest.election, cfg.trend, None, &config)?;
            let mut ok = Vec::new();
            let mut skipped = Vec::new();
            for (cutoff, r) in cfg.cutoffs.iter().zip(each) {
                match r {
                    Ok(f) => ok.push(f),
                    Err(e) if e.is_insufficient_data() => {
                        warn!("{label}: cutoff {cutoff} skipped: {e}");
                        skipped.push(Skipped {
                            source: series.source(),
                            jurisdiction: series.jurisdiction().to_string(),
                            cutoff: *cutoff,
                            reason: e.to_string(),
                        });
                    }
                    Err(e) => return Err(CliError::from(e).context(&format!("{label} cutoff {cutoff}"))),
                }
            }
            Ok((ok, skipped))
        })
        .collect();
    let mut out = Forecasts { results: Vec::new(), skipped: Vec::new() };
    for o in outcomes {
        let (r, s) = o?;
        out.results.extend(r);
        out.skipped.extend(s);
    }
    write_forecasts(cfg, &ing, &jurisdictions, &out)?;
    Ok(out)
}

fn write_forecasts(cfg: &RunConfig, ing: &Ingested, jurisdictions: &[String], f: &Forecasts) -> CliResult<()> {
    let dir = cfg.stage_dir("forecast");
    for j in jurisdictions {
        let mine: Vec<ForecastResult> = f.results.iter().filter(|r| &r.jurisdiction == j).cloned().collect();
        write_csv_with(&dir.join(format!("forecast_{j}.csv")), |b| write_forecast_csv(&mine, b))?;
        if cfg.svg {
            write_atomic(&dir.join(format!("fan_{j}.svg")), fan_chart(ing, j, &mine).as_bytes())?;
        }
    }
    write_rows(
        &dir.join("skipped.csv"),
        &["source", "jurisdiction", "cutoff", "reason"],
        f.skipped.iter().map(|s| vec![s.source.to_string(), s.jurisdiction.clone(), s.cutoff.to_string(), s.reason.clone()]),
    )
}

fn fan_chart(ing: &Ingested, jurisdiction: &str, results: &[ForecastResult]) -> String {
    let w = ing.window();
    let title = format!("{}: rolling forecasts to election day (95% bands)", bsts_core::ingest::display_name(jurisdiction));
    let mut c = Chart::new(&title, w.start, ing.manifest.election.max(w.end));
    for (source, color) in [(Source::Market, MARKET_COLOR), (Source::Polls, POLL_COLOR)] {
        let mut labelled = false;
        for r in results.iter().filter(|r| r.source == source) {
            let band: Vec<_> = (0..r.horizon())
                .map(|h| {
                    let q = r.reported_quantiles(h);
                    (r.dates[h], q[0], q[4])
                })
                .collect();
            let label = format!("{source} 95% band");
            c.band(&band, color, 0.12, (!labelled).then_some(label.as_str()));
            let mean: Vec<_> = (0..r.horizon()).map(|h| (r.dates[h], Some(r.reported_mean(h)))).collect();
            c.line(&mean, color, 1.0, None);
            labelled = true;
        }
    }
    for cutoff in results.iter().map(|r| r.cutoff).collect::<std::collections::BTreeSet<_>>() {
        c.vertical_marker(cutoff, "#777");
    }
    if let Some(s) = ing.market_series(jurisdiction) {
        c.line(&s.entries().collect::<Vec<_>>(), MARKET_COLOR, 1.2, Some("market price"));
    }
    if let Some(s) = ing.poll_series(jurisdiction) {
        let pts: Vec<_> = s.entries().filter_map(|(d, v)| Some((d, v?))).collect();
        c.dots(&pts, POLL_COLOR, Some("daily poll mean"));
    }
    c.render()
}

/// Reads forecast tables written by [`cmd_forecast`].
pub fn load_forecasts(cfg: &RunConfig, jurisdictions: &[String]) -> CliResult<Vec<ForecastResult>> {
    let dir = cfg.stage_dir("forecast");
    let mut all = Vec::new();
    for j in jurisdictions {
        let p = dir.join(format!("forecast_{j}.csv"));
        if !p.exists() {
            return Err(CliError::Input(format!("{} not found; run `bsts forecast` first", p.display())));
        }
        all.extend(read_forecast_csv(&p)?);
    }
    Ok(all)
}

/// Poll mean with a ±1 SD ribbon: the day's spread across polls, or the
/// pooled within-day SD on single-poll days.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayRow {
    pub date: DateStamp,
    pub market: Option<f64>,
    pub poll_mean: Option<f64>,
    pub poll_sd: Option<f64>,
    pub pooled: bool,
}

pub fn overlay(ing: &Ingested, jurisdiction: &str) -> Vec<OverlayRow> {
    let market = ing.market.column(jurisdiction);
    let polls = ing.polls.column(jurisdiction);
    let sds = ing.poll_sd.column(jurisdiction);
    let day_sd: Vec<f64> = sds.map(|c| c.iter().flatten().copied().collect()).unwrap_or_default();
    let pooled = if day_sd.is_empty() {
        let vals: Vec<f64> = polls.map(|c| c.iter().flatten().copied().collect()).unwrap_or_default();
        sample_sd(&vals)
    } else {
        Some((day_sd.iter().map(|s| s * s).sum::<f64>() / day_sd.len() as f64).sqrt())
    };
    ing.window()
        .days()
        .enumerate()
        .map(|(i, date)| {
            let poll_mean = polls.and_then(|c| c[i]);
            let own = sds.and_then(|c| c[i]);
            let poll_sd = poll_mean.and(own.or(pooled));
            OverlayRow { date, market: market.and_then(|c| c[i]), poll_mean, poll_sd, pooled: poll_mean.is_some() && own.is_none() }
        })
        .collect()
}

fn sample_sd(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    Some((v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
}

/// Decision calls, divergence dates, event reactivity and completeness.
pub fn cmd_compare(cfg: &RunConfig) -> CliResult<ComparisonReport> {
    let ing = load_ingest(&cfg.out)?;
    let jurisdictions = ing.jurisdictions(cfg)?;
    let forecasts = load_forecasts(cfg, &jurisdictions)?;
    let (market, polls): (Vec<ForecastResult>, Vec<ForecastResult>) =
        forecasts.into_iter().partition(|f| f.source == Source::Market);
    let mut reactivity = Vec::new();
    for j in &jurisdictions {
        for s in [ing.market_series(j), ing.poll_series(j)].into_iter().flatten() {
            reactivity.extend(event_reactivity(&s, &ing.events, DEFAULT_REACTIVITY_WINDOW)?);
        }
    }
    let report =
        ComparisonReport::build(ing.window(), DEFAULT_BOUNDARY, &market, &polls, reactivity, completeness(&ing))?;
    write_compare(cfg, &ing, &jurisdictions, &report)?;
    for j in &report.jurisdictions {
        info!("{}: divergence {}", j.jurisdiction, j.divergence.map(|d| d.to_string()).unwrap_or("none".into()));
    }
    Ok(report)
}

fn write_compare(cfg: &RunConfig, ing: &Ingested, jurisdictions: &[String], report: &ComparisonReport) -> CliResult<()> {
    let dir = cfg.stage_dir("compare");
    let json = serde_json::to_string_pretty(report).map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(&dir.join("report.json"), format!("{json}\n").as_bytes())?;
    write_csv_with(&dir.join("calls.csv"), |b| report.write_calls_csv(b))?;
    write_csv_with(&dir.join("divergence.csv"), |b| report.write_divergence_csv(b))?;
    write_csv_with(&dir.join("reactivity.csv"), |b| report.write_reactivity_csv(b))?;
    write_csv_with(&dir.join("completeness.csv"), |b| report.write_completeness_csv(b))?;
    for j in jurisdictions {
        let rows = overlay(ing, j);
        write_rows(
            &dir.join(format!("overlay_{j}.csv")),
            &["date", "market", "poll_mean", "poll_sd", "sd_basis"],
            rows.iter().map(|r| {
                let basis = match (r.poll_sd, r.pooled) {
                    (None, _) => "",
                    (Some(_), true) => "pooled",
                    (Some(_), false) => "day",
                };
                vec![r.date.to_string(), opt(r.market), opt(r.poll_mean), opt(r.poll_sd), basis.to_string()]
            }),
        )?;
        if cfg.svg {
            let w = ing.window();
            let title = format!("{}: market price vs polls (±1 SD)", bsts_core::ingest::display_name(j));
            let mut c = Chart::new(&title, w.start, w.end);
            let ribbon: Vec<_> =
                rows.iter().filter_map(|r| Some((r.date, r.poll_mean? - r.poll_sd?, r.poll_mean? + r.poll_sd?))).collect();
            c.band(&ribbon, POLL_COLOR, 0.18, Some("poll ±1 SD"));
            let pm: Vec<_> = rows.iter().filter_map(|r| Some((r.date, r.poll_mean?))).collect();
            c.dots(&pm, POLL_COLOR, Some("daily poll mean"));
            let mk: Vec<_> = rows.iter().map(|r| (r.date, r.market)).collect();
            c.line(&mk, MARKET_COLOR, 1.4, Some("market price"));
            for e in &ing.events {
                if w.contains(e.date) {
                    c.vertical_marker(e.date, "#555");
                }
            }
            write_atomic(&dir.join(format!("overlay_{j}.svg")), c.render().as_bytes())?;
        }
    }
    Ok(())
}

/// All four stages in order.
pub fn cmd_run(cfg: &RunConfig) -> CliResult<(Fitted, Forecasts, ComparisonReport)> {
    let ing = cmd_ingest(cfg)?;
    cfg.validate_cutoffs(ing.manifest.election)?;
    ing.jurisdictions(cfg)?;
    let fitted = cmd_fit(cfg)?;
    let forecasts = cmd_forecast(cfg)?;
    let report = cmd_compare(cfg)?;
    Ok((fitted, forecasts, report))
}
