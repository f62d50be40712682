//! Head-to-head comparison of market and poll forecasts.
//!
//! All interval logic runs on reported (clamped) election-day bands.

use std::collections::BTreeSet;
use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ForecastResult;
use crate::series::{AlignedPanel, DateRange, DateStamp, Series, Source};

pub const DEFAULT_BOUNDARY: f64 = 0.5;
pub const DEFAULT_REACTIVITY_WINDOW: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Winner {
    Candidate,
    Opponent,
    TooClose,
}

impl Winner {
    pub fn as_str(&self) -> &'static str {
        match self {
            Winner::Candidate => "candidate",
            Winner::Opponent => "opponent",
            Winner::TooClose => "too-close",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CallBasis {
    MeanOnly,
    FullInterval,
}

impl CallBasis {
    pub fn as_str(&self) -> &'static str {
        match self {
            CallBasis::MeanOnly => "mean-only",
            CallBasis::FullInterval => "full-interval",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionCall {
    pub source: Source,
    pub jurisdiction: String,
    pub cutoff: DateStamp,
    pub winner: Winner,
    pub basis: CallBasis,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Candidate iff the whole band lies above the boundary, opponent iff it
/// lies below.
pub fn call_from_interval(lower: f64, upper: f64, boundary: f64) -> Winner {
    if lower > boundary {
        Winner::Candidate
    } else if upper < boundary {
        Winner::Opponent
    } else {
        Winner::TooClose
    }
}

pub fn call_from_mean(mean: f64, boundary: f64) -> Winner {
    call_from_interval(mean, mean, boundary)
}

/// Mean-only and full-interval calls for every forecast, in input order.
pub fn decision_calls(forecasts: &[ForecastResult], boundary: f64) -> Vec<DecisionCall> {
    let mut out = Vec::with_capacity(2 * forecasts.len());
    for f in forecasts {
        let h = f.horizon() - 1;
        let mean = f.reported_mean(h);
        let (lower, upper) = f.election_band();
        for (basis, winner) in [
            (CallBasis::MeanOnly, call_from_mean(mean, boundary)),
            (CallBasis::FullInterval, call_from_interval(lower, upper, boundary)),
        ] {
            out.push(DecisionCall {
                source: f.source,
                jurisdiction: f.jurisdiction.clone(),
                cutoff: f.cutoff,
                winner,
                basis,
                mean,
                lower,
                upper,
            });
        }
    }
    out
}

fn disjoint(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 > b.1 || b.0 > a.1
}

fn for_jurisdiction<'a>(fs: &'a [ForecastResult], jurisdiction: &str) -> Vec<&'a ForecastResult> {
    let mut v: Vec<&ForecastResult> = fs.iter().filter(|f| f.jurisdiction == jurisdiction).collect();
    v.sort_by_key(|f| f.cutoff);
    v
}

/// Earliest cutoff from which the two sources' election-day 95% bands are
/// disjoint at that cutoff and every later one.
pub fn divergence_date(
    market: &[ForecastResult],
    polls: &[ForecastResult],
    jurisdiction: &str,
) -> Result<Option<DateStamp>> {
    let m = for_jurisdiction(market, jurisdiction);
    let p = for_jurisdiction(polls, jurisdiction);
    let mc: Vec<DateStamp> = m.iter().map(|f| f.cutoff).collect();
    let pc: Vec<DateStamp> = p.iter().map(|f| f.cutoff).collect();
    if mc != pc {
        return Err(Error::Input(format!(
            "{jurisdiction}: cutoff schedules differ between sources ({} vs {} cutoffs)",
            mc.len(),
            pc.len()
        )));
    }
    let mut first = None;
    for (a, b) in m.iter().zip(&p).rev() {
        if !disjoint(a.election_band(), b.election_band()) {
            break;
        }
        first = Some(a.cutoff);
    }
    Ok(first)
}

/// Both sources' forecasts for `jurisdiction`, restricted to the cutoffs they
/// share.
fn common_cutoffs(
    market: &[ForecastResult],
    polls: &[ForecastResult],
    jurisdiction: &str,
) -> (Vec<ForecastResult>, Vec<ForecastResult>) {
    let m = for_jurisdiction(market, jurisdiction);
    let p = for_jurisdiction(polls, jurisdiction);
    let shared: BTreeSet<DateStamp> =
        m.iter().map(|f| f.cutoff).filter(|c| p.iter().any(|g| g.cutoff == *c)).collect();
    if shared.len() != m.len() || shared.len() != p.len() {
        warn!(
            "{jurisdiction}: divergence uses the {} cutoffs both sources cover ({} market, {} poll)",
            shared.len(),
            m.len(),
            p.len()
        );
    }
    let keep = |v: Vec<&ForecastResult>| v.into_iter().filter(|f| shared.contains(&f.cutoff)).cloned().collect();
    (keep(m), keep(p))
}

/// A dated event to measure reactions around.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub date: DateStamp,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reactivity {
    pub jurisdiction: String,
    pub source: Source,
    pub event: String,
    pub date: DateStamp,
    pub window: usize,
    pub before: Option<f64>,
    pub after: Option<f64>,
    /// `after - before`; absent when the window leaves the series or a side
    /// has no data.
    pub delta: Option<f64>,
}

fn mean_present(series: &Series, from: DateStamp, to: DateStamp) -> Option<f64> {
    let vals: Vec<f64> = DateRange::new(from, to).ok()?.days().filter_map(|d| series.value(d)).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Mean over the `window` days after each event minus the mean over the
/// `window` days before it. The event day itself is in neither side.
pub fn event_reactivity(series: &Series, events: &[Event], window: usize) -> Result<Vec<Reactivity>> {
    if window == 0 {
        return Err(Error::Input("reactivity window must be at least one day".into()));
    }
    let range = series.range();
    let w = window as i64;
    Ok(events
        .iter()
        .map(|e| {
            let inside = range.is_some_and(|r| r.contains(e.date.add_days(-w)) && r.contains(e.date.add_days(w)));
            let (before, after) = if inside {
                (
                    mean_present(series, e.date.add_days(-w), e.date.pred()),
                    mean_present(series, e.date.succ(), e.date.add_days(w)),
                )
            } else {
                (None, None)
            };
            Reactivity {
                jurisdiction: series.jurisdiction().to_string(),
                source: series.source(),
                event: e.label.clone(),
                date: e.date,
                window,
                before,
                after,
                delta: before.zip(after).map(|(b, a)| a - b),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Completeness {
    pub column: String,
    pub days: usize,
    pub missing: usize,
    pub fraction_missing: f64,
}

/// Missing-day counts per panel column over `range` (the whole axis when
/// absent). A range disjoint from the axis yields zero counts.
pub fn completeness_stats(panel: &AlignedPanel, range: Option<DateRange>) -> Vec<Completeness> {
    let axis = panel.axis();
    let (lo, hi) = match range {
        None => (axis.start, axis.end),
        Some(r) => (r.start.max(axis.start), r.end.min(axis.end)),
    };
    let (start, len) = if lo > hi { (0, 0) } else { (axis.start.days_until(lo) as usize, lo.days_until(hi) as usize + 1) };
    panel
        .columns()
        .map(|(name, col)| {
            let missing = col[start..start + len].iter().filter(|v| v.is_none()).count();
            Completeness {
                column: name.to_string(),
                days: len,
                missing,
                fraction_missing: if len == 0 { 0.0 } else { missing as f64 / len as f64 },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JurisdictionComparison {
    pub jurisdiction: String,
    pub calls: Vec<DecisionCall>,
    pub divergence: Option<DateStamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub window: DateRange,
    pub boundary: f64,
    pub jurisdictions: Vec<JurisdictionComparison>,
    pub reactivity: Vec<Reactivity>,
    pub completeness: Vec<Completeness>,
}

impl ComparisonReport {
    /// Calls and divergence for every jurisdiction present in either source,
    /// in sorted order.
    pub fn build(
        window: DateRange,
        boundary: f64,
        market: &[ForecastResult],
        polls: &[ForecastResult],
        reactivity: Vec<Reactivity>,
        completeness: Vec<Completeness>,
    ) -> Result<Self> {
        let names: BTreeSet<&str> = market.iter().chain(polls).map(|f| f.jurisdiction.as_str()).collect();
        let mut jurisdictions = Vec::with_capacity(names.len());
        for name in names {
            let mut calls = decision_calls(&for_jurisdiction(market, name).into_iter().cloned().collect::<Vec<_>>(), boundary);
            calls.extend(decision_calls(&for_jurisdiction(polls, name).into_iter().cloned().collect::<Vec<_>>(), boundary));
            let (m, p) = common_cutoffs(market, polls, name);
            let divergence = if m.is_empty() { None } else { divergence_date(&m, &p, name)? };
            if let Some(d) = divergence {
                if !window.contains(d) {
                    return Err(Error::OutOfRange(format!("{name}: divergence date {d} outside the analysis window")));
                }
            }
            jurisdictions.push(JurisdictionComparison { jurisdiction: name.to_string(), calls, divergence });
        }
        Ok(ComparisonReport { window, boundary, jurisdictions, reactivity, completeness })
    }

    pub fn jurisdiction(&self, name: &str) -> Option<&JurisdictionComparison> {
        self.jurisdictions.iter().find(|j| j.jurisdiction == name)
    }

    /// `source,jurisdiction,cutoff,basis,winner,mean,lower,upper`
    pub fn write_calls_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["source", "jurisdiction", "cutoff", "basis", "winner", "mean", "lower", "upper"])?;
        for c in self.jurisdictions.iter().flat_map(|j| &j.calls) {
            wtr.write_record([
                c.source.as_str(),
                &c.jurisdiction,
                &c.cutoff.to_string(),
                c.basis.as_str(),
                c.winner.as_str(),
                &c.mean.to_string(),
                &c.lower.to_string(),
                &c.upper.to_string(),
            ])?;
        }
        wtr.flush()
    }

    /// `jurisdiction,divergence` (empty when the sources never separate).
    pub fn write_divergence_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["jurisdiction", "divergence"])?;
        for j in &self.jurisdictions {
            wtr.write_record([j.jurisdiction.clone(), j.divergence.map(|d| d.to_string()).unwrap_or_default()])?;
        }
        wtr.flush()
    }

    /// `jurisdiction,source,event,date,window,before,after,delta`
    pub fn write_reactivity_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["jurisdiction", "source", "event", "date", "window", "before", "after", "delta"])?;
        for r in &self.reactivity {
            wtr.write_record([
                r.jurisdiction.clone(),
                r.source.to_string(),
                r.event.clone(),
                r.date.to_string(),
                r.window.to_string(),
                opt(r.before),
                opt(r.after),
                opt(r.delta),
            ])?;
        }
        wtr.flush()
    }

    /// `column,days,missing,fraction_missing`
    pub fn write_completeness_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_completeness_csv(&self.completeness, w)
    }
}

pub fn write_completeness_csv<W: Write>(rows: &[Completeness], w: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["column", "days", "missing", "fraction_missing"])?;
    for c in rows {
        wtr.write_record([c.column.clone(), c.days.to_string(), c.missing.to_string(), c.fraction_missing.to_string()])?;
    }
    wtr.flush()
}
