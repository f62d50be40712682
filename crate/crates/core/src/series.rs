//! Date-indexed daily series, same-day poll aggregation and date alignment.
//!
//! Missing observations are explicit (`None`) at this layer and are never
//! imputed; the state-space filter consumes them directly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar date with no time-of-day component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DateStamp(NaiveDate);

impl DateStamp {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(DateStamp)
            .ok_or_else(|| Error::InvalidDate(format!("{year:04}-{month:02}-{day:02}")))
    }

    /// Parses `YYYY-MM-DD`, or the `M/D/YY` / `M/D/YYYY` form used by poll exports.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(DateStamp(d));
        }
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() == 3 {
            let month = parts[0].parse::<u32>();
            let day = parts[1].parse::<u32>();
            let year = parts[2].parse::<i32>();
            if let (Ok(m), Ok(d), Ok(y)) = (month, day, year) {
                let y = match parts[2].len() {
                    2 => 2000 + y,
                    4 => y,
                    _ => return Err(Error::InvalidDate(s.to_string())),
                };
                return Self::from_ymd(y, m, d).map_err(|_| Error::InvalidDate(s.to_string()));
            }
        }
        Err(Error::InvalidDate(s.to_string()))
    }

    pub fn year(&self) -> i32 {
        self.0.year()
    }

    pub fn month(&self) -> u32 {
        self.0.month()
    }

    pub fn day(&self) -> u32 {
        self.0.day()
    }

    /// Whole days from `self` to `later` (negative if `later` is earlier).
    pub fn days_until(&self, later: DateStamp) -> i64 {
        (later.0 - self.0).num_days()
    }

    pub fn add_days(&self, days: i64) -> DateStamp {
        DateStamp(self.0 + Duration::days(days))
    }

    pub fn succ(&self) -> DateStamp {
        self.add_days(1)
    }

    pub fn pred(&self) -> DateStamp {
        self.add_days(-1)
    }
}

impl fmt::Display for DateStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl FromStr for DateStamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DateStamp::parse(s)
    }
}

impl TryFrom<String> for DateStamp {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        DateStamp::parse(&s)
    }
}

impl From<DateStamp> for String {
    fn from(d: DateStamp) -> String {
        d.to_string()
    }
}

/// Closed, contiguous range of days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: DateStamp,
    pub end: DateStamp,
}

impl DateRange {
    pub fn new(start: DateStamp, end: DateStamp) -> Result<Self> {
        if end < start {
            return Err(Error::Input(format!("date range end {end} precedes start {start}")));
        }
        Ok(DateRange { start, end })
    }

    pub fn contains(&self, d: DateStamp) -> bool {
        self.start <= d && d <= self.end
    }

    pub fn len(&self) -> usize {
        (self.start.days_until(self.end) + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn days(&self) -> impl Iterator<Item = DateStamp> + '_ {
        (0..self.len() as i64).map(move |i| self.start.add_days(i))
    }
}

/// Where a series came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Market,
    Polls,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Market => "market",
            Source::Polls => "polls",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "market" => Ok(Source::Market),
            "polls" | "poll" => Ok(Source::Polls),
            other => Err(Error::Input(format!("unknown source `{other}`"))),
        }
    }
}

/// A univariate daily series for one jurisdiction.
///
/// Entries cover a contiguous span of days; days without an observation
/// hold `None`. Every present value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    jurisdiction: String,
    source: Source,
    entries: BTreeMap<DateStamp, Option<f64>>,
    dispersion: BTreeMap<DateStamp, f64>,
}

fn check_unit(value: f64, what: &str) -> Result<()> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{what}: {value} is not a probability in [0, 1]")))
    }
}

impl Series {
    /// Builds a series, filling the days between the first and last entry
    /// with explicit missing markers.
    pub fn new(
        jurisdiction: impl Into<String>,
        source: Source,
        entries: BTreeMap<DateStamp, Option<f64>>,
        dispersion: BTreeMap<DateStamp, f64>,
    ) -> Result<Self> {
        let jurisdiction = jurisdiction.into();
        for (d, v) in &entries {
            if let Some(v) = v {
                check_unit(*v, &format!("{jurisdiction} {d}"))?;
            }
        }
        for (d, sd) in &dispersion {
            if !(sd.is_finite() && *sd >= 0.0) {
                return Err(Error::OutOfRange(format!("{jurisdiction} {d}: negative dispersion {sd}")));
            }
            if !matches!(entries.get(d), Some(Some(_))) {
                return Err(Error::Input(format!(
                    "{jurisdiction} {d}: dispersion given without a value"
                )));
            }
        }
        let mut filled = entries;
        if let (Some(&first), Some(&last)) = (filled.keys().next(), filled.keys().next_back()) {
            let mut d = first;
            while d < last {
                filled.entry(d).or_insert(None);
                d = d.succ();
            }
        }
        Ok(Series { jurisdiction, source, entries: filled, dispersion })
    }

    /// Convenience constructor from a start date and consecutive daily values.
    pub fn from_values(
        jurisdiction: impl Into<String>,
        source: Source,
        start: DateStamp,
        values: &[Option<f64>],
    ) -> Result<Self> {
        let entries = values
            .iter()
            .enumerate()
            .map(|(i, v)| (start.add_days(i as i64), *v))
            .collect();
        Series::new(jurisdiction, source, entries, BTreeMap::new())
    }

    pub fn jurisdiction(&self) -> &str {
        &self.jurisdiction
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn first_date(&self) -> Option<DateStamp> {
        self.entries.keys().next().copied()
    }

    pub fn last_date(&self) -> Option<DateStamp> {
        self.entries.keys().next_back().copied()
    }

    pub fn range(&self) -> Option<DateRange> {
        Some(DateRange { start: self.first_date()?, end: self.last_date()? })
    }

    /// `None` outside the series span, `Some(None)` for a missing day.
    pub fn get(&self, d: DateStamp) -> Option<Option<f64>> {
        self.entries.get(&d).copied()
    }

    pub fn value(&self, d: DateStamp) -> Option<f64> {
        self.entries.get(&d).copied().flatten()
    }

    pub fn dispersion(&self, d: DateStamp) -> Option<f64> {
        self.dispersion.get(&d).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (DateStamp, Option<f64>)> + '_ {
        self.entries.iter().map(|(d, v)| (*d, *v))
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.entries.values().copied().collect()
    }

    pub fn dates(&self) -> Vec<DateStamp> {
        self.entries.keys().copied().collect()
    }

    pub fn present_count(&self) -> usize {
        self.entries.values().filter(|v| v.is_some()).count()
    }

    pub fn first_present_date(&self) -> Option<DateStamp> {
        self.entries.iter().find(|(_, v)| v.is_some()).map(|(d, _)| *d)
    }

    /// Values on an arbitrary axis, missing where the series has no data.
    pub fn values_on(&self, axis: &DateRange) -> Vec<Option<f64>> {
        axis.days().map(|d| self.value(d)).collect()
    }

    /// Restricts the series to dates inside `range` (inclusive).
    pub fn restrict(&self, range: &DateRange) -> Series {
        let entries = self
            .entries
            .range(range.start..=range.end)
            .map(|(d, v)| (*d, *v))
            .collect();
        let dispersion = self
            .dispersion
            .range(range.start..=range.end)
            .map(|(d, v)| (*d, *v))
            .collect();
        Series {
            jurisdiction: self.jurisdiction.clone(),
            source: self.source,
            entries,
            dispersion,
        }
    }
}

/// One poll result for the tracked candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollRecord {
    pub date: DateStamp,
    pub jurisdiction: String,
    pub pollster: String,
    pub value: f64,
}

impl PollRecord {
    pub fn new(
        date: DateStamp,
        jurisdiction: impl Into<String>,
        pollster: impl Into<String>,
        value: f64,
    ) -> Result<Self> {
        let jurisdiction = jurisdiction.into();
        check_unit(value, &format!("poll {jurisdiction} {date}"))?;
        Ok(PollRecord { date, jurisdiction, pollster: pollster.into(), value })
    }
}

/// Collapses same-day polls to their mean, with the sample (n - 1) standard
/// deviation as dispersion when a day has at least two polls.
pub fn aggregate_same_day(records: &[PollRecord]) -> Result<Series> {
    let first = records.first().ok_or(Error::EmptySeries)?;
    let jurisdiction = &first.jurisdiction;
    let mut by_day: BTreeMap<DateStamp, Vec<f64>> = BTreeMap::new();
    for r in records {
        if &r.jurisdiction != jurisdiction {
            return Err(Error::Input(format!(
                "mixed jurisdictions in poll aggregation: `{jurisdiction}` and `{}`",
                r.jurisdiction
            )));
        }
        check_unit(r.value, &format!("poll {} {}", r.jurisdiction, r.date))?;
        by_day.entry(r.date).or_default().push(r.value);
    }

    let mut entries = BTreeMap::new();
    let mut dispersion = BTreeMap::new();
    for (d, mut vals) in by_day {
        // Sorting makes the floating-point sums independent of record order.
        vals.sort_by(f64::total_cmp);
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        entries.insert(d, Some(mean.clamp(vals[0], vals[vals.len() - 1])));
        if vals.len() >= 2 {
            let ss: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum();
            dispersion.insert(d, (ss / (n - 1.0)).sqrt());
        }
    }
    Series::new(jurisdiction.clone(), Source::Polls, entries, dispersion)
}

/// Several series re-indexed onto one contiguous daily axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPanel {
    axis: DateRange,
    names: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
}

impl AlignedPanel {
    /// Builds a panel from raw columns; every column must span the axis.
    pub fn from_columns(axis: DateRange, columns: Vec<(String, Vec<Option<f64>>)>) -> Result<Self> {
        let mut names = Vec::with_capacity(columns.len());
        let mut cols = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            if col.len() != axis.len() {
                return Err(Error::Dimension(format!(
                    "column `{name}` has {} rows, axis has {}",
                    col.len(),
                    axis.len()
                )));
            }
            if names.contains(&name) {
                return Err(Error::Input(format!("duplicate panel column `{name}`")));
            }
            names.push(name);
            cols.push(col);
        }
        Ok(AlignedPanel { axis, names, columns: cols })
    }

    pub fn axis(&self) -> DateRange {
        self.axis
    }

    pub fn dates(&self) -> Vec<DateStamp> {
        self.axis.days().collect()
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &[Option<f64>])> {
        self.names.iter().map(String::as_str).zip(self.columns.iter().map(Vec::as_slice))
    }

    /// `None` if the column or date is unknown, `Some(None)` for a missing cell.
    pub fn get(&self, name: &str, d: DateStamp) -> Option<Option<f64>> {
        if !self.axis.contains(d) {
            return None;
        }
        let idx = self.axis.start.days_until(d) as usize;
        self.column(name).map(|c| c[idx])
    }

    /// Column as a series labelled with `source`.
    pub fn series(&self, name: &str, source: Source) -> Option<Series> {
        let col = self.column(name)?;
        Series::from_values(name, source, self.axis.start, col).ok()
    }

    /// Panel with a subset of columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<AlignedPanel> {
        let mut cols = Vec::with_capacity(names.len());
        for n in names {
            let c = self
                .column(n)
                .ok_or_else(|| Error::Input(format!("panel has no column `{n}`")))?;
            cols.push((n.to_string(), c.to_vec()));
        }
        AlignedPanel::from_columns(self.axis, cols)
    }

    /// Panel restricted to a sub-range of its axis.
    pub fn restrict(&self, range: &DateRange) -> Result<AlignedPanel> {
        if !self.axis.contains(range.start) || !self.axis.contains(range.end) {
            return Err(Error::Input(format!(
                "range {}..{} is outside the panel axis",
                range.start, range.end
            )));
        }
        let lo = self.axis.start.days_until(range.start) as usize;
        let hi = lo + range.len();
        let cols = self
            .names
            .iter()
            .zip(&self.columns)
            .map(|(n, c)| (n.clone(), c[lo..hi].to_vec()))
            .collect();
        AlignedPanel::from_columns(*range, cols)
    }
}

/// Re-indexes series onto a shared contiguous daily axis. The axis is the
/// union of the inputs' spans unless `range` is supplied. No interpolation.
pub fn align_by_date(series: &[Series], range: Option<DateRange>) -> Result<AlignedPanel> {
    if series.is_empty() {
        return Err(Error::Input("no series to align".into()));
    }
    let axis = match range {
        Some(r) => r,
        None => {
            let start = series.iter().filter_map(Series::first_date).min();
            let end = series.iter().filter_map(Series::last_date).max();
            match (start, end) {
                (Some(s), Some(e)) => DateRange { start: s, end: e },
                _ => return Err(Error::EmptySeries),
            }
        }
    };
    let columns = series
        .iter()
        .map(|s| (s.jurisdiction().to_string(), s.values_on(&axis)))
        .collect();
    AlignedPanel::from_columns(axis, columns)
}
