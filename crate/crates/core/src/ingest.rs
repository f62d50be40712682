//! Reading market and poll exports into series and panels.
//!
//! Jurisdictions are labelled `national` or by two-letter USPS state code.
//! Poll files may name states in full; they are mapped to codes on load.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{aggregate_same_day, AlignedPanel, DateRange, DateStamp, PollRecord, Series, Source};

pub const NATIONAL: &str = "national";

/// USPS code and name of each of the 50 states.
pub const STATES: [(&str, &str); 50] = [
    ("AL", "Alabama"),
    ("AK", "Alaska"),
    ("AZ", "Arizona"),
    ("AR", "Arkansas"),
    ("CA", "California"),
    ("CO", "Colorado"),
    ("CT", "Connecticut"),
    ("DE", "Delaware"),
    ("FL", "Florida"),
    ("GA", "Georgia"),
    ("HI", "Hawaii"),
    ("ID", "Idaho"),
    ("IL", "Illinois"),
    ("IN", "Indiana"),
    ("IA", "Iowa"),
    ("KS", "Kansas"),
    ("KY", "Kentucky"),
    ("LA", "Louisiana"),
    ("ME", "Maine"),
    ("MD", "Maryland"),
    ("MA", "Massachusetts"),
    ("MI", "Michigan"),
    ("MN", "Minnesota"),
    ("MS", "Mississippi"),
    ("MO", "Missouri"),
    ("MT", "Montana"),
    ("NE", "Nebraska"),
    ("NV", "Nevada"),
    ("NH", "New Hampshire"),
    ("NJ", "New Jersey"),
    ("NM", "New Mexico"),
    ("NY", "New York"),
    ("NC", "North Carolina"),
    ("ND", "North Dakota"),
    ("OH", "Ohio"),
    ("OK", "Oklahoma"),
    ("OR", "Oregon"),
    ("PA", "Pennsylvania"),
    ("RI", "Rhode Island"),
    ("SC", "South Carolina"),
    ("SD", "South Dakota"),
    ("TN", "Tennessee"),
    ("TX", "Texas"),
    ("UT", "Utah"),
    ("VT", "Vermont"),
    ("VA", "Virginia"),
    ("WA", "Washington"),
    ("WV", "West Virginia"),
    ("WI", "Wisconsin"),
    ("WY", "Wyoming"),
];

pub const SWING_STATES: [&str; 7] = ["AZ", "GA", "NC", "PA", "MI", "NV", "WI"];

/// State name for a code, or the label itself for anything else.
pub fn display_name(label: &str) -> &str {
    STATES.iter().find(|(c, _)| *c == label).map_or(label, |(_, n)| n)
}

/// Code for a state given by code or full name (case-insensitive).
pub fn state_code(s: &str) -> Option<&'static str> {
    let s = s.trim();
    STATES
        .iter()
        .find(|(c, n)| c.eq_ignore_ascii_case(s) || n.eq_ignore_ascii_case(s))
        .map(|(c, _)| *c)
}

fn default_jurisdictions() -> Vec<String> {
    std::iter::once(NATIONAL.to_string()).chain(STATES.iter().map(|(c, _)| c.to_string())).collect()
}

fn default_swing() -> Vec<String> {
    SWING_STATES.iter().map(|s| s.to_string()).collect()
}

fn default_election() -> DateStamp {
    DateStamp::from_ymd(2024, 11, 5).expect("valid constant")
}

fn default_window() -> DateRange {
    DateRange::new(DateStamp::from_ymd(2024, 4, 1).expect("valid"), default_election()).expect("ordered")
}

fn comma() -> char {
    ','
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Tracked candidate's share as reported.
    #[default]
    Raw,
    /// Tracked candidate / (tracked + main opponent), per poll question.
    TwoWay,
}

/// Layout of a market price file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketFormat {
    pub date_column: String,
    pub price_column: String,
    pub delimiter: char,
}

impl Default for MarketFormat {
    fn default() -> Self {
        MarketFormat { date_column: "date".into(), price_column: "price".into(), delimiter: comma() }
    }
}

/// Layout of a poll export, one row per (question, candidate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PollFormat {
    pub date_column: String,
    pub state_column: String,
    pub pollster_column: String,
    pub question_column: String,
    pub candidate_column: String,
    pub share_column: String,
    /// Divisor turning the share column into a fraction (100 for percent).
    pub share_scale: f64,
    pub candidate: String,
    /// Opponents in priority order for two-way normalization.
    pub opponents: Vec<String>,
    pub delimiter: char,
}

impl Default for PollFormat {
    fn default() -> Self {
        PollFormat {
            date_column: "end_date".into(),
            state_column: "state".into(),
            pollster_column: "pollster".into(),
            question_column: "question_id".into(),
            candidate_column: "candidate_name".into(),
            share_column: "pct".into(),
            share_scale: 100.0,
            candidate: "Donald Trump".into(),
            opponents: vec!["Kamala Harris".into(), "Joe Biden".into()],
            delimiter: comma(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    /// Directory holding `<jurisdiction>.csv` files.
    pub dir: PathBuf,
    /// Per-jurisdiction overrides of the file path.
    #[serde(default)]
    pub files: BTreeMap<String, PathBuf>,
    #[serde(default, flatten)]
    pub format: MarketFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PollSection {
    pub path: PathBuf,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default, flatten)]
    pub format: PollFormat,
}

/// Dataset description, read from TOML. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default = "default_election")]
    pub election: DateStamp,
    #[serde(default = "default_window")]
    pub window: DateRange,
    #[serde(default = "default_jurisdictions")]
    pub jurisdictions: Vec<String>,
    #[serde(default = "default_swing")]
    pub swing_states: Vec<String>,
    pub market: MarketSection,
    pub polls: PollSection,
    #[serde(default)]
    pub events: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest =
            toml::from_str(&text).map_err(|e| Error::Config { path: path.into(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve(base);
        m.validate().map_err(|e| Error::Config { path: path.into(), message: e.to_string() })?;
        Ok(m)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.market.dir);
        self.market.files.values_mut().for_each(fix);
        fix(&mut self.polls.path);
        if let Some(e) = self.events.as_mut() {
            fix(e);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.jurisdictions.iter().any(|j| j == NATIONAL) {
            return Err(Error::Input(format!("jurisdiction list must include `{NATIONAL}`")));
        }
        for j in &self.jurisdictions {
            if j != NATIONAL && state_code(j) != Some(j.as_str()) {
                return Err(Error::Input(format!("unknown jurisdiction `{j}` (use two-letter state codes)")));
            }
        }
        if let Some(s) = self.swing_states.iter().find(|s| !self.jurisdictions.contains(s)) {
            return Err(Error::Input(format!("swing state `{s}` is not in the jurisdiction list")));
        }
        if self.window.start > self.window.end {
            return Err(Error::Input("analysis window ends before it starts".into()));
        }
        if !(self.window.contains(self.election)) {
            return Err(Error::Input(format!(
                "election date {} lies outside the analysis window {}..{}",
                self.election, self.window.start, self.window.end
            )));
        }
        if self.polls.format.share_scale.is_nan() || self.polls.format.share_scale <= 0.0 {
            return Err(Error::Input("poll share_scale must be > 0".into()));
        }
        Ok(())
    }

    pub fn states(&self) -> impl Iterator<Item = &str> {
        self.jurisdictions.iter().map(String::as_str).filter(|j| *j != NATIONAL)
    }

    pub fn market_path(&self, jurisdiction: &str) -> PathBuf {
        self.market
            .files
            .get(jurisdiction)
            .cloned()
            .unwrap_or_else(|| self.market.dir.join(format!("{jurisdiction}.csv")))
    }
}

fn reader_from(path: &Path, delimiter: char) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().delimiter(delimiter as u8).trim(csv::Trim::All).from_reader(file))
}

fn column_index(headers: &csv::StringRecord, path: &Path, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn { path: path.into(), column: name.into() })
}

fn row_error(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Row { path: path.into(), row, message: message.into() }
}

/// [`load_market_csv_with`] using the default `date,price` layout.
pub fn load_market_csv(path: &Path, jurisdiction: &str) -> Result<Series> {
    load_market_csv_with(path, jurisdiction, &MarketFormat::default())
}

/// Reads a daily price file. Row numbers in errors count the header as row 1.
/// Later rows for an already-seen date replace earlier ones.
pub fn load_market_csv_with(path: &Path, jurisdiction: &str, format: &MarketFormat) -> Result<Series> {
    let mut rdr = reader_from(path, format.delimiter)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let di = column_index(&headers, path, &format.date_column)?;
    let pi = column_index(&headers, path, &format.price_column)?;
    let mut entries = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let date = DateStamp::parse(rec.get(di).unwrap_or(""))
            .map_err(|e| row_error(path, row, e.to_string()))?;
        let raw = rec.get(pi).unwrap_or("");
        let price: f64 = raw.parse().map_err(|_| row_error(path, row, format!("unparseable price `{raw}`")))?;
        if !(0.0..=1.0).contains(&price) {
            return Err(row_error(path, row, format!("price {price} outside [0, 1]")));
        }
        if let Some(old) = entries.insert(date, Some(price)) {
            warn!("{}: duplicate date {date}; keeping row {row} ({price}) over {old:?}", path.display());
        }
    }
    if entries.is_empty() {
        return Err(Error::Input(format!("{}: no data rows", path.display())));
    }
    Series::new(jurisdiction, Source::Market, entries, BTreeMap::new())
}

/// Poll rows that survived filtering, plus drop counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PollLoad {
    pub records: Vec<PollRecord>,
    pub rows_read: usize,
    pub dropped_outside_window: usize,
    pub dropped_jurisdiction: usize,
    /// Two-way mode only: questions without a listed opponent.
    pub dropped_no_opponent: usize,
}

struct PollRow {
    date: DateStamp,
    jurisdiction: String,
    pollster: String,
    candidate: String,
    share: f64,
}

/// Reads a poll export, keeping rows for the tracked candidate inside
/// `window` whose state maps to one of `jurisdictions` (blank = national).
pub fn load_polls_csv(
    path: &Path,
    format: &PollFormat,
    normalization: Normalization,
    jurisdictions: &[String],
    window: DateRange,
) -> Result<PollLoad> {
    let mut rdr = reader_from(path, format.delimiter)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| column_index(&headers, path, name);
    let (di, si, pi, qi, ci, vi) = (
        col(&format.date_column)?,
        col(&format.state_column)?,
        col(&format.pollster_column)?,
        col(&format.question_column)?,
        col(&format.candidate_column)?,
        col(&format.share_column)?,
    );
    let wanted = |c: &str| c == format.candidate || format.opponents.iter().any(|o| o == c);
    let mut load = PollLoad::default();
    // Question id -> rows, in first-seen order.
    let mut questions: Vec<(String, Vec<PollRow>)> = Vec::new();
    let mut qindex: HashMap<String, usize> = HashMap::new();
    let mut untracked: BTreeMap<String, usize> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        load.rows_read += 1;
        let candidate = rec.get(ci).unwrap_or("").to_string();
        if !wanted(&candidate) {
            continue;
        }
        let date = DateStamp::parse(rec.get(di).unwrap_or("")).map_err(|e| row_error(path, row, e.to_string()))?;
        let raw = rec.get(vi).unwrap_or("");
        let share: f64 = raw.parse().map_err(|_| row_error(path, row, format!("unparseable share `{raw}`")))?;
        let share = share / format.share_scale;
        if !(0.0..=1.0).contains(&share) {
            return Err(row_error(path, row, format!("share {share} outside [0, 1] after scaling")));
        }
        let is_tracked = candidate == format.candidate;
        if !window.contains(date) {
            load.dropped_outside_window += is_tracked as usize;
            continue;
        }
        let state = rec.get(si).unwrap_or("");
        let jurisdiction = if state.is_empty() { Some(NATIONAL) } else { state_code(state) };
        let Some(jurisdiction) = jurisdiction.filter(|j| jurisdictions.iter().any(|k| k == j)) else {
            if is_tracked {
                load.dropped_jurisdiction += 1;
                *untracked.entry(state.to_string()).or_default() += 1;
            }
            continue;
        };
        let pollster = match rec.get(pi).unwrap_or("") {
            "" => "unknown".to_string(),
            p => p.to_string(),
        };
        let q = rec.get(qi).unwrap_or("").to_string();
        let slot = *qindex.entry(q.clone()).or_insert_with(|| {
            questions.push((q, Vec::new()));
            questions.len() - 1
        });
        questions[slot].1.push(PollRow { date, jurisdiction: jurisdiction.to_string(), pollster, candidate, share });
    }
    for (state, count) in &untracked {
        warn!("{}: jurisdiction `{state}` not tracked; dropped {count} rows", path.display());
    }

    for (qid, rows) in &questions {
        let Some(tracked) = rows.iter().find(|r| r.candidate == format.candidate) else { continue };
        let value = match normalization {
            Normalization::Raw => tracked.share,
            Normalization::TwoWay => {
                let opp = format.opponents.iter().find_map(|o| rows.iter().find(|r| &r.candidate == o));
                match opp {
                    Some(o) if tracked.share + o.share > 0.0 => tracked.share / (tracked.share + o.share),
                    _ => {
                        load.dropped_no_opponent += 1;
                        warn!("{}: question `{qid}` has no opponent share; dropped", path.display());
                        continue;
                    }
                }
            }
        };
        load.records.push(PollRecord::new(tracked.date, tracked.jurisdiction.clone(), tracked.pollster.clone(), value)?);
    }
    info!(
        "{}: {} poll records kept; dropped {} outside window, {} untracked jurisdiction, {} without opponent",
        path.display(),
        load.records.len(),
        load.dropped_outside_window,
        load.dropped_jurisdiction,
        load.dropped_no_opponent
    );
    Ok(load)
}

/// Same-day aggregated poll series for one jurisdiction, or `None` when it
/// has no records.
pub fn poll_series(records: &[PollRecord], jurisdiction: &str) -> Result<Option<Series>> {
    let mine: Vec<PollRecord> = records.iter().filter(|r| r.jurisdiction == jurisdiction).cloned().collect();
    if mine.is_empty() {
        return Ok(None);
    }
    aggregate_same_day(&mine).map(Some)
}

/// Gap filling applied to one regressor column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnFill {
    pub column: String,
    /// Cells filled from the previous observed day.
    pub carried_forward: usize,
    /// Cells before the first observation, filled from it.
    pub leading: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct FillReport {
    pub columns: Vec<ColumnFill>,
}

impl FillReport {
    pub fn total(&self) -> usize {
        self.columns.iter().map(|c| c.carried_forward + c.leading).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["column", "carried_forward", "leading"])?;
        for c in &self.columns {
            wtr.write_record([c.column.clone(), c.carried_forward.to_string(), c.leading.to_string()])?;
        }
        wtr.flush()
    }
}

/// Fills interior gaps by carrying the last value forward and leading gaps
/// from the first value. Returns `(carried_forward, leading)` counts, or
/// `None` if the column has no values at all.
pub fn fill_column(col: &mut [Option<f64>]) -> Option<(usize, usize)> {
    let first = col.iter().position(Option::is_some)?;
    let v0 = col[first];
    for c in col[..first].iter_mut() {
        *c = v0;
    }
    let mut carried = 0;
    let mut last = v0;
    for c in col[first..].iter_mut() {
        match c {
            Some(_) => last = *c,
            None => {
                *c = last;
                carried += 1;
            }
        }
    }
    Some((carried, first))
}

/// Market panel on the analysis window: the national target column
/// (unfilled) followed by one gap-filled column per state.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorPanel {
    pub panel: AlignedPanel,
    pub fills: FillReport,
}

impl RegressorPanel {
    pub fn target(&self) -> Series {
        self.panel.series(NATIONAL, Source::Market).expect("national column present")
    }

    pub fn regressors(&self) -> AlignedPanel {
        let states: Vec<&str> = self.panel.names().iter().map(String::as_str).filter(|n| *n != NATIONAL).collect();
        self.panel.select(&states).expect("columns exist")
    }
}

/// Loads every market file named by the manifest, restricted to the window.
pub fn load_markets(manifest: &DatasetManifest) -> Result<Vec<Series>> {
    manifest
        .jurisdictions
        .par_iter()
        .map(|j| {
            let path = manifest.market_path(j);
            if !path.exists() {
                return Err(Error::MissingJurisdiction(j.clone()));
            }
            let s = load_market_csv_with(&path, j, &manifest.market.format)?.restrict(&manifest.window);
            if s.present_count() == 0 {
                return Err(Error::MissingJurisdiction(j.clone()));
            }
            Ok(s)
        })
        .collect()
}

/// Builds the national-plus-states market panel over the analysis window.
pub fn build_regressor_panel(manifest: &DatasetManifest) -> Result<RegressorPanel> {
    let markets = load_markets(manifest)?;
    regressor_panel_from(&markets, manifest.window)
}

/// [`build_regressor_panel`] from already-loaded market series. The series
/// named `national` is the target; all others are gap-filled.
pub fn regressor_panel_from(markets: &[Series], window: DateRange) -> Result<RegressorPanel> {
    let national = markets
        .iter()
        .find(|s| s.jurisdiction() == NATIONAL)
        .ok_or_else(|| Error::MissingJurisdiction(NATIONAL.into()))?;
    let mut columns = vec![(NATIONAL.to_string(), national.values_on(&window))];
    let mut fills = FillReport::default();
    for s in markets.iter().filter(|s| s.jurisdiction() != NATIONAL) {
        let mut col = s.values_on(&window);
        let (carried, leading) =
            fill_column(&mut col).ok_or_else(|| Error::MissingJurisdiction(s.jurisdiction().into()))?;
        fills.columns.push(ColumnFill { column: s.jurisdiction().into(), carried_forward: carried, leading });
        columns.push((s.jurisdiction().to_string(), col));
    }
    Ok(RegressorPanel { panel: AlignedPanel::from_columns(window, columns)?, fills })
}

/// Poll series for every jurisdiction with data, in manifest order.
pub fn load_poll_series(manifest: &DatasetManifest) -> Result<(Vec<Series>, PollLoad)> {
    let load = load_polls_csv(
        &manifest.polls.path,
        &manifest.polls.format,
        manifest.polls.normalization,
        &manifest.jurisdictions,
        manifest.window,
    )?;
    let mut out = Vec::new();
    for j in &manifest.jurisdictions {
        if let Some(s) = poll_series(&load.records, j)? {
            out.push(s);
        }
    }
    Ok((out, load))
}

/// Reads a `date,label` event list.
pub fn load_events_csv(path: &Path) -> Result<Vec<crate::compare::Event>> {
    let mut rdr = reader_from(path, ',')?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let di = column_index(&headers, path, "date")?;
    let li = column_index(&headers, path, "label")?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let date = DateStamp::parse(rec.get(di).unwrap_or("")).map_err(|e| row_error(path, i + 2, e.to_string()))?;
        out.push(crate::compare::Event { date, label: rec.get(li).unwrap_or("").to_string() });
    }
    Ok(out)
}

/// Writes `date,<column>...` with blank cells for missing values. Floats use
/// the shortest round-trip representation.
pub fn write_panel_csv<W: Write>(panel: &AlignedPanel, w: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["date".to_string()];
    header.extend(panel.names().iter().cloned());
    wtr.write_record(&header)?;
    let cols: Vec<&[Option<f64>]> = panel.columns().map(|(_, c)| c).collect();
    for (i, d) in panel.dates().iter().enumerate() {
        let mut row = vec![d.to_string()];
        row.extend(cols.iter().map(|c| c[i].map(|v| v.to_string()).unwrap_or_default()));
        wtr.write_record(&row)?;
    }
    wtr.flush()
}

/// Inverse of [`write_panel_csv`]. Dates must be consecutive days.
pub fn read_panel_csv(path: &Path) -> Result<AlignedPanel> {
    let mut text = String::new();
    fs::File::open(path).and_then(|mut f| f.read_to_string(&mut text)).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.get(0) != Some("date") {
        return Err(Error::MissingColumn { path: path.into(), column: "date".into() });
    }
    let names: Vec<String> = headers.iter().skip(1).map(String::from).collect();
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    let mut dates = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let d = DateStamp::parse(&rec[0]).map_err(|e| row_error(path, row, e.to_string()))?;
        if let Some(prev) = dates.last() {
            if d != DateStamp::succ(prev) {
                return Err(row_error(path, row, format!("date {d} does not follow {prev}")));
            }
        }
        dates.push(d);
        for (j, col) in cols.iter_mut().enumerate() {
            let cell = rec.get(j + 1).unwrap_or("");
            col.push(if cell.is_empty() {
                None
            } else {
                Some(cell.parse().map_err(|_| row_error(path, row, format!("unparseable value `{cell}`")))?)
            });
        }
    }
    let (Some(first), Some(last)) = (dates.first(), dates.last()) else {
        return Err(Error::Input(format!("{}: panel has no rows", path.display())));
    };
    AlignedPanel::from_columns(DateRange::new(*first, *last)?, names.into_iter().zip(cols).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn d(s: &str) -> DateStamp {
        DateStamp::parse(s).unwrap()
    }

    #[test]
    fn market_rows_duplicates_and_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "date,price\n2024-11-03,0.56\n2024-11-04,0.58\n2024-11-04,0.95\n");
        let s = load_market_csv(&p, NATIONAL).unwrap();
        assert_eq!(s.value(d("2024-11-04")), Some(0.95));
        assert_eq!(s.len(), 2);

        let bad = write(dir.path(), "b.csv", "date,price\n2024-05-31,0.5\n2024-06-01,1.37\n");
        match load_market_csv(&bad, "x").unwrap_err() {
            Error::Row { row, message, .. } => {
                assert_eq!(row, 3);
                assert!(message.contains("1.37"));
            }
            e => panic!("unexpected {e}"),
        }
        let garbled = write(dir.path(), "g.csv", "date,price\nnot-a-date,0.5\n");
        assert!(matches!(load_market_csv(&garbled, "x"), Err(Error::Row { row: 2, .. })));
        let empty = write(dir.path(), "e.csv", "date,price\n");
        assert!(load_market_csv(&empty, "x").is_err());
        let cols = write(dir.path(), "c.csv", "day,price\n2024-05-31,0.5\n");
        assert!(matches!(load_market_csv(&cols, "x"), Err(Error::MissingColumn { .. })));
    }

    #[test]
    fn market_gaps_become_missing_days() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "date,price\n2024-06-01,0.5\n2024-06-04,0.52\n");
        let s = load_market_csv(&p, "PA").unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.present_count(), 2);
    }

    const POLLS: &str = "\
poll_id,pollster,state,end_date,question_id,candidate_name,pct
1,Acme,,6/10/24,11,Donald Trump,45
1,Acme,,6/10/24,11,Kamala Harris,47
1,Acme,,6/10/24,11,Jill Stein,2
2,,Pennsylvania,6/10/24,12,Donald Trump,46
2,,Pennsylvania,6/10/24,12,Joe Biden,44
3,Beta,Maine CD-1,6/11/24,13,Donald Trump,40
4,Beta,,3/1/24,14,Donald Trump,44
5,Gamma,PA,6/12/24,15,Donald Trump,48
";

    #[test]
    fn poll_rows_filter_and_normalize() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "p.csv", POLLS);
        let juris = default_jurisdictions();
        let raw = load_polls_csv(&p, &PollFormat::default(), Normalization::Raw, &juris, default_window()).unwrap();
        assert_eq!(raw.records.len(), 3);
        assert_eq!(raw.dropped_outside_window, 1);
        assert_eq!(raw.dropped_jurisdiction, 1);
        assert!((raw.records[0].value - 0.45).abs() < 1e-12);
        assert_eq!(raw.records[0].jurisdiction, NATIONAL);
        assert_eq!(raw.records[1].pollster, "unknown");
        assert_eq!(raw.records[1].jurisdiction, "PA");

        let two = load_polls_csv(&p, &PollFormat::default(), Normalization::TwoWay, &juris, default_window()).unwrap();
        assert_eq!(two.records.len(), 2);
        assert_eq!(two.dropped_no_opponent, 1);
        assert!((two.records[0].value - 45.0 / 92.0).abs() < 1e-12);
        assert!((two.records[1].value - 46.0 / 90.0).abs() < 1e-12);

        let pa = poll_series(&raw.records, "PA").unwrap().unwrap();
        assert_eq!(pa.present_count(), 2);
        assert!(poll_series(&raw.records, "OH").unwrap().is_none());
    }

    #[test]
    fn fill_column_counts() {
        let mut c = vec![None, Some(0.3), None, None, Some(0.5), None];
        assert_eq!(fill_column(&mut c), Some((3, 1)));
        assert_eq!(c, vec![Some(0.3), Some(0.3), Some(0.3), Some(0.3), Some(0.5), Some(0.5)]);
        assert_eq!(fill_column(&mut [None, None]), None);
    }

    #[test]
    fn panel_fills_states_but_not_target() {
        let w = DateRange::new(d("2024-06-01"), d("2024-06-05")).unwrap();
        let nat = Series::from_values(NATIONAL, Source::Market, d("2024-06-01"), &[Some(0.5), None, Some(0.52), Some(0.53), Some(0.5)]).unwrap();
        let pa = Series::from_values("PA", Source::Market, d("2024-06-01"), &[Some(0.6), None, None, Some(0.62), Some(0.61)]).unwrap();
        let r = regressor_panel_from(&[nat, pa], w).unwrap();
        assert_eq!(r.panel.names(), &["national".to_string(), "PA".to_string()]);
        assert_eq!(r.panel.get(NATIONAL, d("2024-06-02")), Some(None));
        assert_eq!(r.panel.get("PA", d("2024-06-03")), Some(Some(0.6)));
        assert_eq!(r.fills.total(), 2);
        assert_eq!(r.regressors().names(), &["PA".to_string()]);
        assert_eq!(r.target().present_count(), 4);
    }

    #[test]
    fn panel_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let w = DateRange::new(d("2024-06-01"), d("2024-06-03")).unwrap();
        let panel = AlignedPanel::from_columns(
            w,
            vec![("a".into(), vec![Some(0.1), None, Some(1.0 / 3.0)]), ("b".into(), vec![None, Some(0.0), Some(1.0)])],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_panel_csv(&panel, &mut buf).unwrap();
        let p = write(dir.path(), "panel.csv", std::str::from_utf8(&buf).unwrap());
        assert_eq!(read_panel_csv(&p).unwrap(), panel);
    }

    #[test]
    fn manifest_defaults_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.toml", "[market]\ndir = \"markets\"\n[polls]\npath = \"polls.csv\"\nnormalization = \"two-way\"\n");
        let m = DatasetManifest::load(&p).unwrap();
        assert_eq!(m.jurisdictions.len(), 51);
        assert_eq!(m.election, d("2024-11-05"));
        assert_eq!(m.polls.normalization, Normalization::TwoWay);
        assert_eq!(m.market_path("PA"), dir.path().join("markets").join("PA.csv"));

        let bad = write(dir.path(), "b.toml", "election = \"2024-12-01\"\n[market]\ndir = \"m\"\n[polls]\npath = \"p\"\n");
        assert!(matches!(DatasetManifest::load(&bad), Err(Error::Config { .. })));
        let swing = write(dir.path(), "s.toml", "jurisdictions = [\"national\", \"PA\"]\n[market]\ndir = \"m\"\n[polls]\npath = \"p\"\n");
        assert!(DatasetManifest::load(&swing).is_err());
        let nov4 = write(dir.path(), "n.toml", "election = \"2024-11-04\"\n[market]\ndir = \"m\"\n[polls]\npath = \"p\"\n");
        assert_eq!(DatasetManifest::load(&nov4).unwrap().election, d("2024-11-04"));
    }

    #[test]
    fn missing_state_file_names_the_state() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("markets")).unwrap();
        write(&dir.path().join("markets"), "national.csv", "date,price\n2024-06-01,0.5\n");
        let p = write(
            dir.path(),
            "m.toml",
            "jurisdictions = [\"national\", \"PA\"]\nswing_states = [\"PA\"]\n[market]\ndir = \"markets\"\n[polls]\npath = \"p.csv\"\n",
        );
        let m = DatasetManifest::load(&p).unwrap();
        let err = build_regressor_panel(&m).unwrap_err();
        assert!(matches!(&err, Error::MissingJurisdiction(s) if s == "PA"));
        assert!(err.to_string().contains("PA"));
    }

    #[test]
    fn state_names_map_to_codes() {
        assert_eq!(state_code("pennsylvania"), Some("PA"));
        assert_eq!(state_code("MI"), Some("MI"));
        assert_eq!(state_code("Maine CD-1"), None);
        assert_eq!(display_name("NV"), "Nevada");
        assert_eq!(display_name(NATIONAL), NATIONAL);
    }
}
