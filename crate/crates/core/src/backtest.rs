//! Rolling-window backtest on a returns panel read from CSV.
//!
//! Input layout: a header row `date,<asset id>,<asset id>,...`, then one row
//! per date with ISO-8601 dates (`YYYY-MM-DD`) in strictly increasing order
//! and decimal (simple) returns. Lines starting with `#` are ignored.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::estimators::{equally_weighted_target, estimate_all};
use crate::model::{sample_covariance_as, CovKind, PortfolioWeights, ReturnsWindow, Strategy};
use crate::parallel::map_indexed;
use crate::risk::EmpiricalEvaluator;
use crate::rng::SeedSpec;
use crate::stats::{mean, median};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Problems found while reading a returns CSV. Rows are 1-based file lines,
/// columns 1-based field positions.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read returns file: {0}")]
    Read(String),

    #[error("returns file is empty")]
    Empty,

    #[error("bad header: {0}")]
    Header(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: u64, expected: usize, found: usize },

    #[error("row {row}, column {column} ({asset}): missing value")]
    MissingValue { row: u64, column: usize, asset: String },

    #[error("row {row}, column {column} ({asset}): '{value}' is not a number")]
    NonNumeric {
        row: u64,
        column: usize,
        asset: String,
        value: String,
    },

    #[error("row {row}: '{value}' is not a YYYY-MM-DD date")]
    BadDate { row: u64, value: String },

    #[error("row {row}: duplicate date {date}")]
    DuplicateDate { row: u64, date: String },

    #[error("row {row}: date {date} does not follow {previous}")]
    NonIncreasingDate { row: u64, date: String, previous: String },

    #[error("need at least 2 assets, found {found}")]
    TooFewAssets { found: usize },

    #[error("no data rows")]
    NoRows,
}

/// A returns panel with asset identifiers and dates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsDataset {
    assets: Vec<String>,
    dates: Vec<NaiveDate>,
    returns: DMatrix<f64>,
}

impl ReturnsDataset {
    pub fn new(assets: Vec<String>, dates: Vec<NaiveDate>, returns: DMatrix<f64>) -> Result<Self> {
        if returns.nrows() != assets.len() || returns.ncols() != dates.len() {
            return Err(Error::Dimension(format!(
                "{} assets and {} dates for a {}x{} matrix",
                assets.len(),
                dates.len(),
                returns.nrows(),
                returns.ncols()
            )));
        }
        if dates.windows(2).any(|d| d[0] >= d[1]) {
            return Err(Error::InvalidParameter("dates must be strictly increasing".into()));
        }
        if returns.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("returns must be finite".into()));
        }
        Ok(ReturnsDataset { assets, dates, returns })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// p x T.
    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn asset_count(&self) -> usize {
        self.assets.len()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn window(&self) -> Result<ReturnsWindow> {
        ReturnsWindow::new(self.returns.clone())
    }

    fn rows(&self, idx: &[usize]) -> Self {
        ReturnsDataset {
            assets: idx.iter().map(|&i| self.assets[i].clone()).collect(),
            dates: self.dates.clone(),
            returns: self.returns.select_rows(idx),
        }
    }

    /// Writes the panel in the loader's layout; every float is written in
    /// shortest round-trip form.
    pub fn to_csv(&self, comment: Option<&str>) -> Result<String> {
        let mut out = String::new();
        if let Some(c) = comment {
            for line in c.lines() {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["date".to_string()];
        header.extend(self.assets.iter().cloned());
        w.write_record(&header).map_err(csv_io)?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut row = vec![date.format(DATE_FORMAT).to_string()];
            row.extend(self.returns.column(t).iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(csv_io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        Ok(out)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn load_returns_csv(path: &Path) -> Result<ReturnsDataset> {
    let file = std::fs::File::open(path).map_err(|e| LoadError::Read(format!("{}: {e}", path.display())))?;
    read_returns_csv(file)
}

pub fn read_returns_csv<R: Read>(reader: R) -> Result<ReturnsDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(LoadError::Empty.into()),
        Some(r) => r.map_err(|e| LoadError::Read(e.to_string()))?,
    };
    let first = header.get(0).unwrap_or("");
    if !first.eq_ignore_ascii_case("date") {
        return Err(LoadError::Header(format!("first column must be 'date', found '{first}'")).into());
    }
    let assets: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    for (k, a) in assets.iter().enumerate() {
        if a.is_empty() {
            return Err(LoadError::Header(format!("empty asset identifier in column {}", k + 2)).into());
        }
        if !seen.insert(a.as_str()) {
            return Err(LoadError::Header(format!("duplicate asset identifier '{a}'")).into());
        }
    }
    if assets.len() < 2 {
        return Err(LoadError::TooFewAssets { found: assets.len() }.into());
    }
    let p = assets.len();
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for record in records {
        let record = record.map_err(|e| LoadError::Read(e.to_string()))?;
        let row = record.position().map_or(0, |pos| pos.line());
        if record.len() != p + 1 {
            return Err(LoadError::Ragged {
                row,
                expected: p + 1,
                found: record.len(),
            }
            .into());
        }
        let raw_date = &record[0];
        let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT).map_err(|_| LoadError::BadDate {
            row,
            value: raw_date.to_string(),
        })?;
        if let Some(&previous) = dates.last() {
            if date == previous || dates.binary_search(&date).is_ok() {
                return Err(LoadError::DuplicateDate {
                    row,
                    date: raw_date.to_string(),
                }
                .into());
            }
            if date < previous {
                return Err(LoadError::NonIncreasingDate {
                    row,
                    date: raw_date.to_string(),
                    previous: previous.format(DATE_FORMAT).to_string(),
                }
                .into());
            }
        }
        for (k, field) in record.iter().enumerate().skip(1) {
            let asset = assets[k - 1].clone();
            if field.is_empty() {
                return Err(LoadError::MissingValue {
                    row,
                    column: k + 1,
                    asset,
                }
                .into());
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(LoadError::NonNumeric {
                        row,
                        column: k + 1,
                        asset,
                        value: field.to_string(),
                    }
                    .into())
                }
            }
        }
        dates.push(date);
    }
    if dates.is_empty() {
        return Err(LoadError::NoRows.into());
    }
    let returns = DMatrix::from_vec(p, dates.len(), values);
    ReturnsDataset::new(assets, dates, returns)
}

/// A uniformly drawn subset of `count` assets, kept in source order.
pub fn select_assets(ds: &ReturnsDataset, count: usize, seed: &SeedSpec) -> Result<ReturnsDataset> {
    let p = ds.asset_count();
    if count == 0 || count > p {
        return Err(Error::InvalidParameter(format!("cannot select {count} of {p} assets")));
    }
    let mut rng = seed.rng();
    let mut idx = index::sample(&mut rng, p, count).into_vec();
    idx.sort_unstable();
    Ok(ds.rows(&idx))
}

/// Keeps the named assets, in source order.
pub fn select_asset_ids(ds: &ReturnsDataset, ids: &[String]) -> Result<ReturnsDataset> {
    let mut idx = Vec::with_capacity(ids.len());
    for id in ids {
        let i = ds
            .assets
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown asset '{id}'")))?;
        idx.push(i);
    }
    idx.sort_unstable();
    idx.dedup();
    Ok(ds.rows(&idx))
}

fn default_window() -> usize {
    200
}
fn default_step() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestConfig {
    #[serde(default = "default_window")]
    pub window_n: usize,
    #[serde(default = "default_window")]
    pub window_m: usize,
    #[serde(default = "default_step")]
    pub step: usize,
    /// Random subset size; needs `asset_seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset_seed: Option<u64>,
    /// Explicit subset; excludes `asset_count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset_ids: Option<Vec<String>>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            window_n: default_window(),
            window_m: default_window(),
            step: default_step(),
            asset_count: None,
            asset_seed: None,
            asset_ids: None,
        }
    }
}

impl BacktestConfig {
    /// Applies the asset subset, if any.
    pub fn select(&self, ds: &ReturnsDataset) -> Result<ReturnsDataset> {
        match (&self.asset_ids, self.asset_count) {
            (Some(_), Some(_)) => Err(Error::InvalidParameter(
                "give either asset_ids or asset_count, not both".into(),
            )),
            (Some(ids), None) => select_asset_ids(ds, ids),
            (None, Some(count)) => {
                let seed = self
                    .asset_seed
                    .ok_or_else(|| Error::InvalidParameter("asset_count needs asset_seed".into()))?;
                select_assets(ds, count, &SeedSpec::new(seed))
            }
            (None, None) => Ok(ds.clone()),
        }
    }

    pub fn validate(&self, p: usize, t: usize) -> Result<()> {
        if self.step == 0 {
            return Err(Error::InvalidParameter("step must be at least 1".into()));
        }
        if self.window_m < 2 {
            return Err(Error::InvalidParameter("window_m must be at least 2".into()));
        }
        if self.window_n <= p + 2 {
            return Err(Error::InvalidParameter(format!(
                "window_n = {} must exceed p + 2 = {}",
                self.window_n,
                p + 2
            )));
        }
        if self.window_n + self.window_m > t {
            return Err(Error::InvalidParameter(format!(
                "window_n + window_m = {} exceeds the {t} available dates",
                self.window_n + self.window_m
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestRecord {
    pub window: usize,
    /// Column index of the first in-sample observation.
    pub start: usize,
    /// Last out-of-sample date.
    pub date_end: NaiveDate,
    pub strategy: Strategy,
    pub emp_oos_variance: f64,
    pub emp_oos_relative_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDiagnostic {
    pub window: usize,
    pub date_end: NaiveDate,
    pub message: String,
    pub numerical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSeries {
    pub window_n: usize,
    pub window_m: usize,
    pub assets: Vec<String>,
    pub windows: usize,
    pub records: Vec<BacktestRecord>,
    pub diagnostics: Vec<WindowDiagnostic>,
}

struct WindowOutcome {
    records: Vec<BacktestRecord>,
    diagnostics: Vec<WindowDiagnostic>,
}

fn diagnostic(window: usize, date_end: NaiveDate, stage: &str, e: &Error) -> WindowDiagnostic {
    WindowDiagnostic {
        window,
        date_end,
        message: format!("{stage}: {e}"),
        numerical: e.is_numerical(),
    }
}

fn run_window(ds: &ReturnsDataset, cfg: &BacktestConfig, b: &PortfolioWeights, window: usize) -> Result<WindowOutcome> {
    let (n, m, p) = (cfg.window_n, cfg.window_m, ds.asset_count());
    let start = window * cfg.step;
    let date_end = ds.dates[start + n + m - 1];
    let panel = ReturnsWindow::new(ds.returns.columns(start, n + m).into_owned())?;
    let in_sample = panel.columns(0, n)?;
    let out_sample = panel.columns(n, m)?;
    let mut diagnostics = Vec::new();

    let mut portfolios: Vec<PortfolioWeights> = Vec::new();
    match estimate_all(&in_sample, b) {
        Ok(est) => portfolios.extend(Strategy::ALL.iter().map(|&s| est.get(s).clone())),
        Err(e) => {
            diagnostics.push(diagnostic(window, date_end, "estimation", &e));
            portfolios.push(b.clone());
        }
    }
    let s_out = sample_covariance_as(&out_sample, CovKind::OutOfSample)?;
    let evaluator = match EmpiricalEvaluator::new(&s_out, p, m) {
        Ok(ev) => Some(ev),
        Err(e) => {
            diagnostics.push(diagnostic(window, date_end, "evaluation", &e));
            None
        }
    };
    let records = portfolios
        .iter()
        .map(|w| {
            Ok(BacktestRecord {
                window,
                start,
                date_end,
                strategy: w.strategy(),
                emp_oos_variance: s_out.quadratic_form(w.weights())?,
                emp_oos_relative_loss: evaluator.as_ref().map(|ev| ev.relative_loss(w)).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WindowOutcome { records, diagnostics })
}

/// Estimates on columns `[t, t + n)` and evaluates on `[t + n, t + n + m)`
/// for `t = 0, step, 2 step, ...`. Windows whose estimation or evaluation
/// fails keep whatever could be computed and add a diagnostic.
pub fn run_backtest(ds: &ReturnsDataset, cfg: &BacktestConfig) -> Result<BacktestSeries> {
    let ds = cfg.select(ds)?;
    let (p, t) = (ds.asset_count(), ds.len());
    cfg.validate(p, t)?;
    let windows = (t - cfg.window_n - cfg.window_m) / cfg.step + 1;
    let b = equally_weighted_target(p)?;
    let outcomes = map_indexed(windows, |w| run_window(&ds, cfg, &b, w))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for o in outcomes {
        records.extend(o.records);
        diagnostics.extend(o.diagnostics);
    }
    Ok(BacktestSeries {
        window_n: cfg.window_n,
        window_m: cfg.window_m,
        assets: ds.assets.clone(),
        windows,
        records,
        diagnostics,
    })
}

/// `date_end,strategy,emp_oos_variance,emp_oos_relative_loss`, preceded by
/// `# ` comment lines carrying `comment`. A missing loss is an empty field.
pub fn series_csv(series: &BacktestSeries, comment: Option<&str>) -> Result<String> {
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date_end", "strategy", "emp_oos_variance", "emp_oos_relative_loss"])
        .map_err(csv_io)?;
    for r in &series.records {
        w.write_record([
            r.date_end.format(DATE_FORMAT).to_string(),
            r.strategy.to_string(),
            r.emp_oos_variance.to_string(),
            r.emp_oos_relative_loss.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyStats {
    pub strategy: Strategy,
    pub windows: usize,
    pub mean_variance: f64,
    pub median_variance: f64,
    /// Windows with an available loss.
    pub loss_windows: usize,
    pub mean_loss: Option<f64>,
    pub median_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSummary {
    pub windows: usize,
    pub strategies: Vec<StrategyStats>,
    /// Share of windows with all three losses where `bps <= fm <= traditional`.
    pub ordering_fraction: Option<f64>,
}

impl BacktestSummary {
    pub fn strategy(&self, s: Strategy) -> Option<&StrategyStats> {
        self.strategies.iter().find(|x| x.strategy == s)
    }
}

pub fn summarize(series: &BacktestSeries) -> Result<BacktestSummary> {
    if series.records.is_empty() {
        return Err(Error::InsufficientData("empty backtest series".into()));
    }
    let strategies = Strategy::ALL
        .iter()
        .filter_map(|&s| {
            let recs: Vec<&BacktestRecord> = series.records.iter().filter(|r| r.strategy == s).collect();
            if recs.is_empty() {
                return None;
            }
            let var: Vec<f64> = recs.iter().map(|r| r.emp_oos_variance).collect();
            let loss: Vec<f64> = recs.iter().filter_map(|r| r.emp_oos_relative_loss).collect();
            let some = |v: f64| (!loss.is_empty()).then_some(v);
            Some(StrategyStats {
                strategy: s,
                windows: recs.len(),
                mean_variance: mean(&var),
                median_variance: median(&var),
                loss_windows: loss.len(),
                mean_loss: some(mean(&loss)),
                median_loss: some(median(&loss)),
            })
        })
        .collect();
    let mut complete = 0usize;
    let mut ordered = 0usize;
    for w in 0..series.windows {
        let loss = |s: Strategy| {
            series
                .records
                .iter()
                .find(|r| r.window == w && r.strategy == s)
                .and_then(|r| r.emp_oos_relative_loss)
        };
        if let (Some(ls), Some(lf), Some(lb)) = (loss(Strategy::Traditional), loss(Strategy::Fm), loss(Strategy::Bps)) {
            complete += 1;
            if lb <= lf && lf <= ls {
                ordered += 1;
            }
        }
    }
    Ok(BacktestSummary {
        windows: series.windows,
        strategies,
        ordering_fraction: (complete > 0).then(|| ordered as f64 / complete as f64),
    })
}
