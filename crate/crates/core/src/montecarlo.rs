//! Simulation study over a grid of `(n, c, c~)` cells.
//!
//! Each repetition simulates one path of `n + m` observations, estimates the
//! four strategies on the first `n` columns and evaluates them on the last
//! `m`. A cell aggregates its repetitions and divides the mean loss
//! differences by their closed-form limits evaluated at `c = p/n` and the
//! true target loss of the scenario.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{limit_loss_difference, DifferencePair};
use crate::datagen::{Scenario, ScenarioModel};
use crate::error::{Error, Result};
use crate::estimators::{equally_weighted_target, estimate_all};
use crate::model::{sample_covariance_as, target_relative_loss, CovKind, PortfolioWeights, Strategy};
use crate::parallel::map_indexed;
use crate::risk::{EmpiricalEvaluator, PerformanceRecord, PopulationEvaluator};
use crate::rng::{label, SeedSpec};
use crate::stats::MonteCarloMean;

pub const DEFAULT_REPETITIONS: usize = 1000;

/// Keys accepted in [`SimulationConfig::tolerances`] with their defaults.
pub const TOLERANCE_DEFAULTS: [(&str, f64); 3] =
    [("ratio_lower", 0.9), ("ratio_upper", 1.1), ("ordering_fraction", 0.9)];

fn default_repetitions() -> usize {
    DEFAULT_REPETITIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub scenario: Scenario,
    pub n_grid: Vec<usize>,
    pub c_grid: Vec<f64>,
    pub c_tilde_grid: Vec<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub master_seed: u64,
    /// Overrides for the per-cell pass flags; see [`TOLERANCE_DEFAULTS`].
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 2 {
            return Err(Error::InvalidParameter(format!(
                "repetitions must be at least 2, got {}",
                self.repetitions
            )));
        }
        for key in self.tolerances.keys() {
            if !TOLERANCE_DEFAULTS.iter().any(|(k, _)| k == key) {
                return Err(Error::InvalidParameter(format!("unknown tolerance '{key}'")));
            }
        }
        for (key, v) in &self.tolerances {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("tolerance '{key}' must be finite")));
            }
        }
        for &c in &self.c_grid {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::InvalidParameter(format!("c = {c} outside (0, 1)")));
            }
        }
        for &ct in &self.c_tilde_grid {
            if !(ct > 0.0 && ct.is_finite()) {
                return Err(Error::InvalidParameter(format!("c_tilde = {ct} must be positive")));
            }
        }
        Ok(())
    }

    pub fn tolerance(&self, key: &str) -> f64 {
        self.tolerances.get(key).copied().unwrap_or_else(|| {
            TOLERANCE_DEFAULTS
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .unwrap_or(f64::NAN)
        })
    }

    /// Cells in `n`-major, then `c`, then `c~` order.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut cells = Vec::new();
        for &n in &self.n_grid {
            for &c in &self.c_grid {
                for &c_tilde in &self.c_tilde_grid {
                    cells.push(CellSpec {
                        cell_id: cells.len(),
                        scenario: self.scenario,
                        n,
                        c,
                        c_tilde,
                        repetitions: self.repetitions,
                        master_seed: self.master_seed,
                    });
                }
            }
        }
        cells
    }
}

/// Round half away from zero.
fn round_half_away(x: f64) -> usize {
    x.round() as usize
}

/// `p = round(n c)`, `m = round(p / c~)`.
pub fn derive_cell_dimensions(n: usize, c: f64, c_tilde: f64) -> Result<(usize, usize)> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParameter(format!("c = {c} outside (0, 1)")));
    }
    if !(c_tilde > 0.0 && c_tilde.is_finite()) {
        return Err(Error::InvalidParameter(format!("c_tilde = {c_tilde} must be positive")));
    }
    let p = round_half_away(n as f64 * c);
    if p < 2 {
        return Err(Error::InvalidParameter(format!("n = {n}, c = {c} gives p = {p} < 2")));
    }
    let m = round_half_away(p as f64 / c_tilde);
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "p = {p}, c_tilde = {c_tilde} gives m = {m} < 2"
        )));
    }
    Ok((p, m))
}

/// One grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub cell_id: usize,
    pub scenario: Scenario,
    pub n: usize,
    pub c: f64,
    pub c_tilde: f64,
    pub repetitions: usize,
    pub master_seed: u64,
}

impl CellSpec {
    /// `mu` and `Sigma` depend only on the master seed and `p`, so every
    /// scenario and every `n` with the same `p` share them.
    pub fn params_seed(&self, p: usize) -> SeedSpec {
        SeedSpec::new(self.master_seed).children(&[label("params"), p as u64])
    }

    pub fn repetition_seed(&self, rep: usize) -> SeedSpec {
        SeedSpec::new(self.master_seed).children(&[
            label("repetition"),
            self.scenario.id(),
            self.n as u64,
            self.c.to_bits(),
            self.c_tilde.to_bits(),
            rep as u64,
        ])
    }
}

/// Model, target and true-covariance evaluator of one cell.
#[derive(Debug, Clone)]
pub struct CellSetup {
    pub model: ScenarioModel,
    pub target: PortfolioWeights,
    pub p: usize,
    pub n: usize,
    pub m: usize,
    /// Relative loss of the target under the scenario's unconditional covariance.
    pub l_b: f64,
}

impl CellSetup {
    pub fn new(spec: &CellSpec) -> Result<Self> {
        let (p, m) = derive_cell_dimensions(spec.n, spec.c, spec.c_tilde)?;
        if m <= p {
            return Err(Error::OutOfSampleTooShort { p, m });
        }
        let model = ScenarioModel::draw(spec.scenario, p, &spec.params_seed(p))?;
        Self::from_model(model, spec.n, m)
    }

    pub fn from_model(model: ScenarioModel, n: usize, m: usize) -> Result<Self> {
        let p = model.dim();
        let target = equally_weighted_target(p)?;
        let l_b = target_relative_loss(&target, model.unconditional_covariance())?;
        Ok(CellSetup {
            model,
            target,
            p,
            n,
            m,
            l_b,
        })
    }

    pub fn run_repetition(&self, seed: &SeedSpec) -> Result<Vec<PerformanceRecord>> {
        let population = PopulationEvaluator::new(self.model.unconditional_covariance())?;
        self.repetition_with(&population, seed)
    }

    fn repetition_with(&self, population: &PopulationEvaluator<'_>, seed: &SeedSpec) -> Result<Vec<PerformanceRecord>> {
        let (p, n, m) = (self.p, self.n, self.m);
        let path = self.model.simulate(n + m, seed)?;
        let in_sample = path.columns(0, n)?;
        let out_sample = path.columns(n, m)?;
        let estimates = estimate_all(&in_sample, &self.target)?;
        let s_out = sample_covariance_as(&out_sample, CovKind::OutOfSample)?;
        let empirical = if m > p {
            Some(EmpiricalEvaluator::new(&s_out, p, m)?)
        } else {
            None
        };
        Strategy::ALL
            .iter()
            .map(|&strategy| {
                let w = estimates.get(strategy);
                let emp_var = s_out.quadratic_form(w.weights())?;
                Ok(PerformanceRecord {
                    strategy,
                    oos_variance: Some(population.variance(w)?),
                    oos_relative_loss: Some(population.relative_loss(w)?),
                    empirical_oos_variance: Some(emp_var),
                    empirical_oos_relative_loss: empirical.as_ref().map(|e| e.relative_loss(w)).transpose()?,
                })
            })
            .collect()
    }
}

/// Records for all four strategies (in [`Strategy::ALL`] order) from one
/// simulated path of length `n + m`.
pub fn run_repetition(model: &ScenarioModel, n: usize, m: usize, seed: &SeedSpec) -> Result<Vec<PerformanceRecord>> {
    CellSetup::from_model(model.clone(), n, m)?.run_repetition(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub empirical_loss: MonteCarloMean,
    pub true_loss: MonteCarloMean,
    pub empirical_variance: MonteCarloMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub pair: DifferencePair,
    /// Mean of the per-repetition empirical loss differences.
    pub difference: MonteCarloMean,
    pub limit: f64,
    /// `difference.mean / limit`.
    pub ratio: f64,
    pub ratio_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell_id: usize,
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub c: f64,
    pub c_tilde: f64,
    pub repetitions: usize,
    pub l_b: f64,
    pub strategies: Vec<StrategySummary>,
    pub pairs: Vec<PairSummary>,
    /// Share of repetitions with `L_bps <= L_fm <= L_s`.
    pub ordering_fraction: f64,
}

impl CellResult {
    pub fn strategy(&self, s: Strategy) -> &StrategySummary {
        self.strategies
            .iter()
            .find(|x| x.strategy == s)
            .expect("all strategies present")
    }

    pub fn pair(&self, d: DifferencePair) -> &PairSummary {
        self.pairs.iter().find(|x| x.pair == d).expect("all pairs present")
    }

    /// Mean empirical losses strictly ordered `bps < fm < traditional`.
    pub fn mean_ordering_holds(&self) -> bool {
        let l = |s| self.strategy(s).empirical_loss.mean;
        l(Strategy::Bps) < l(Strategy::Fm) && l(Strategy::Fm) < l(Strategy::Traditional)
    }
}

fn loss(records: &[PerformanceRecord], s: Strategy) -> f64 {
    records
        .iter()
        .find(|r| r.strategy == s)
        .and_then(|r| r.empirical_oos_relative_loss)
        .unwrap_or(f64::NAN)
}

pub fn run_cell(spec: &CellSpec) -> Result<CellResult> {
    if spec.repetitions < 2 {
        return Err(Error::InvalidParameter("a cell needs at least 2 repetitions".into()));
    }
    let setup = CellSetup::new(spec)?;
    let population = PopulationEvaluator::new(setup.model.unconditional_covariance())?;
    let reps = map_indexed(spec.repetitions, |rep| {
        setup
            .repetition_with(&population, &spec.repetition_seed(rep))
            .map_err(|e| e.context(format!("repetition {rep}")))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    summarize_cell(spec, &setup, &reps)
}

fn summarize_cell(spec: &CellSpec, setup: &CellSetup, reps: &[Vec<PerformanceRecord>]) -> Result<CellResult> {
    let column = |s: Strategy, f: fn(&PerformanceRecord) -> Option<f64>| -> Vec<f64> {
        reps.iter()
            .map(|r| r.iter().find(|x| x.strategy == s).and_then(f).unwrap_or(f64::NAN))
            .collect()
    };
    let strategies = Strategy::ALL
        .iter()
        .map(|&s| StrategySummary {
            strategy: s,
            empirical_loss: MonteCarloMean::from_slice(&column(s, |r| r.empirical_oos_relative_loss)),
            true_loss: MonteCarloMean::from_slice(&column(s, |r| r.oos_relative_loss)),
            empirical_variance: MonteCarloMean::from_slice(&column(s, |r| r.empirical_oos_variance)),
        })
        .collect();
    let c_eff = setup.p as f64 / setup.n as f64;
    let pairs = DifferencePair::ALL
        .iter()
        .map(|&pair| {
            let (a, b) = pair.strategies();
            let diffs: Vec<f64> = reps.iter().map(|r| loss(r, a) - loss(r, b)).collect();
            let difference = MonteCarloMean::from_slice(&diffs);
            let limit = limit_loss_difference(pair, c_eff, setup.l_b)?;
            Ok(PairSummary {
                pair,
                difference,
                limit,
                ratio: difference.mean / limit,
                ratio_std_error: difference.std_error / limit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ordered = reps
        .iter()
        .filter(|r| {
            let (s, fm, bps) = (
                loss(r, Strategy::Traditional),
                loss(r, Strategy::Fm),
                loss(r, Strategy::Bps),
            );
            bps <= fm && fm <= s
        })
        .count();
    Ok(CellResult {
        cell_id: spec.cell_id,
        scenario: spec.scenario,
        n: setup.n,
        p: setup.p,
        m: setup.m,
        c: spec.c,
        c_tilde: spec.c_tilde,
        repetitions: reps.len(),
        l_b: setup.l_b,
        strategies,
        pairs,
        ordering_fraction: ordered as f64 / reps.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell_id: usize,
    pub n: usize,
    pub c: f64,
    pub c_tilde: f64,
    pub error: String,
    pub numerical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellChecks {
    pub cell_id: usize,
    pub ratios_in_band: bool,
    pub mean_ordering: bool,
    pub ordering_fraction_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: SimulationConfig,
    pub master_seed: u64,
    pub cells: Vec<CellResult>,
    pub checks: Vec<CellChecks>,
    pub failures: Vec<CellFailure>,
}

impl StudyReport {
    pub fn has_numerical_failure(&self) -> bool {
        self.failures.iter().any(|f| f.numerical)
    }
}

/// Runs every cell in order. A failing cell is recorded and the study continues.
pub fn run_study(config: &SimulationConfig) -> Result<StudyReport> {
    config.validate()?;
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for spec in config.cells() {
        match run_cell(&spec) {
            Ok(cell) => cells.push(cell),
            Err(e) => failures.push(CellFailure {
                cell_id: spec.cell_id,
                n: spec.n,
                c: spec.c,
                c_tilde: spec.c_tilde,
                numerical: e.is_numerical(),
                error: e.to_string(),
            }),
        }
    }
    let (lo, hi, frac) = (
        config.tolerance("ratio_lower"),
        config.tolerance("ratio_upper"),
        config.tolerance("ordering_fraction"),
    );
    let checks = cells
        .iter()
        .map(|cell| CellChecks {
            cell_id: cell.cell_id,
            ratios_in_band: cell.pairs.iter().all(|p| p.ratio >= lo && p.ratio <= hi),
            mean_ordering: cell.mean_ordering_holds(),
            ordering_fraction_ok: cell.ordering_fraction >= frac,
        })
        .collect();
    Ok(StudyReport {
        config: config.clone(),
        master_seed: config.master_seed,
        cells,
        checks,
        failures,
    })
}

const STRATEGY_COLUMNS: [Strategy; 4] = Strategy::ALL;

fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "cell_id",
        "scenario",
        "n",
        "p",
        "m",
        "c",
        "c_tilde",
        "repetitions",
        "l_b",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for prefix in ["mean_loss", "se_loss", "mean_true_loss"] {
        for s in STRATEGY_COLUMNS {
            h.push(format!("{prefix}_{s}"));
        }
    }
    for prefix in ["diff", "se_diff", "limit", "ratio"] {
        for d in DifferencePair::ALL {
            h.push(format!("{prefix}_{}", d.as_str()));
        }
    }
    h.push("ordering_fraction".into());
    h.push("error".into());
    h
}

/// `cells.csv` contents. The first line is `# config: <json>`.
pub fn cells_csv(report: &StudyReport) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "# config: {}", serde_json::to_string(&report.config)?).expect("write to string");
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = csv_header();
    w.write_record(&header).map_err(csv_error)?;
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for cell in &report.cells {
        let mut row = vec![
            cell.cell_id.to_string(),
            cell.scenario.to_string(),
            cell.n.to_string(),
            cell.p.to_string(),
            cell.m.to_string(),
            cell.c.to_string(),
            cell.c_tilde.to_string(),
            cell.repetitions.to_string(),
            cell.l_b.to_string(),
        ];
        for f in [
            |s: &StrategySummary| s.empirical_loss.mean,
            |s: &StrategySummary| s.empirical_loss.std_error,
            |s: &StrategySummary| s.true_loss.mean,
        ] {
            row.extend(STRATEGY_COLUMNS.iter().map(|&s| f(cell.strategy(s)).to_string()));
        }
        for f in [
            |p: &PairSummary| p.difference.mean,
            |p: &PairSummary| p.difference.std_error,
            |p: &PairSummary| p.limit,
            |p: &PairSummary| p.ratio,
        ] {
            row.extend(DifferencePair::ALL.iter().map(|&d| f(cell.pair(d)).to_string()));
        }
        row.push(cell.ordering_fraction.to_string());
        row.push(String::new());
        rows.push((cell.cell_id, row));
    }
    for f in &report.failures {
        let mut row = vec![String::new(); header.len()];
        row[0] = f.cell_id.to_string();
        row[1] = report.config.scenario.to_string();
        row[2] = f.n.to_string();
        row[5] = f.c.to_string();
        row[6] = f.c_tilde.to_string();
        row[header.len() - 1] = f.error.clone();
        rows.push((f.cell_id, row));
    }
    rows.sort_by_key(|(id, _)| *id);
    for (_, row) in rows {
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes `cells.csv` and `report.json` into `dir`, creating it if needed.
pub fn write_study(report: &StudyReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("cells.csv"), cells_csv(report)?)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    Ok(())
}
