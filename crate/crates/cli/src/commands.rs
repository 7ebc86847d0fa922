//! Subcommand implementations.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Days, NaiveDate, Weekday};
use hdgmv::asymptotics::limit_table;
use hdgmv::backtest::{load_returns_csv, run_backtest, series_csv, summarize, BacktestConfig, ReturnsDataset};
use hdgmv::datagen::{Scenario, ScenarioModel};
use hdgmv::montecarlo::{run_study, write_study, SimulationConfig};
use hdgmv::rmt_verify::{self, VerifyConfig};
use hdgmv::rng::{label, SeedSpec};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{build, echo, io_error, load_object, pretty, require, set, write_file, CliError};
use crate::{BacktestArgs, GenDataArgs, LimitsArgs, SimulateArgs, VerifyArgs};

fn default_lb() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitsConfig {
    c: Vec<f64>,
    #[serde(default = "default_lb")]
    lb: Vec<f64>,
}

const LIMIT_COLUMNS: [&str; 11] = [
    "c",
    "l_b",
    "alpha_fm",
    "alpha_bps",
    "loss_traditional",
    "loss_fm",
    "loss_bps",
    "loss_target",
    "s_minus_fm",
    "s_minus_bps",
    "fm_minus_bps",
];

pub fn limits(args: LimitsArgs) -> Result<(), CliError> {
    let mut map = load_object(args.config.as_deref())?;
    set(&mut map, "c", args.c);
    set(&mut map, "lb", args.lb);
    require(&map, "c", "--c")?;
    let cfg: LimitsConfig = build(map, "limits")?;
    let rows = limit_table(&cfg.c, &cfg.lb)?;

    let mut out = String::new();
    writeln!(out, "# config: {}", echo(&cfg)).unwrap();
    writeln!(out, "{}", LIMIT_COLUMNS.join(",")).unwrap();
    for r in rows {
        let values = [
            r.c,
            r.l_b,
            r.alpha_fm,
            r.alpha_bps,
            r.loss_traditional,
            r.loss_fm,
            r.loss_bps,
            r.loss_target,
            r.s_minus_fm,
            r.s_minus_bps,
            r.fm_minus_bps,
        ];
        let line: Vec<String> = values.iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    emit(args.out.as_deref(), &out)
}

fn default_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenDataConfig {
    scenario: Scenario,
    p: usize,
    t: usize,
    master_seed: u64,
    #[serde(default = "default_start_date")]
    start_date: NaiveDate,
}

/// `count` consecutive weekdays from `start`, rolling a weekend start forward.
pub fn weekdays(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

pub fn asset_ids(p: usize) -> Vec<String> {
    let width = p.to_string().len();
    (1..=p).map(|i| format!("A{i:0width$}")).collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn gen_data(args: GenDataArgs) -> Result<(), CliError> {
    let mut map = load_object(args.config.as_deref())?;
    if let Some(s) = &args.scenario {
        set(&mut map, "scenario", Some(s.parse::<Scenario>()?));
    }
    set(&mut map, "p", args.p);
    set(&mut map, "t", args.t);
    set(&mut map, "master_seed", args.seed);
    if let Some(d) = &args.start_date {
        let date = NaiveDate::parse_from_str(d, "%Y-%m-%d")
            .map_err(|e| CliError::Validation(format!("bad --start-date '{d}': {e}")))?;
        set(&mut map, "start_date", Some(date));
    }
    require(&map, "scenario", "--scenario")?;
    require(&map, "p", "--p")?;
    require(&map, "t", "--t")?;
    require(&map, "master_seed", "--seed")?;
    let cfg: GenDataConfig = build(map, "gen-data")?;
    if cfg.t == 0 {
        return Err(CliError::Validation("t must be positive".into()));
    }

    let master = SeedSpec::new(cfg.master_seed);
    let model = ScenarioModel::draw(cfg.scenario, cfg.p, &master.children(&[label("params"), cfg.p as u64]))?;
    let path = model.simulate(cfg.t, &master.child(label("gen-data")))?;
    let dataset = ReturnsDataset::new(asset_ids(cfg.p), weekdays(cfg.start_date, cfg.t), path.into_values())?;

    let dir = args.out.unwrap_or_else(|| PathBuf::from("."));
    let config_line = format!("config: {}", echo(&cfg));
    write_file(&dir.join("returns.csv"), &dataset.to_csv(Some(&config_line))?)?;

    let params = model.params();
    let mut sidecar = json!({
        "config": cfg,
        "master_seed": cfg.master_seed,
        "scenario": cfg.scenario,
        "assets": dataset.assets(),
        "mu": params.mu.0.iter().collect::<Vec<_>>(),
        "sigma": rows(params.sigma.matrix()),
        "unconditional_covariance": rows(model.unconditional_covariance().matrix()),
    });
    if let Some(v) = model.var_params() {
        sidecar["var"] = json!({ "gamma": v.gamma.iter().collect::<Vec<_>>() });
    }
    if let Some(g) = model.garch_params() {
        sidecar["garch"] = json!({
            "alpha0": g.alpha0.iter().collect::<Vec<_>>(),
            "alpha1": g.alpha1.iter().collect::<Vec<_>>(),
            "beta1": g.beta1.iter().collect::<Vec<_>>(),
            "corr": rows(&g.corr),
        });
    }
    write_file(&dir.join("params.json"), &pretty(&sidecar))?;
    eprintln!(
        "wrote {} x {} {} panel to {}",
        cfg.p,
        cfg.t,
        cfg.scenario,
        dir.display()
    );
    Ok(())
}

fn parse_tolerance(s: &str) -> Result<(String, f64), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--tolerance expects KEY=VALUE, got '{s}'")))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("--tolerance {k}: '{v}' is not a number")))?;
    Ok((k.trim().to_string(), v))
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut map = load_object(args.config.as_deref())?;
    if let Some(s) = &args.scenario {
        set(&mut map, "scenario", Some(s.parse::<Scenario>()?));
    }
    set(&mut map, "n_grid", args.n);
    set(&mut map, "c_grid", args.c);
    set(&mut map, "c_tilde_grid", args.c_tilde);
    set(&mut map, "repetitions", args.reps);
    set(&mut map, "master_seed", args.seed);
    if !args.tolerances.is_empty() {
        let mut tol = match map.remove("tolerances") {
            Some(Value::Object(t)) => t,
            Some(_) => return Err(CliError::Validation("\"tolerances\" must be an object".into())),
            None => Map::new(),
        };
        for s in &args.tolerances {
            let (k, v) = parse_tolerance(s)?;
            tol.insert(k, json!(v));
        }
        map.insert("tolerances".into(), Value::Object(tol));
    }
    require(&map, "scenario", "--scenario")?;
    require(&map, "n_grid", "--n")?;
    require(&map, "c_grid", "--c")?;
    require(&map, "c_tilde_grid", "--c-tilde")?;
    require(&map, "master_seed", "--seed")?;
    let cfg: SimulationConfig = build(map, "simulate")?;

    let report = run_study(&cfg)?;
    let dir = args.out.unwrap_or_else(|| PathBuf::from("."));
    write_study(&report, &dir).map_err(|e| CliError::Validation(format!("cannot write to {}: {e}", dir.display())))?;

    for cell in &report.cells {
        let ratios: Vec<String> = cell
            .pairs
            .iter()
            .map(|p| format!("{}={:.3}", p.pair.as_str(), p.ratio))
            .collect();
        eprintln!(
            "cell {} (n={}, p={}, m={}): {} ordering={:.3}",
            cell.cell_id,
            cell.n,
            cell.p,
            cell.m,
            ratios.join(" "),
            cell.ordering_fraction
        );
    }
    let describe = |numerical: bool| -> Vec<String> {
        report
            .failures
            .iter()
            .filter(|f| f.numerical == numerical)
            .map(|f| {
                format!(
                    "cell {} (n={}, c={}, c_tilde={}): {}",
                    f.cell_id, f.n, f.c, f.c_tilde, f.error
                )
            })
            .collect()
    };
    if report.has_numerical_failure() {
        return Err(CliError::Numerical(describe(true).join("; ")));
    }
    if !report.failures.is_empty() {
        return Err(CliError::Validation(describe(false).join("; ")));
    }
    eprintln!("wrote {} cells to {}", report.cells.len(), dir.display());
    Ok(())
}

pub fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let mut map = load_object(args.config.as_deref())?;
    set(&mut map, "p", args.p);
    set(&mut map, "n", args.n);
    set(&mut map, "m", args.m);
    set(&mut map, "repetitions", args.reps);
    set(&mut map, "master_seed", args.seed);
    set(&mut map, "relative_tolerance", args.relative_tolerance);
    set(&mut map, "agreement_tolerance", args.agreement_tolerance);
    set(&mut map, "cross_tolerance", args.cross_tolerance);
    let cfg: VerifyConfig = build(map, "verify-lemmas")?;

    let report = rmt_verify::verify_quadratic_forms(&cfg)?;
    for c in &report.checks {
        eprintln!(
            "[{}] {}: value {:.6} reference {:.6} deviation {:.4} (tolerance {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.reference,
            c.relative_deviation,
            c.tolerance
        );
    }
    emit(args.out.as_deref(), &pretty(&report))
}

#[derive(Debug, Serialize)]
struct BacktestEcho<'a> {
    input: &'a Path,
    #[serde(flatten)]
    config: &'a BacktestConfig,
}

pub fn backtest(args: BacktestArgs) -> Result<(), CliError> {
    let mut map = load_object(args.config.as_deref())?;
    if let Some(input) = &args.input {
        set(&mut map, "input", Some(input));
    }
    set(&mut map, "window_n", args.n);
    set(&mut map, "window_m", args.m);
    set(&mut map, "step", args.step);
    set(&mut map, "asset_count", args.assets);
    set(&mut map, "asset_seed", args.seed);
    set(&mut map, "asset_ids", args.asset_ids);
    require(&map, "input", "--input")?;
    let input: PathBuf = match map.remove("input") {
        Some(Value::String(s)) => PathBuf::from(s),
        _ => return Err(CliError::Validation("\"input\" must be a file path".into())),
    };
    let cfg: BacktestConfig = build(map, "backtest")?;

    let full = load_returns_csv(&input).map_err(|e| CliError::Validation(format!("{}: {e}", input.display())))?;
    let dataset = cfg.select(&full)?;
    let series = run_backtest(&dataset, &cfg)?;
    let config_echo = echo(&BacktestEcho {
        input: &input,
        config: &cfg,
    });

    let dir = args.out.unwrap_or_else(|| PathBuf::from("."));
    write_file(
        &dir.join("backtest.csv"),
        &series_csv(&series, Some(&format!("config: {config_echo}")))?,
    )?;
    let summary = summarize(&series)?;
    let config_value: Value = serde_json::from_str(&config_echo).expect("echo is valid json");
    let doc = json!({
        "config": config_value,
        "assets": series.assets,
        "windows": series.windows,
        "summary": summary,
        "diagnostics": series.diagnostics,
    });
    write_file(&dir.join("summary.json"), &pretty(&doc))?;

    for s in &summary.strategies {
        eprintln!(
            "{:<12} windows {:>5}  mean variance {:.6e}  mean loss {}",
            s.strategy.as_str(),
            s.windows,
            s.mean_variance,
            s.mean_loss.map_or("n/a".to_string(), |l| format!("{l:.4}"))
        );
    }
    let numerical: Vec<String> = series
        .diagnostics
        .iter()
        .filter(|d| d.numerical)
        .map(|d| format!("window {} ending {}: {}", d.window, d.date_end, d.message))
        .collect();
    if !numerical.is_empty() {
        return Err(CliError::Numerical(numerical.join("; ")));
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| io_error("cannot write", Path::new("<stdout>"), e))
        }
    }
}
