//! Browser bindings: limit curves, a difference surface and a small
//! simulated cell. Every export returns a JSON string.

use hdgmv::asymptotics::{limit_loss_difference, limit_row, DifferencePair};
use hdgmv::datagen::Scenario;
use hdgmv::montecarlo::{run_cell, CellSpec};
use hdgmv::Strategy;
use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest repetition count accepted by [`simulate_cell`].
pub const MAX_REPETITIONS: usize = 500;
/// Largest `n` accepted by [`simulate_cell`].
pub const MAX_N: usize = 400;

#[derive(Debug, Serialize)]
pub struct Curves {
    pub l_b: f64,
    pub c: Vec<f64>,
    pub traditional: Vec<f64>,
    pub fm: Vec<f64>,
    pub bps: Vec<f64>,
    pub target: Vec<f64>,
}

fn grid(points: usize, lo: f64, hi: f64) -> Vec<f64> {
    let step = (hi - lo) / (points + 1) as f64;
    (1..=points).map(|k| lo + k as f64 * step).collect()
}

pub fn curves(l_b: f64, points: usize) -> hdgmv::Result<Curves> {
    if points == 0 || points > 10_000 {
        return Err(hdgmv::Error::InvalidParameter(format!(
            "points must be in 1..=10000, got {points}"
        )));
    }
    let mut out = Curves {
        l_b,
        c: Vec::new(),
        traditional: Vec::new(),
        fm: Vec::new(),
        bps: Vec::new(),
        target: Vec::new(),
    };
    for c in grid(points, 0.0, 1.0) {
        let row = limit_row(c, l_b)?;
        out.c.push(c);
        out.traditional.push(row.loss_traditional);
        out.fm.push(row.loss_fm);
        out.bps.push(row.loss_bps);
        out.target.push(row.loss_target);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct Surface {
    pub pair: &'static str,
    pub c: Vec<f64>,
    pub l_b: Vec<f64>,
    /// `values[i][j]` at `c[i]`, `l_b[j]`.
    pub values: Vec<Vec<f64>>,
    pub max: f64,
}

pub fn surface(pair: &str, c_points: usize, lb_max: f64, lb_points: usize) -> hdgmv::Result<Surface> {
    let pair = DifferencePair::ALL
        .into_iter()
        .find(|d| d.as_str() == pair)
        .ok_or_else(|| hdgmv::Error::InvalidParameter(format!("unknown pair '{pair}'")))?;
    if c_points == 0 || lb_points < 2 || c_points * lb_points > 250_000 {
        return Err(hdgmv::Error::InvalidParameter("grid too small or too large".into()));
    }
    if !(lb_max > 0.0 && lb_max.is_finite()) {
        return Err(hdgmv::Error::InvalidParameter(format!(
            "lb_max must be positive, got {lb_max}"
        )));
    }
    let c = grid(c_points, 0.0, 1.0);
    let l_b: Vec<f64> = (0..lb_points)
        .map(|k| lb_max * k as f64 / (lb_points - 1) as f64)
        .collect();
    let values = c
        .iter()
        .map(|&ci| l_b.iter().map(|&l| limit_loss_difference(pair, ci, l)).collect())
        .collect::<hdgmv::Result<Vec<Vec<f64>>>>()?;
    let max = values.iter().flatten().copied().fold(0.0, f64::max);
    Ok(Surface {
        pair: pair.as_str(),
        c,
        l_b,
        values,
        max,
    })
}

pub fn cell(n: usize, c: f64, c_tilde: f64, repetitions: usize, seed: u64) -> hdgmv::Result<Value> {
    if n > MAX_N || repetitions > MAX_REPETITIONS {
        return Err(hdgmv::Error::InvalidParameter(format!(
            "the demo caps n at {MAX_N} and repetitions at {MAX_REPETITIONS}"
        )));
    }
    let spec = CellSpec {
        cell_id: 0,
        scenario: Scenario::T5,
        n,
        c,
        c_tilde,
        repetitions,
        master_seed: seed,
    };
    let r = run_cell(&spec)?;
    let losses: Value = Strategy::ALL
        .iter()
        .map(|&s| {
            let x = r.strategy(s);
            (
                s.as_str().to_string(),
                json!({ "empirical": x.empirical_loss.mean, "empirical_se": x.empirical_loss.std_error, "true": x.true_loss.mean }),
            )
        })
        .collect::<serde_json::Map<_, _>>()
        .into();
    let pairs: Vec<Value> = r
        .pairs
        .iter()
        .map(|p| {
            json!({
                "pair": p.pair.as_str(),
                "difference": p.difference.mean,
                "limit": p.limit,
                "ratio": p.ratio,
                "ratio_se": p.ratio_std_error,
            })
        })
        .collect();
    Ok(json!({
        "n": r.n, "p": r.p, "m": r.m, "l_b": r.l_b, "repetitions": r.repetitions,
        "losses": losses, "pairs": pairs, "ordering_fraction": r.ordering_fraction,
    }))
}

fn to_js<T: Serialize>(r: hdgmv::Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Limit losses of all strategies over `c` in (0, 1) for a fixed `l_b`.
#[wasm_bindgen(js_name = limitCurves)]
pub fn limit_curves(l_b: f64, points: usize) -> Result<String, JsError> {
    to_js(curves(l_b, points))
}

/// Limit loss differences of one pair (`s_minus_fm`, `s_minus_bps`, `fm_minus_bps`) over a (c, l_b) grid.
#[wasm_bindgen(js_name = differenceSurface)]
pub fn difference_surface(pair: &str, c_points: usize, lb_max: f64, lb_points: usize) -> Result<String, JsError> {
    to_js(surface(pair, c_points, lb_max, lb_points))
}

/// Runs one small t5 cell and compares the mean differences with their limits.
#[wasm_bindgen(js_name = simulateCell)]
pub fn simulate_cell(n: usize, c: f64, c_tilde: f64, repetitions: usize, seed: u64) -> Result<String, JsError> {
    to_js(cell(n, c, c_tilde, repetitions, seed))
}
