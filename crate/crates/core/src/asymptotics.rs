//! Closed-form high-dimensional limits of the out-of-sample variance and
//! relative loss (and, identically, of their empirical counterparts) for the
//! sample, FM, BPS and target portfolios.
//!
//! `c` is the in-sample concentration `p/n`. An infinite target loss
//! (`l_b = f64::INFINITY`) is accepted everywhere and mapped to the analytic
//! limit of each expression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Strategy;

/// Tolerance for the `l_b = v_b / v_gmv - 1` consistency check.
pub const LB_CONSISTENCY_TOLERANCE: f64 = 1e-12;

/// Scalars consumed by the limit formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticInputs {
    pub c: f64,
    pub c_tilde: Option<f64>,
    pub v_gmv: Option<f64>,
    pub v_b: Option<f64>,
    pub l_b: f64,
}

impl AsymptoticInputs {
    /// Inputs for the loss limits only.
    pub fn from_loss(c: f64, l_b: f64) -> Result<Self> {
        let inputs = AsymptoticInputs {
            c,
            c_tilde: None,
            v_gmv: None,
            v_b: None,
            l_b,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// Inputs for both families of limits; `l_b` is derived from the variances.
    pub fn from_variances(c: f64, v_gmv: f64, v_b: f64) -> Result<Self> {
        if !(v_gmv > 0.0) || !(v_b > 0.0) {
            return Err(Error::Domain(format!(
                "variances must be positive (v_gmv = {v_gmv}, v_b = {v_b})"
            )));
        }
        let inputs = AsymptoticInputs {
            c,
            c_tilde: None,
            v_gmv: Some(v_gmv),
            v_b: Some(v_b),
            l_b: v_b / v_gmv - 1.0,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn with_c_tilde(mut self, c_tilde: f64) -> Result<Self> {
        if !(c_tilde > 0.0) || !c_tilde.is_finite() {
            return Err(Error::Domain(format!("c_tilde must be positive, got {c_tilde}")));
        }
        self.c_tilde = Some(c_tilde);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_c(self.c)?;
        check_lb(self.l_b)?;
        if let (Some(v), Some(vb)) = (self.v_gmv, self.v_b) {
            let implied = vb / v - 1.0;
            let scale = 1.0_f64.max(self.l_b.abs());
            if (implied - self.l_b).abs() > LB_CONSISTENCY_TOLERANCE * scale {
                return Err(Error::Domain(format!(
                    "l_b = {} inconsistent with v_b / v_gmv - 1 = {implied}",
                    self.l_b
                )));
            }
        }
        Ok(())
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Domain(format!("concentration c must lie in (0, 1), got {c}")));
    }
    Ok(())
}

fn check_lb(l_b: f64) -> Result<()> {
    if !(l_b >= 0.0) {
        return Err(Error::Domain(format!(
            "target loss l_b must be non-negative, got {l_b}"
        )));
    }
    Ok(())
}

/// `L_b / (L_b + c)`.
pub fn limit_alpha_fm(c: f64, l_b: f64) -> Result<f64> {
    check_lb(l_b)?;
    if l_b == 0.0 && c == 0.0 {
        return Err(Error::UndefinedLimit("alpha_FM at c = l_b = 0".into()));
    }
    check_c(c)?;
    if l_b.is_infinite() {
        return Ok(1.0);
    }
    Ok(l_b / (l_b + c))
}

/// `(1-c) L_b / (c + (1-c) L_b)`.
pub fn limit_alpha_bps(c: f64, l_b: f64) -> Result<f64> {
    check_c(c)?;
    check_lb(l_b)?;
    if l_b.is_infinite() {
        return Ok(1.0);
    }
    Ok((1.0 - c) * l_b / (c + (1.0 - c) * l_b))
}

/// `alpha^2 c/(1-c) + (1-alpha)^2 L_b`, with the `L_b -> inf` limit handled.
fn shrinkage_loss(alpha: f64, c: f64, l_b: f64) -> f64 {
    let estimation = alpha * alpha * c / (1.0 - c);
    if l_b.is_infinite() {
        // (1 - alpha)^2 decays like 1/L_b^2 for both rules.
        return estimation;
    }
    estimation + (1.0 - alpha) * (1.0 - alpha) * l_b
}

/// Limit of the (empirical) out-of-sample relative loss.
pub fn limit_oos_loss(strategy: Strategy, inputs: &AsymptoticInputs) -> Result<f64> {
    inputs.validate()?;
    let (c, l_b) = (inputs.c, inputs.l_b);
    Ok(match strategy {
        Strategy::Traditional => c / (1.0 - c),
        Strategy::Fm => shrinkage_loss(limit_alpha_fm(c, l_b)?, c, l_b),
        Strategy::Bps => shrinkage_loss(limit_alpha_bps(c, l_b)?, c, l_b),
        Strategy::Target => l_b,
    })
}

/// Limit of the (empirical) out-of-sample variance.
pub fn limit_oos_variance(strategy: Strategy, inputs: &AsymptoticInputs) -> Result<f64> {
    inputs.validate()?;
    let c = inputs.c;
    let v_gmv = inputs.v_gmv.ok_or(Error::MissingInput("v_gmv"))?;
    Ok(match strategy {
        Strategy::Traditional => v_gmv / (1.0 - c),
        Strategy::Fm | Strategy::Bps => {
            let v_b = inputs.v_b.ok_or(Error::MissingInput("v_b"))?;
            let alpha = if strategy == Strategy::Fm {
                limit_alpha_fm(c, inputs.l_b)?
            } else {
                limit_alpha_bps(c, inputs.l_b)?
            };
            v_gmv + alpha * alpha * c / (1.0 - c) * v_gmv + (1.0 - alpha) * (1.0 - alpha) * (v_b - v_gmv)
        }
        Strategy::Target => inputs.v_b.ok_or(Error::MissingInput("v_b"))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferencePair {
    SMinusFm,
    SMinusBps,
    FmMinusBps,
}

impl DifferencePair {
    pub const ALL: [DifferencePair; 3] = [
        DifferencePair::SMinusFm,
        DifferencePair::SMinusBps,
        DifferencePair::FmMinusBps,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DifferencePair::SMinusFm => "s_minus_fm",
            DifferencePair::SMinusBps => "s_minus_bps",
            DifferencePair::FmMinusBps => "fm_minus_bps",
        }
    }

    /// The (minuend, subtrahend) strategies.
    pub fn strategies(self) -> (Strategy, Strategy) {
        match self {
            DifferencePair::SMinusFm => (Strategy::Traditional, Strategy::Fm),
            DifferencePair::SMinusBps => (Strategy::Traditional, Strategy::Bps),
            DifferencePair::FmMinusBps => (Strategy::Fm, Strategy::Bps),
        }
    }
}

impl std::str::FromStr for DifferencePair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DifferencePair::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown difference pair '{s}'")))
    }
}

/// Limit of the difference between two strategies' relative losses; all
/// three are non-negative.
pub fn limit_loss_difference(pair: DifferencePair, c: f64, l_b: f64) -> Result<f64> {
    check_c(c)?;
    check_lb(l_b)?;
    if l_b.is_infinite() {
        return Ok(0.0);
    }
    let one_minus = 1.0 - c;
    let fm_den = c + l_b;
    let bps_den = c + one_minus * l_b;
    Ok(match pair {
        DifferencePair::SMinusFm => c * c * (c + l_b + c * l_b) / (one_minus * fm_den * fm_den),
        DifferencePair::SMinusBps => c * c / (one_minus * bps_den),
        DifferencePair::FmMinusBps => c.powi(4) * l_b * l_b / (one_minus * fm_den * fm_den * bps_den),
    })
}

/// Behaviour of the loss limits as `c -> 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBehaviour {
    /// Where the finite values were evaluated (`1 - eps`).
    pub c: f64,
    pub traditional_loss: f64,
    pub fm_loss: f64,
    pub bps_loss: f64,
    pub traditional_diverges: bool,
    pub fm_diverges: bool,
    pub bps_limit: f64,
}

/// Evaluates the loss limits at `c = 1 - eps`. The traditional and FM
/// losses blow up like `1/(1-c)` (FM only when `l_b > 0`); the BPS loss
/// tends to `l_b`.
pub fn limit_fm_as_c_to_one(l_b: f64, eps: f64) -> Result<BoundaryBehaviour> {
    check_lb(l_b)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    let c = 1.0 - eps;
    let inputs = AsymptoticInputs::from_loss(c, l_b)?;
    Ok(BoundaryBehaviour {
        c,
        traditional_loss: limit_oos_loss(Strategy::Traditional, &inputs)?,
        fm_loss: limit_oos_loss(Strategy::Fm, &inputs)?,
        bps_loss: limit_oos_loss(Strategy::Bps, &inputs)?,
        traditional_diverges: true,
        fm_diverges: l_b > 0.0,
        bps_limit: l_b,
    })
}

/// One row of the limit table emitted by the `limits` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub c: f64,
    pub l_b: f64,
    pub alpha_fm: f64,
    pub alpha_bps: f64,
    pub loss_traditional: f64,
    pub loss_fm: f64,
    pub loss_bps: f64,
    pub loss_target: f64,
    pub s_minus_fm: f64,
    pub s_minus_bps: f64,
    pub fm_minus_bps: f64,
}

pub fn limit_row(c: f64, l_b: f64) -> Result<LimitRow> {
    let inputs = AsymptoticInputs::from_loss(c, l_b)?;
    Ok(LimitRow {
        c,
        l_b,
        alpha_fm: limit_alpha_fm(c, l_b)?,
        alpha_bps: limit_alpha_bps(c, l_b)?,
        loss_traditional: limit_oos_loss(Strategy::Traditional, &inputs)?,
        loss_fm: limit_oos_loss(Strategy::Fm, &inputs)?,
        loss_bps: limit_oos_loss(Strategy::Bps, &inputs)?,
        loss_target: limit_oos_loss(Strategy::Target, &inputs)?,
        s_minus_fm: limit_loss_difference(DifferencePair::SMinusFm, c, l_b)?,
        s_minus_bps: limit_loss_difference(DifferencePair::SMinusBps, c, l_b)?,
        fm_minus_bps: limit_loss_difference(DifferencePair::FmMinusBps, c, l_b)?,
    })
}

/// Rows for every `(c, l_b)` pair, `c` varying slowest.
pub fn limit_table(c_grid: &[f64], lb_grid: &[f64]) -> Result<Vec<LimitRow>> {
    c_grid
        .iter()
        .flat_map(|&c| lb_grid.iter().map(move |&l| limit_row(c, l)))
        .collect()
}
