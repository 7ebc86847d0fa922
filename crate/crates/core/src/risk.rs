//! Out-of-sample variance and relative loss of a portfolio, under the true
//! covariance and under an estimate from a disjoint evaluation window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CovarianceEstimate, GmvSolution, PortfolioWeights, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub strategy: Strategy,
    pub oos_variance: Option<f64>,
    pub oos_relative_loss: Option<f64>,
    pub empirical_oos_variance: Option<f64>,
    pub empirical_oos_relative_loss: Option<f64>,
}

impl PerformanceRecord {
    pub fn empty(strategy: Strategy) -> Self {
        PerformanceRecord {
            strategy,
            oos_variance: None,
            oos_relative_loss: None,
            empirical_oos_variance: None,
            empirical_oos_relative_loss: None,
        }
    }
}

/// `w' Sigma w`.
pub fn oos_variance(w: &PortfolioWeights, sigma: &CovarianceEstimate) -> Result<f64> {
    sigma.quadratic_form(w.weights())
}

/// `1'Sigma^{-1}1 * w'Sigma w - 1`.
pub fn oos_relative_loss(w: &PortfolioWeights, sigma: &CovarianceEstimate) -> Result<f64> {
    PopulationEvaluator::new(sigma)?.relative_loss(w)
}

/// `w' S_out w`.
pub fn empirical_oos_variance(w: &PortfolioWeights, s_out: &CovarianceEstimate) -> Result<f64> {
    s_out.quadratic_form(w.weights())
}

/// `(1 - p/m) * 1'S_out^{-1}1 * w'S_out w - 1`.
pub fn empirical_oos_relative_loss(
    w: &PortfolioWeights,
    s_out: &CovarianceEstimate,
    p: usize,
    m: usize,
) -> Result<f64> {
    EmpiricalEvaluator::new(s_out, p, m)?.relative_loss(w)
}

/// `1 / ((1 - p/m) * 1'S_out^{-1}1)`, the loss normaliser.
pub fn consistent_gmv_variance_estimate(s_out: &CovarianceEstimate, p: usize, m: usize) -> Result<f64> {
    Ok(EmpiricalEvaluator::new(s_out, p, m)?.gmv_variance_estimate())
}

/// Evaluates many portfolios against one known covariance matrix.
#[derive(Debug, Clone)]
pub struct PopulationEvaluator<'a> {
    sigma: &'a CovarianceEstimate,
    gmv: GmvSolution,
}

impl<'a> PopulationEvaluator<'a> {
    pub fn new(sigma: &'a CovarianceEstimate) -> Result<Self> {
        Ok(PopulationEvaluator {
            sigma,
            gmv: sigma.gmv()?,
        })
    }

    pub fn gmv_variance(&self) -> f64 {
        self.gmv.variance()
    }

    pub fn variance(&self, w: &PortfolioWeights) -> Result<f64> {
        oos_variance(w, self.sigma)
    }

    pub fn relative_loss(&self, w: &PortfolioWeights) -> Result<f64> {
        Ok(self.gmv.ones_inv_ones * self.variance(w)? - 1.0)
    }
}

/// Evaluates many portfolios against one out-of-sample window estimate.
///
/// The variance path works for any `S_out`; the loss path needs `m > p`
/// and an invertible `S_out`, and reports why it is unavailable otherwise.
#[derive(Debug, Clone)]
pub struct EmpiricalEvaluator<'a> {
    s_out: &'a CovarianceEstimate,
    correction: f64,
    gmv: GmvSolution,
}

impl<'a> EmpiricalEvaluator<'a> {
    pub fn new(s_out: &'a CovarianceEstimate, p: usize, m: usize) -> Result<Self> {
        if m <= p {
            return Err(Error::OutOfSampleTooShort { p, m });
        }
        let gmv = s_out.gmv()?;
        Ok(EmpiricalEvaluator {
            s_out,
            correction: 1.0 - p as f64 / m as f64,
            gmv,
        })
    }

    pub fn gmv_variance_estimate(&self) -> f64 {
        1.0 / (self.correction * self.gmv.ones_inv_ones)
    }

    pub fn variance(&self, w: &PortfolioWeights) -> Result<f64> {
        empirical_oos_variance(w, self.s_out)
    }

    pub fn relative_loss(&self, w: &PortfolioWeights) -> Result<f64> {
        Ok(self.correction * self.gmv.ones_inv_ones * self.variance(w)? - 1.0)
    }
}
