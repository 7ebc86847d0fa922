//! GMV weight estimators: the sample (traditional) estimator, the FM and
//! BPS shrinkage estimators, which differ only in the intensity formula, and
//! the equally weighted target they shrink towards.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, CovarianceEstimate, GmvSolution, PortfolioWeights, ReturnsWindow, Strategy};

/// `psi - 1` below this counts as a target that coincides with the sample
/// GMV portfolio.
pub const DEGENERATE_TARGET_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShrinkageKind {
    Fm,
    Bps,
}

impl ShrinkageKind {
    pub fn strategy(self) -> Strategy {
        match self {
            ShrinkageKind::Fm => Strategy::Fm,
            ShrinkageKind::Bps => Strategy::Bps,
        }
    }
}

/// Weight on the sample GMV portfolio; `1 - value` goes to the target.
///
/// The FM value is kept unclamped even outside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageIntensity {
    pub value: f64,
    pub kind: ShrinkageKind,
}

impl ShrinkageIntensity {
    /// Diagnostic: the intensity left the unit interval.
    pub fn outside_unit_interval(&self) -> bool {
        !(0.0..=1.0).contains(&self.value)
    }
}

/// Statistics of one in-sample window shared by both intensities.
#[derive(Debug, Clone)]
pub struct WindowStatistics {
    pub gmv: GmvSolution,
    /// `b'Sb`.
    pub target_variance: f64,
    pub p: usize,
    pub n: usize,
}

impl WindowStatistics {
    pub fn new(s: &CovarianceEstimate, b: &PortfolioWeights, n: usize) -> Result<Self> {
        let target_variance = s.quadratic_form(b.weights())?;
        Ok(WindowStatistics {
            gmv: s.gmv()?,
            target_variance,
            p: s.dim(),
            n,
        })
    }

    /// `psi = 1'S^{-1}1 * b'Sb`, at least 1 up to rounding.
    pub fn psi(&self) -> f64 {
        self.gmv.ones_inv_ones * self.target_variance
    }
}

/// Every entry `1/p`.
pub fn equally_weighted_target(p: usize) -> Result<PortfolioWeights> {
    if p == 0 {
        return Err(Error::InvalidParameter("target needs at least one asset".into()));
    }
    let mut w = DVector::from_element(p, 1.0 / p as f64);
    let sum = w.sum();
    w /= sum;
    Ok(PortfolioWeights::new_unchecked(w, Strategy::Target))
}

/// `1 - (p-3)/(n-p+2) * (psi - 1)^{-1}`.
pub fn fm_intensity_from_psi(psi: f64, p: usize, n: usize) -> Result<ShrinkageIntensity> {
    if p < 4 {
        return Err(Error::Domain(format!("FM intensity needs p >= 4, got p = {p}")));
    }
    if n <= p {
        return Err(Error::Domain(format!("FM intensity needs n > p, got n = {n}, p = {p}")));
    }
    let excess = psi - 1.0;
    if !(excess >= DEGENERATE_TARGET_THRESHOLD) {
        return Err(Error::DegenerateTarget { excess });
    }
    let factor = (p as f64 - 3.0) / (n as f64 - p as f64 + 2.0);
    Ok(ShrinkageIntensity {
        value: 1.0 - factor / excess,
        kind: ShrinkageKind::Fm,
    })
}

/// With `r = p/n` and `q = (1-r) psi - 1`: `(1-r) q / (r + (1-r) q)`.
pub fn bps_intensity_from_psi(psi: f64, p: usize, n: usize) -> Result<ShrinkageIntensity> {
    if p == 0 || n <= p {
        return Err(Error::Domain(format!(
            "BPS intensity needs n > p >= 1, got n = {n}, p = {p}"
        )));
    }
    let r = p as f64 / n as f64;
    let q = (1.0 - r) * psi - 1.0;
    let denom = r + (1.0 - r) * q;
    if !(denom.abs() > f64::EPSILON) {
        return Err(Error::DegenerateDenominator);
    }
    Ok(ShrinkageIntensity {
        value: (1.0 - r) * q / denom,
        kind: ShrinkageKind::Bps,
    })
}

pub fn fm_intensity(s: &CovarianceEstimate, b: &PortfolioWeights, p: usize, n: usize) -> Result<ShrinkageIntensity> {
    check_dim(s, p)?;
    fm_intensity_from_psi(WindowStatistics::new(s, b, n)?.psi(), p, n)
}

pub fn bps_intensity(s: &CovarianceEstimate, b: &PortfolioWeights, p: usize, n: usize) -> Result<ShrinkageIntensity> {
    check_dim(s, p)?;
    bps_intensity_from_psi(WindowStatistics::new(s, b, n)?.psi(), p, n)
}

fn check_dim(s: &CovarianceEstimate, p: usize) -> Result<()> {
    if s.dim() != p {
        return Err(Error::Dimension(format!("p = {p} but covariance is {0}x{0}", s.dim())));
    }
    Ok(())
}

/// `alpha * w_sample + (1 - alpha) * b`.
pub fn shrinkage_weights(
    alpha: ShrinkageIntensity,
    w_sample: &PortfolioWeights,
    b: &PortfolioWeights,
) -> Result<PortfolioWeights> {
    if w_sample.len() != b.len() {
        return Err(Error::Dimension(format!(
            "sample weights have length {} but target has length {}",
            w_sample.len(),
            b.len()
        )));
    }
    let w = w_sample.weights() * alpha.value + b.weights() * (1.0 - alpha.value);
    Ok(PortfolioWeights::new_unchecked(w, alpha.kind.strategy()))
}

/// All four strategies estimated on one in-sample window.
#[derive(Debug, Clone)]
pub struct WindowEstimates {
    pub weights: BTreeMap<Strategy, PortfolioWeights>,
    pub fm: ShrinkageIntensity,
    pub bps: ShrinkageIntensity,
}

impl WindowEstimates {
    pub fn get(&self, strategy: Strategy) -> &PortfolioWeights {
        &self.weights[&strategy]
    }
}

pub fn estimate_all(window: &ReturnsWindow, b: &PortfolioWeights) -> Result<WindowEstimates> {
    let (p, n) = (window.asset_count(), window.len());
    if n <= p + 2 {
        return Err(Error::InsufficientData(format!(
            "in-sample window of {n} observations is too short for p = {p} (need more than p + 2)"
        )));
    }
    let s = model::sample_covariance(window)?;
    estimate_from_covariance(&s, b)
}

/// As [`estimate_all`] but from an already computed in-sample covariance.
pub fn estimate_from_covariance(s: &CovarianceEstimate, b: &PortfolioWeights) -> Result<WindowEstimates> {
    let n = s
        .sample_size()
        .ok_or_else(|| Error::InvalidParameter("estimators need a sample covariance".into()))?;
    let stats = WindowStatistics::new(s, b, n)?;
    let psi = stats.psi();
    let fm = fm_intensity_from_psi(psi, stats.p, n)?;
    let bps = bps_intensity_from_psi(psi, stats.p, n)?;
    let sample = stats.gmv.weights();
    let mut weights = BTreeMap::new();
    weights.insert(Strategy::Fm, shrinkage_weights(fm, &sample, b)?);
    weights.insert(Strategy::Bps, shrinkage_weights(bps, &sample, b)?);
    weights.insert(Strategy::Target, b.clone());
    weights.insert(Strategy::Traditional, sample);
    Ok(WindowEstimates { weights, fm, bps })
}
