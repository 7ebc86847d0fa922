//! Portfolio primitives: returns panels, covariance estimates, GMV weights,
//! portfolio variance and the relative loss of a fixed portfolio.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SpdFactor};

/// Tolerance on `w'1 = 1` for every weight vector the crate produces.
pub const BUDGET_TOLERANCE: f64 = 1e-10;

/// Relative asymmetry accepted by [`CovarianceEstimate::new`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Plug-in sample GMV weights.
    Traditional,
    /// Shrinkage towards the target, FM intensity.
    Fm,
    /// Shrinkage towards the target, BPS intensity.
    Bps,
    /// The target portfolio itself (equal weights here).
    Target,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Traditional, Strategy::Fm, Strategy::Bps, Strategy::Target];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Traditional => "traditional",
            Strategy::Fm => "fm",
            Strategy::Bps => "bps",
            Strategy::Target => "target",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy '{s}'")))
    }
}

/// A p x T panel of returns; column `t` is the cross-section at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsWindow {
    values: DMatrix<f64>,
}

impl ReturnsWindow {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "returns window must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (i, t) = (idx % values.nrows(), idx / values.nrows());
            return Err(Error::Dimension(format!("non-finite return for asset {i} at time {t}")));
        }
        Ok(ReturnsWindow { values })
    }

    /// Builds a window from per-asset rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(p, t, |i, j| rows[i][j]))
    }

    pub fn asset_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Copy of columns `[start, start + len)`.
    pub fn columns(&self, start: usize, len: usize) -> Result<ReturnsWindow> {
        if len == 0 || start + len > self.len() {
            return Err(Error::Dimension(format!(
                "columns [{start}, {}) out of range for window of length {}",
                start + len,
                self.len()
            )));
        }
        Ok(ReturnsWindow {
            values: self.values.columns(start, len).into_owned(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanVector(pub DVector<f64>);

impl MeanVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("mean vector has non-finite entries".into()));
        }
        Ok(MeanVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKind {
    InSample,
    OutOfSample,
    Population,
}

/// A symmetric p x p covariance matrix together with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    matrix: DMatrix<f64>,
    sample_size: Option<usize>,
    kind: CovKind,
}

impl CovarianceEstimate {
    /// `sample_size` is the number of observations behind the estimate and
    /// must be `None` exactly when `kind` is `Population`.
    pub fn new(matrix: DMatrix<f64>, sample_size: Option<usize>, kind: CovKind) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "covariance must be non-empty and square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("covariance has non-finite entries".into()));
        }
        let asym = linalg::relative_asymmetry(&matrix);
        if asym > SYMMETRY_TOLERANCE {
            return Err(Error::Dimension(format!(
                "covariance is not symmetric (relative asymmetry {asym:.3e})"
            )));
        }
        match (kind, sample_size) {
            (CovKind::Population, None) => {}
            (CovKind::Population, Some(_)) => {
                return Err(Error::InvalidParameter(
                    "population covariance has no sample size".into(),
                ))
            }
            (_, None) | (_, Some(0)) => {
                return Err(Error::InvalidParameter(
                    "sample covariance needs a positive sample size".into(),
                ))
            }
            _ => {}
        }
        Ok(CovarianceEstimate {
            matrix,
            sample_size,
            kind,
        })
    }

    pub fn population(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix, None, CovKind::Population)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn sample_size(&self) -> Option<usize> {
        self.sample_size
    }

    pub fn kind(&self) -> CovKind {
        self.kind
    }

    /// Retags the estimate, e.g. an in-sample estimate reused for evaluation.
    pub fn with_kind(mut self, kind: CovKind) -> Result<Self> {
        if (kind == CovKind::Population) != (self.kind == CovKind::Population) {
            return Err(Error::InvalidParameter(
                "cannot convert between population and sample covariance".into(),
            ));
        }
        self.kind = kind;
        Ok(self)
    }

    pub fn factor(&self) -> Result<SpdFactor> {
        SpdFactor::new(&self.matrix, self.sample_size)
    }

    /// Solves `A x = 1` once; everything GMV-related derives from it.
    pub fn gmv(&self) -> Result<GmvSolution> {
        GmvSolution::from_factor(&self.factor()?)
    }

    pub fn quadratic_form(&self, w: &DVector<f64>) -> Result<f64> {
        if w.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "weights have length {} but covariance is {}x{}",
                w.len(),
                self.dim(),
                self.dim()
            )));
        }
        Ok(linalg::quadratic_form(&self.matrix, w))
    }
}

/// `A^{-1} 1` and `1' A^{-1} 1` for one covariance matrix.
#[derive(Debug, Clone)]
pub struct GmvSolution {
    pub inv_ones: DVector<f64>,
    pub ones_inv_ones: f64,
}

impl GmvSolution {
    pub fn from_factor(factor: &SpdFactor) -> Result<Self> {
        let inv_ones = factor.solve_ones();
        let ones_inv_ones = inv_ones.sum();
        if !(ones_inv_ones > 0.0) || !ones_inv_ones.is_finite() {
            return Err(Error::Singular {
                dim: factor.dim(),
                window: crate::WindowSize(None),
                rcond: factor.rcond(),
            });
        }
        Ok(GmvSolution {
            inv_ones,
            ones_inv_ones,
        })
    }

    pub fn weights(&self) -> PortfolioWeights {
        PortfolioWeights {
            weights: &self.inv_ones / self.ones_inv_ones,
            strategy: Strategy::Traditional,
        }
    }

    pub fn variance(&self) -> f64 {
        1.0 / self.ones_inv_ones
    }
}

/// Fully invested portfolio weights (`w'1 = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights {
    weights: DVector<f64>,
    strategy: Strategy,
}

impl PortfolioWeights {
    pub fn new(weights: DVector<f64>, strategy: Strategy) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("weights must be non-empty and finite".into()));
        }
        let sum = weights.sum();
        if (sum - 1.0).abs() > BUDGET_TOLERANCE {
            return Err(Error::InvalidParameter(format!("weights sum to {sum}, expected 1")));
        }
        Ok(PortfolioWeights { weights, strategy })
    }

    pub(crate) fn new_unchecked(weights: DVector<f64>, strategy: Strategy) -> Self {
        PortfolioWeights { weights, strategy }
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Row means of the panel.
pub fn sample_mean(window: &ReturnsWindow) -> MeanVector {
    let t = window.len() as f64;
    MeanVector(window.values().column_sum() / t)
}

/// Unbiased sample covariance with divisor `T - 1`.
pub fn sample_covariance(window: &ReturnsWindow) -> Result<CovarianceEstimate> {
    sample_covariance_as(window, CovKind::InSample)
}

pub fn sample_covariance_as(window: &ReturnsWindow, kind: CovKind) -> Result<CovarianceEstimate> {
    let t = window.len();
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "sample covariance needs at least 2 observations, got {t}"
        )));
    }
    if kind == CovKind::Population {
        return Err(Error::InvalidParameter(
            "a sample covariance cannot be a population matrix".into(),
        ));
    }
    let mean = sample_mean(window).0;
    let mut centered = window.values().clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let mut s = &centered * centered.transpose();
    s /= (t - 1) as f64;
    linalg::symmetrize(&mut s);
    Ok(CovarianceEstimate {
        matrix: s,
        sample_size: Some(t),
        kind,
    })
}

/// `A^{-1}1 / (1'A^{-1}1)`.
pub fn gmv_weights(cov: &CovarianceEstimate) -> Result<PortfolioWeights> {
    Ok(cov.gmv()?.weights())
}

/// `1 / (1'A^{-1}1)`.
pub fn gmv_variance(cov: &CovarianceEstimate) -> Result<f64> {
    Ok(cov.gmv()?.variance())
}

/// `w'Aw`.
pub fn portfolio_variance(w: &PortfolioWeights, cov: &CovarianceEstimate) -> Result<f64> {
    cov.quadratic_form(w.weights())
}

/// `1'A^{-1}1 * b'Ab - 1`: how much worse `b` is than the GMV portfolio of `A`.
pub fn target_relative_loss(b: &PortfolioWeights, cov: &CovarianceEstimate) -> Result<f64> {
    let gmv = cov.gmv()?;
    Ok(gmv.ones_inv_ones * cov.quadratic_form(b.weights())? - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> CovarianceEstimate {
        CovarianceEstimate::population(DMatrix::from_diagonal(&DVector::from_row_slice(d))).unwrap()
    }

    fn w(v: &[f64]) -> PortfolioWeights {
        PortfolioWeights::new(DVector::from_row_slice(v), Strategy::Target).unwrap()
    }

    #[test]
    fn mean_examples() {
        let one = ReturnsWindow::from_rows(&[vec![1.0, 3.0]]).unwrap();
        assert_eq!(sample_mean(&one).0[0], 2.0);
        let constant = ReturnsWindow::new(DMatrix::from_element(3, 4, 0.7)).unwrap();
        assert!(sample_mean(&constant).0.iter().all(|&m| (m - 0.7).abs() < 1e-15));
        let panel = ReturnsWindow::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 6.0]]).unwrap();
        assert_eq!(sample_mean(&panel).0.as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn empty_window_is_a_dimension_error() {
        assert!(matches!(
            ReturnsWindow::new(DMatrix::zeros(0, 3)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            ReturnsWindow::new(DMatrix::zeros(2, 0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn covariance_examples() {
        let one = ReturnsWindow::from_rows(&[vec![1.0, 3.0]]).unwrap();
        assert_eq!(sample_covariance(&one).unwrap().matrix()[(0, 0)], 2.0);

        let constant = ReturnsWindow::new(DMatrix::from_element(3, 5, -0.2)).unwrap();
        assert!(sample_covariance(&constant)
            .unwrap()
            .matrix()
            .iter()
            .all(|&v| v.abs() < 1e-30));

        let panel = ReturnsWindow::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 6.0]]).unwrap();
        let s = sample_covariance(&panel).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 12.0]);
        assert!((s.matrix() - expected).abs().max() < 1e-14);
        assert_eq!(s.sample_size(), Some(3));
        assert_eq!(s.kind(), CovKind::InSample);
    }

    #[test]
    fn covariance_needs_two_observations() {
        let w = ReturnsWindow::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(sample_covariance(&w), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn gmv_examples() {
        let id = diag(&[1.0; 4]);
        let w_id = gmv_weights(&id).unwrap();
        assert!(w_id.weights().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!((gmv_variance(&id).unwrap() - 0.25).abs() < 1e-15);

        let a = diag(&[2.0, 1.0]);
        let wa = gmv_weights(&a).unwrap();
        assert!((wa.weights()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((wa.weights()[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((gmv_variance(&a).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(wa.strategy(), Strategy::Traditional);

        let d = [0.5, 1.5, 3.0, 7.0];
        let wd = gmv_weights(&diag(&d)).unwrap();
        let norm: f64 = d.iter().map(|x| 1.0 / x).sum();
        for (j, dj) in d.iter().enumerate() {
            assert!((wd.weights()[j] - (1.0 / dj) / norm).abs() < 1e-14);
        }

        let kappa = 2.5;
        assert!((gmv_variance(&diag(&[kappa; 5])).unwrap() - kappa / 5.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_rejected() {
        let s = CovarianceEstimate::new(DMatrix::zeros(2, 2), Some(12), CovKind::InSample).unwrap();
        let err = gmv_weights(&s).unwrap_err();
        assert!(err.to_string().contains("window size 12"), "{err}");
        assert!(gmv_variance(&s).is_err());
        assert!(target_relative_loss(&w(&[0.5, 0.5]), &s).is_err());
    }

    #[test]
    fn variance_examples() {
        assert!((portfolio_variance(&w(&[0.25; 4]), &diag(&[1.0; 4])).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(portfolio_variance(&w(&[1.0, 0.0]), &diag(&[2.0, 1.0])).unwrap(), 2.0);
        let v = portfolio_variance(&w(&[1.0 / 3.0, 2.0 / 3.0]), &diag(&[2.0, 1.0])).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            portfolio_variance(&w(&[0.5, 0.5]), &diag(&[1.0; 3])),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn target_loss_examples() {
        assert!(target_relative_loss(&w(&[0.25; 4]), &diag(&[1.0; 4])).unwrap().abs() < 1e-15);
        let p = 6;
        let mut e1 = vec![0.0; p];
        e1[0] = 1.0;
        assert!((target_relative_loss(&w(&e1), &diag(&vec![1.0; p])).unwrap() - (p as f64 - 1.0)).abs() < 1e-14);
        assert!(
            target_relative_loss(&w(&[1.0 / 3.0, 2.0 / 3.0]), &diag(&[2.0, 1.0]))
                .unwrap()
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn weights_must_be_fully_invested() {
        assert!(PortfolioWeights::new(DVector::from_row_slice(&[0.5, 0.6]), Strategy::Target).is_err());
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(CovarianceEstimate::population(m).is_err());
    }
}
