//! Model parameters and the three return-generating scenarios: iid
//! rescaled Student-t(5) innovations, a diagonal VAR(1) and a CCC-GARCH(1,1).
//!
//! Every generator is a pure function of its parameters, the sample length
//! and a [`SeedSpec`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, spd_sqrt};
use crate::model::{CovarianceEstimate, MeanVector, ReturnsWindow};
use crate::rng::{label, SeedSpec, StreamRng};

/// Spectrum of [`random_covariance`].
pub const EIGEN_MIN: f64 = 0.1;
pub const EIGEN_MAX: f64 = 10.0;

/// Steps discarded before a CCC-GARCH path is emitted.
pub const GARCH_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// iid `y = mu + Sigma^{1/2} sqrt(3/5) x`, `x` with t(5) entries.
    T5,
    /// `y_t = mu + Gamma (y_{t-1} - mu) + Sigma^{1/2} x_t`, Gaussian `x_t`.
    Var1,
    /// Conditionally Gaussian CCC-GARCH(1,1) with unconditional covariance Sigma.
    CccGarch,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::T5, Scenario::Var1, Scenario::CccGarch];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::T5 => "t5",
            Scenario::Var1 => "var1",
            Scenario::CccGarch => "ccc_garch",
        }
    }

    pub fn id(self) -> u64 {
        match self {
            Scenario::T5 => 1,
            Scenario::Var1 => 2,
            Scenario::CccGarch => 3,
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t5" | "1" | "scenario1" => Ok(Scenario::T5),
            "var1" | "2" | "scenario2" => Ok(Scenario::Var1),
            "ccc_garch" | "ccc-garch" | "3" | "scenario3" => Ok(Scenario::CccGarch),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario '{other}' (expected t5, var1 or ccc_garch)"
            ))),
        }
    }
}

/// Uniform draw on the open interval `(lo, hi)`.
fn open_uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    loop {
        let v = rng.random_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}

fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

/// Column-major p x T matrix of iid draws.
fn draw_matrix(p: usize, t: usize, rng: &mut StreamRng, mut f: impl FnMut(&mut StreamRng) -> f64) -> DMatrix<f64> {
    let data: Vec<f64> = (0..p * t).map(|_| f(rng)).collect();
    DMatrix::from_vec(p, t, data)
}

pub fn standard_normal_matrix(p: usize, t: usize, rng: &mut StreamRng) -> DMatrix<f64> {
    draw_matrix(p, t, rng, normal)
}

/// `sqrt(3/5) * t(5)`: zero mean, unit variance. The t(5) draw is
/// `Z / sqrt(chi2_5 / 5)` with the chi-square built from five normals.
pub fn scaled_t5(rng: &mut StreamRng) -> f64 {
    let z = normal(rng);
    let chi2: f64 = (0..5).map(|_| normal(rng).powi(2)).sum();
    (0.6_f64).sqrt() * z / (chi2 / 5.0).sqrt()
}

/// iid `U(-0.1, 0.1)` entries.
pub fn random_mean(p: usize, seed: &SeedSpec) -> Result<MeanVector> {
    if p == 0 {
        return Err(Error::InvalidParameter("mean vector needs p >= 1".into()));
    }
    let mut rng = seed.rng();
    MeanVector::new(DVector::from_fn(p, |_, _| open_uniform(&mut rng, -0.1, 0.1)))
}

/// `Q diag(lambda) Q'` with `Q` Haar-distributed and `lambda` log-uniform on
/// `[EIGEN_MIN, EIGEN_MAX]`.
pub fn random_covariance(p: usize, seed: &SeedSpec) -> Result<CovarianceEstimate> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!(
            "random covariance needs p >= 2, got {p}"
        )));
    }
    let mut rng = seed.rng();
    let g = standard_normal_matrix(p, p, &mut rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    // Fixing the signs of R's diagonal makes Q exactly Haar.
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    let (lo, hi) = (EIGEN_MIN.ln(), EIGEN_MAX.ln());
    let lambda: Vec<f64> = (0..p).map(|_| rng.random_range(lo..=hi).exp()).collect();
    let scaled = DMatrix::from_fn(p, p, |i, j| q[(i, j)] * lambda[j]);
    let mut sigma = scaled * q.transpose();
    linalg::symmetrize(&mut sigma);
    CovarianceEstimate::population(sigma)
}

/// Symmetric principal square root.
pub fn sigma_sqrt(sigma: &CovarianceEstimate) -> Result<DMatrix<f64>> {
    spd_sqrt(sigma.matrix())
}

/// Mean, covariance and the covariance's square root.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub mu: MeanVector,
    pub sigma: CovarianceEstimate,
    pub sigma_sqrt: DMatrix<f64>,
}

impl ModelParams {
    pub fn new(mu: MeanVector, sigma: CovarianceEstimate) -> Result<Self> {
        if mu.len() != sigma.dim() {
            return Err(Error::Dimension(format!(
                "mean has length {} but covariance is {}x{}",
                mu.len(),
                sigma.dim(),
                sigma.dim()
            )));
        }
        let sigma_sqrt = sigma_sqrt(&sigma)?;
        Ok(ModelParams { mu, sigma, sigma_sqrt })
    }

    /// Random mean and covariance for `p` assets.
    pub fn random(p: usize, seed: &SeedSpec) -> Result<Self> {
        let mu = random_mean(p, &seed.child(label("mean")))?;
        let sigma = random_covariance(p, &seed.child(label("covariance")))?;
        Self::new(mu, sigma)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

fn add_mean(mut deviations: DMatrix<f64>, mu: &MeanVector) -> Result<ReturnsWindow> {
    for mut col in deviations.column_iter_mut() {
        col += &mu.0;
    }
    ReturnsWindow::new(deviations)
}

fn check_len(t: usize) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidParameter("sample length must be at least 1".into()));
    }
    Ok(())
}

pub fn simulate_scenario1(params: &ModelParams, t: usize, seed: &SeedSpec) -> Result<ReturnsWindow> {
    check_len(t)?;
    let mut rng = seed.rng();
    let x = draw_matrix(params.dim(), t, &mut rng, scaled_t5);
    add_mean(&params.sigma_sqrt * x, &params.mu)
}

/// Diagonal of the VAR(1) coefficient matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarParams {
    pub gamma: DVector<f64>,
}

impl VarParams {
    pub fn new(gamma: DVector<f64>) -> Result<Self> {
        if let Some(g) = gamma.iter().find(|g| !(g.abs() < 1.0)) {
            return Err(Error::NonStationary(format!("VAR coefficient {g} outside (-1, 1)")));
        }
        Ok(VarParams { gamma })
    }

    /// iid `U(-0.9, 0.9)` coefficients.
    pub fn random(p: usize, seed: &SeedSpec) -> Self {
        let mut rng = seed.rng();
        VarParams {
            gamma: DVector::from_fn(p, |_, _| open_uniform(&mut rng, -0.9, 0.9)),
        }
    }
}

/// Stationary covariance `Sigma_ij / (1 - gamma_i gamma_j)` of the diagonal
/// VAR(1); equal to the solution of `vec(V) = (I - Gamma (x) Gamma)^{-1} vec(Sigma)`.
pub fn var1_unconditional_covariance(gamma: &VarParams, sigma: &CovarianceEstimate) -> Result<CovarianceEstimate> {
    let g = &gamma.gamma;
    if g.len() != sigma.dim() {
        return Err(Error::Dimension(format!(
            "{} VAR coefficients for a {}-asset covariance",
            g.len(),
            sigma.dim()
        )));
    }
    VarParams::new(g.clone())?;
    let s = sigma.matrix();
    let v = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] / (1.0 - g[i] * g[j]));
    CovarianceEstimate::population(v)
}

fn lower_cholesky(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::Domain(format!("{what} is not positive definite")))
}

fn var1_path(
    params: &ModelParams,
    gamma: &VarParams,
    stationary_chol: &DMatrix<f64>,
    t: usize,
    seed: &SeedSpec,
) -> Result<ReturnsWindow> {
    check_len(t)?;
    let p = params.dim();
    let mut rng = seed.rng();
    let z0 = DVector::from_iterator(p, (0..p).map(|_| normal(&mut rng)));
    let mut state = stationary_chol * z0;
    let mut dev = &params.sigma_sqrt * standard_normal_matrix(p, t, &mut rng);
    for mut col in dev.column_iter_mut() {
        for i in 0..p {
            state[i] = gamma.gamma[i] * state[i] + col[i];
            col[i] = state[i];
        }
    }
    add_mean(dev, &params.mu)
}

/// A stationary VAR(1) path. The initial deviation `y_0 - mu` is drawn from
/// the stationary law, so no burn-in is needed.
pub fn simulate_scenario2(params: &ModelParams, gamma: &VarParams, t: usize, seed: &SeedSpec) -> Result<ReturnsWindow> {
    let stationary = var1_unconditional_covariance(gamma, &params.sigma)?;
    let chol = lower_cholesky(stationary.matrix(), "VAR(1) stationary covariance")?;
    var1_path(params, gamma, &chol, t, seed)
}

/// Per-asset GARCH(1,1) coefficients and the constant correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub alpha0: DVector<f64>,
    pub alpha1: DVector<f64>,
    pub beta1: DVector<f64>,
    pub corr: DMatrix<f64>,
}

impl GarchParams {
    /// Calibrates intercepts and correlation so the unconditional covariance is `sigma`.
    pub fn calibrated(sigma: &CovarianceEstimate, alpha1: DVector<f64>, beta1: DVector<f64>) -> Result<Self> {
        let alpha0 = garch_intercepts(sigma, &alpha1, &beta1)?;
        let s = sigma.matrix();
        let sd: Vec<f64> = (0..s.nrows()).map(|i| s[(i, i)].sqrt()).collect();
        let mut corr = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] / (sd[i] * sd[j]));
        corr.fill_diagonal(1.0);
        linalg::symmetrize(&mut corr);
        Ok(GarchParams {
            alpha0,
            alpha1,
            beta1,
            corr,
        })
    }

    /// `alpha1 ~ U(0, 0.1)`, `beta1 ~ U(0.6, 0.7)`, then calibrated to `sigma`.
    pub fn random(sigma: &CovarianceEstimate, seed: &SeedSpec) -> Result<Self> {
        let p = sigma.dim();
        let mut rng = seed.rng();
        let alpha1 = DVector::from_fn(p, |_, _| open_uniform(&mut rng, 0.0, 0.1));
        let beta1 = DVector::from_fn(p, |_, _| open_uniform(&mut rng, 0.6, 0.7));
        Self::calibrated(sigma, alpha1, beta1)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.alpha0.len();
        if self.alpha1.len() != p || self.beta1.len() != p || self.corr.nrows() != p || self.corr.ncols() != p {
            return Err(Error::Dimension("GARCH parameter dimensions disagree".into()));
        }
        for j in 0..p {
            let (a0, a1, b1) = (self.alpha0[j], self.alpha1[j], self.beta1[j]);
            if !(a1 >= 0.0 && b1 >= 0.0 && a1 + b1 < 1.0) {
                return Err(Error::NonStationary(format!(
                    "asset {j}: alpha1 = {a1}, beta1 = {b1} violate alpha1 + beta1 < 1"
                )));
            }
            if !(a0 > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "asset {j}: intercept {a0} must be positive"
                )));
            }
        }
        if (0..p).any(|j| (self.corr[(j, j)] - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidParameter(
                "correlation matrix needs a unit diagonal".into(),
            ));
        }
        Ok(())
    }
}

/// `alpha0_j = Sigma_jj (1 - alpha1_j - beta1_j)`, making `Sigma_jj` the
/// stationary mean of `h_j`.
pub fn garch_intercepts(
    sigma: &CovarianceEstimate,
    alpha1: &DVector<f64>,
    beta1: &DVector<f64>,
) -> Result<DVector<f64>> {
    let p = sigma.dim();
    if alpha1.len() != p || beta1.len() != p {
        return Err(Error::Dimension(format!("GARCH coefficients for {p} assets expected")));
    }
    let s = sigma.matrix();
    (0..p)
        .map(|j| {
            let persistence = alpha1[j] + beta1[j];
            if !(alpha1[j] >= 0.0 && beta1[j] >= 0.0 && persistence < 1.0) {
                return Err(Error::NonStationary(format!(
                    "asset {j}: alpha1 + beta1 = {persistence} must be below 1"
                )));
            }
            Ok(s[(j, j)] * (1.0 - persistence))
        })
        .collect::<Result<Vec<_>>>()
        .map(DVector::from_vec)
}

/// A simulated CCC-GARCH path with its conditional variances.
#[derive(Debug, Clone)]
pub struct GarchPath {
    pub returns: ReturnsWindow,
    /// `h_{j,t}` aligned with the returns (p x T).
    pub variances: DMatrix<f64>,
}

fn garch_path(
    params: &ModelParams,
    garch: &GarchParams,
    corr_chol: &DMatrix<f64>,
    t: usize,
    seed: &SeedSpec,
) -> Result<GarchPath> {
    check_len(t)?;
    let p = params.dim();
    let total = GARCH_BURN_IN + t;
    let mut rng = seed.rng();
    // Correlated standard shocks, scaled below by sqrt(h_t) per asset.
    let shocks = corr_chol * standard_normal_matrix(p, total, &mut rng);
    let mut h: Vec<f64> = (0..p).map(|j| params.sigma.matrix()[(j, j)]).collect();
    let mut eps_prev = vec![0.0; p];
    let mut returns = DMatrix::zeros(p, t);
    let mut variances = DMatrix::zeros(p, t);
    for step in 0..total {
        for j in 0..p {
            if step > 0 {
                h[j] = garch.alpha0[j] + garch.alpha1[j] * eps_prev[j] * eps_prev[j] + garch.beta1[j] * h[j];
            }
            let eps = h[j].sqrt() * shocks[(j, step)];
            eps_prev[j] = eps;
            if step >= GARCH_BURN_IN {
                returns[(j, step - GARCH_BURN_IN)] = eps;
                variances[(j, step - GARCH_BURN_IN)] = h[j];
            }
        }
    }
    Ok(GarchPath {
        returns: add_mean(returns, &params.mu)?,
        variances,
    })
}

/// CCC-GARCH path; `h_{j,0} = Sigma_jj`, first [`GARCH_BURN_IN`] steps dropped.
pub fn simulate_scenario3(
    params: &ModelParams,
    garch: &GarchParams,
    t: usize,
    seed: &SeedSpec,
) -> Result<ReturnsWindow> {
    Ok(simulate_scenario3_with_variances(params, garch, t, seed)?.returns)
}

pub fn simulate_scenario3_with_variances(
    params: &ModelParams,
    garch: &GarchParams,
    t: usize,
    seed: &SeedSpec,
) -> Result<GarchPath> {
    garch.validate()?;
    if garch.alpha0.len() != params.dim() {
        return Err(Error::Dimension(
            "GARCH parameters do not match the model dimension".into(),
        ));
    }
    let chol = lower_cholesky(&garch.corr, "correlation matrix")?;
    garch_path(params, garch, &chol, t, seed)
}

#[derive(Debug, Clone)]
enum Dynamics {
    Iid,
    Var {
        gamma: VarParams,
        stationary_chol: DMatrix<f64>,
    },
    Garch {
        garch: GarchParams,
        corr_chol: DMatrix<f64>,
    },
}

/// Everything needed to simulate one scenario for a fixed `p`, with the
/// factorizations done once.
#[derive(Debug, Clone)]
pub struct ScenarioModel {
    scenario: Scenario,
    params: ModelParams,
    dynamics: Dynamics,
    unconditional: CovarianceEstimate,
}

impl ScenarioModel {
    pub fn new(scenario: Scenario, params: ModelParams, seed: &SeedSpec) -> Result<Self> {
        let dynamics_seed = seed.child(label("dynamics"));
        let (dynamics, unconditional) = match scenario {
            Scenario::T5 => (Dynamics::Iid, params.sigma.clone()),
            Scenario::Var1 => {
                let gamma = VarParams::random(params.dim(), &dynamics_seed);
                let v = var1_unconditional_covariance(&gamma, &params.sigma)?;
                let stationary_chol = lower_cholesky(v.matrix(), "VAR(1) stationary covariance")?;
                (Dynamics::Var { gamma, stationary_chol }, v)
            }
            Scenario::CccGarch => {
                let garch = GarchParams::random(&params.sigma, &dynamics_seed)?;
                let corr_chol = lower_cholesky(&garch.corr, "correlation matrix")?;
                (Dynamics::Garch { garch, corr_chol }, params.sigma.clone())
            }
        };
        Ok(ScenarioModel {
            scenario,
            params,
            dynamics,
            unconditional,
        })
    }

    /// Draws `mu` and `Sigma` from `params_seed` and the scenario-specific
    /// coefficients from `params_seed` as well; the same seed gives the same
    /// `mu` and `Sigma` for every scenario.
    pub fn draw(scenario: Scenario, p: usize, params_seed: &SeedSpec) -> Result<Self> {
        let params = ModelParams::random(p, params_seed)?;
        Self::new(scenario, params, params_seed)
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Covariance the returns converge to over long horizons.
    pub fn unconditional_covariance(&self) -> &CovarianceEstimate {
        &self.unconditional
    }

    pub fn var_params(&self) -> Option<&VarParams> {
        match &self.dynamics {
            Dynamics::Var { gamma, .. } => Some(gamma),
            _ => None,
        }
    }

    pub fn garch_params(&self) -> Option<&GarchParams> {
        match &self.dynamics {
            Dynamics::Garch { garch, .. } => Some(garch),
            _ => None,
        }
    }

    pub fn simulate(&self, t: usize, seed: &SeedSpec) -> Result<ReturnsWindow> {
        match &self.dynamics {
            Dynamics::Iid => simulate_scenario1(&self.params, t, seed),
            Dynamics::Var { gamma, stationary_chol } => var1_path(&self.params, gamma, stationary_chol, t, seed),
            Dynamics::Garch { garch, corr_chol } => Ok(garch_path(&self.params, garch, corr_chol, t, seed)?.returns),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_covariance;

    fn seed(l: u64) -> SeedSpec {
        SeedSpec::new(20240611).child(l)
    }

    fn identity_params(p: usize) -> ModelParams {
        ModelParams::new(
            MeanVector(DVector::zeros(p)),
            CovarianceEstimate::population(DMatrix::identity(p, p)).unwrap(),
        )
        .unwrap()
    }

    fn assert_cov_close(s: &DMatrix<f64>, target: &DMatrix<f64>, rel: f64) {
        // entrywise, relative to the diagonal scale for off-diagonal entries
        for i in 0..s.nrows() {
            for j in 0..s.ncols() {
                let scale = (target[(i, i)] * target[(j, j)]).sqrt();
                let err = (s[(i, j)] - target[(i, j)]).abs() / scale;
                assert!(
                    err < rel,
                    "entry ({i},{j}): {} vs {} (err {err})",
                    s[(i, j)],
                    target[(i, j)]
                );
            }
        }
    }

    #[test]
    fn mean_support_and_determinism() {
        let m = random_mean(1000, &seed(1)).unwrap();
        assert!(m.0.iter().all(|v| *v > -0.1 && *v < 0.1));
        assert_eq!(m, random_mean(1000, &seed(1)).unwrap());
        assert_ne!(m, random_mean(1000, &seed(2)).unwrap());
    }

    #[test]
    fn mean_law_of_large_numbers() {
        let m = random_mean(1_000_000, &seed(3)).unwrap();
        assert!((m.0.sum() / 1e6).abs() < 0.001);
    }

    #[test]
    fn covariance_spectrum_and_symmetry() {
        let s = random_covariance(40, &seed(4)).unwrap();
        assert!(linalg::relative_asymmetry(s.matrix()) <= 1e-12);
        let eig = s.matrix().clone().symmetric_eigen().eigenvalues;
        assert!(eig.min() >= EIGEN_MIN - 1e-9, "min eigenvalue {}", eig.min());
        assert!(eig.max() <= EIGEN_MAX + 1e-8, "max eigenvalue {}", eig.max());
        assert_eq!(s, random_covariance(40, &seed(4)).unwrap());
        assert!(random_covariance(1, &seed(4)).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let id = CovarianceEstimate::population(DMatrix::identity(3, 3)).unwrap();
        assert!((sigma_sqrt(&id).unwrap() - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-14);
        let s = random_covariance(6, &seed(5)).unwrap();
        let r = sigma_sqrt(&s).unwrap();
        let err = (&r * &r - s.matrix()).norm() / s.matrix().norm();
        assert!(err < 1e-10, "{err}");
        let bad = CovarianceEstimate::population(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(sigma_sqrt(&bad).is_err());
    }

    #[test]
    fn scaled_t5_moments() {
        let mut rng = seed(6).rng();
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| scaled_t5(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
        let m4 = draws.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
        let kurtosis = m4 / (var * var);
        assert!(kurtosis > 3.5, "kurtosis {kurtosis}");
    }

    #[test]
    fn scenario1_covariance() {
        let params = identity_params(3);
        let w = simulate_scenario1(&params, 100_000, &seed(7)).unwrap();
        let s = sample_covariance(&w).unwrap();
        assert_cov_close(s.matrix(), &DMatrix::identity(3, 3), 0.03);
        assert_eq!(w, simulate_scenario1(&params, 100_000, &seed(7)).unwrap());
    }

    #[test]
    fn var1_closed_form_examples() {
        let id = CovarianceEstimate::population(DMatrix::identity(2, 2)).unwrap();
        let zero = VarParams::new(DVector::zeros(2)).unwrap();
        assert_eq!(var1_unconditional_covariance(&zero, &id).unwrap().matrix(), id.matrix());
        let g = VarParams::new(DVector::from_row_slice(&[0.5, 0.0])).unwrap();
        let v = var1_unconditional_covariance(&g, &id).unwrap();
        assert!((v.matrix()[(0, 0)] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(v.matrix()[(1, 1)], 1.0);
        assert_eq!(v.matrix()[(0, 1)], 0.0);
        assert!(VarParams::new(DVector::from_row_slice(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn var1_path_moments() {
        let params = identity_params(3);
        let g = VarParams::new(DVector::from_row_slice(&[0.5, 0.0, -0.3])).unwrap();
        let w = simulate_scenario2(&params, &g, 100_000, &seed(8)).unwrap();
        let s = sample_covariance(&w).unwrap();
        let target = var1_unconditional_covariance(&g, &params.sigma).unwrap();
        assert_cov_close(s.matrix(), target.matrix(), 0.03);
        // lag-1 autocorrelation
        let y = w.values();
        for j in 0..3 {
            let row: Vec<f64> = y.row(j).iter().copied().collect();
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            let num: f64 = row.windows(2).map(|p| (p[0] - mean) * (p[1] - mean)).sum();
            let den: f64 = row.iter().map(|v| (v - mean).powi(2)).sum();
            assert!((num / den - g.gamma[j]).abs() < 0.02, "asset {j}: {}", num / den);
        }
    }

    #[test]
    fn var1_with_zero_gamma_is_iid_gaussian() {
        let params = identity_params(3);
        let g = VarParams::new(DVector::zeros(3)).unwrap();
        let w = simulate_scenario2(&params, &g, 100_000, &seed(9)).unwrap();
        assert_cov_close(sample_covariance(&w).unwrap().matrix(), &DMatrix::identity(3, 3), 0.03);
    }

    #[test]
    fn garch_intercept_examples() {
        let s = CovarianceEstimate::population(DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 1.0]))).unwrap();
        let a0 = garch_intercepts(
            &s,
            &DVector::from_row_slice(&[0.1, 0.0]),
            &DVector::from_row_slice(&[0.6, 0.0]),
        )
        .unwrap();
        assert!((a0[0] - 0.6).abs() < 1e-15);
        assert_eq!(a0[1], 1.0);
        assert!(matches!(
            garch_intercepts(
                &s,
                &DVector::from_row_slice(&[0.5, 0.0]),
                &DVector::from_row_slice(&[0.5, 0.0])
            ),
            Err(Error::NonStationary(_))
        ));
    }

    #[test]
    fn garch_calibration_invariants() {
        let s = random_covariance(5, &seed(10)).unwrap();
        let g = GarchParams::random(&s, &seed(11)).unwrap();
        for j in 0..5 {
            assert!(g.alpha1[j] > 0.0 && g.alpha1[j] < 0.1);
            assert!(g.beta1[j] > 0.6 && g.beta1[j] < 0.7);
            let expected = s.matrix()[(j, j)] * (1.0 - g.alpha1[j] - g.beta1[j]);
            assert!((g.alpha0[j] - expected).abs() < 1e-12);
            assert_eq!(g.corr[(j, j)], 1.0);
        }
    }

    #[test]
    fn garch_unconditional_moments() {
        let sigma = CovarianceEstimate::population(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.3, -0.2, 0.3, 2.0, 0.4, -0.2, 0.4, 0.5],
        ))
        .unwrap();
        let params = ModelParams::new(MeanVector(DVector::from_row_slice(&[0.05, -0.02, 0.0])), sigma.clone()).unwrap();
        let garch = GarchParams::calibrated(
            &sigma,
            DVector::from_row_slice(&[0.08, 0.05, 0.09]),
            DVector::from_row_slice(&[0.65, 0.62, 0.69]),
        )
        .unwrap();
        let path = simulate_scenario3_with_variances(&params, &garch, 100_000, &seed(12)).unwrap();
        let s = sample_covariance(&path.returns).unwrap();
        assert_cov_close(s.matrix(), sigma.matrix(), 0.05);
        for j in 0..3 {
            let mean_h = path.variances.row(j).mean();
            let target = sigma.matrix()[(j, j)];
            assert!((mean_h - target).abs() / target < 0.03, "asset {j}: {mean_h}");
        }
        let again = simulate_scenario3(&params, &garch, 100_000, &seed(12)).unwrap();
        assert_eq!(again, path.returns);
    }

    #[test]
    fn garch_without_dynamics_is_iid_gaussian() {
        let params = identity_params(3);
        let garch = GarchParams::calibrated(&params.sigma, DVector::zeros(3), DVector::zeros(3)).unwrap();
        let w = simulate_scenario3(&params, &garch, 100_000, &seed(13)).unwrap();
        assert_cov_close(sample_covariance(&w).unwrap().matrix(), &DMatrix::identity(3, 3), 0.03);
    }

    #[test]
    fn scenario_models_share_parameters() {
        let s = seed(14);
        let a = ScenarioModel::draw(Scenario::T5, 8, &s).unwrap();
        let b = ScenarioModel::draw(Scenario::CccGarch, 8, &s).unwrap();
        let c = ScenarioModel::draw(Scenario::Var1, 8, &s).unwrap();
        assert_eq!(a.params().sigma, b.params().sigma);
        assert_eq!(a.params().mu, c.params().mu);
        assert_eq!(b.unconditional_covariance(), &b.params().sigma);
        let v = var1_unconditional_covariance(c.var_params().unwrap(), &c.params().sigma).unwrap();
        assert_eq!(c.unconditional_covariance(), &v);
    }
}
