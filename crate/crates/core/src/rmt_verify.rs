//! Monte Carlo harness for the quadratic-form limits behind the
//! out-of-sample results.
//!
//! With `x_t` iid standard normal p-vectors, `V~_n = X_n X_n'/n` and
//! `V~_out = X_out X_out'/m`,
//!
//! ```text
//! xi' V~_n^{-1} V~_out V~_n^{-1} theta  ->  (1 - c)^{-3} xi'theta
//! xi' V~_n^{-1} V~_out theta            ->  (1 - c)^{-1} xi'theta
//! ```
//!
//! with `c = p/n`. The same limits hold for the mean-centered sample
//! covariances `V = (X X' - T xbar xbar')/(T - 1)`, and `xbar_out' V_n^{-1} theta`
//! vanishes at rate `1/sqrt(m)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::datagen::standard_normal_matrix;
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, SpdFactor};
use crate::parallel::map_indexed;
use crate::rng::{label, SeedSpec};
use crate::stats::MonteCarloMean;

/// Redraws allowed when an in-sample matrix fails the conditioning gate.
pub const SINGULAR_RETRIES: usize = 3;

/// Vectors are rejected above this Euclidean norm.
pub const DEFAULT_NORM_BOUND: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadformCase {
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub xi: DVector<f64>,
    pub theta: DVector<f64>,
    pub repetitions: usize,
    pub seed: SeedSpec,
}

impl QuadformCase {
    pub fn new(
        p: usize,
        n: usize,
        m: usize,
        xi: DVector<f64>,
        theta: DVector<f64>,
        repetitions: usize,
        seed: SeedSpec,
    ) -> Result<Self> {
        let case = QuadformCase {
            p,
            n,
            m,
            xi,
            theta,
            repetitions,
            seed,
        };
        case.validate()?;
        Ok(case)
    }

    /// `xi = theta = e_1`.
    pub fn unit(p: usize, n: usize, m: usize, repetitions: usize, seed: SeedSpec) -> Result<Self> {
        let e1 = DVector::from_fn(p, |i, _| if i == 0 { 1.0 } else { 0.0 });
        Self::new(p, n, m, e1.clone(), e1, repetitions, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidParameter("p must be positive".into()));
        }
        if self.n <= self.p + 1 {
            return Err(Error::InvalidParameter(format!(
                "need n > p + 1 for an invertible centered covariance (p = {}, n = {})",
                self.p, self.n
            )));
        }
        if self.m < 2 {
            return Err(Error::InvalidParameter(format!("need m >= 2, got {}", self.m)));
        }
        if self.repetitions < 2 {
            return Err(Error::InvalidParameter("need at least 2 repetitions".into()));
        }
        for (name, v) in [("xi", &self.xi), ("theta", &self.theta)] {
            if v.len() != self.p {
                return Err(Error::Dimension(format!(
                    "{name} has length {}, expected {}",
                    v.len(),
                    self.p
                )));
            }
            let norm = v.norm();
            if !norm.is_finite() || norm > DEFAULT_NORM_BOUND {
                return Err(Error::InvalidParameter(format!(
                    "{name} norm {norm} exceeds {DEFAULT_NORM_BOUND}"
                )));
            }
        }
        Ok(())
    }

    pub fn c(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    pub fn c_tilde(&self) -> f64 {
        self.p as f64 / self.m as f64
    }

    /// `(1 - c)^{-3} xi'theta`.
    pub fn sandwich_limit(&self) -> f64 {
        self.xi.dot(&self.theta) / (1.0 - self.c()).powi(3)
    }

    /// `(1 - c)^{-1} xi'theta`.
    pub fn single_limit(&self) -> f64 {
        self.xi.dot(&self.theta) / (1.0 - self.c())
    }

    /// Large-sample value of `E|xbar_out' V_n^{-1} theta|`:
    /// `sqrt(2/pi) * sqrt(theta'theta (1 - c)^{-3} / m)`.
    pub fn cross_mean_envelope(&self) -> f64 {
        let var = self.theta.norm_squared() / (1.0 - self.c()).powi(3) / self.m as f64;
        (2.0 / std::f64::consts::PI * var).sqrt()
    }
}

/// One draw of every form.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Draw {
    sandwich: [f64; 2],
    single: [f64; 2],
    cross: f64,
}

/// Monte Carlo means of all forms for one case. Index 0 is the plain
/// (non-centered) variant, index 1 the centered one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadformSummary {
    pub sandwich: [MonteCarloMean; 2],
    pub single: [MonteCarloMean; 2],
    pub cross_mean_abs: MonteCarloMean,
    pub sandwich_limit: f64,
    pub single_limit: f64,
}

impl QuadformSummary {
    pub fn sandwich_error(&self, centered: bool) -> f64 {
        (self.sandwich[centered as usize].mean - self.sandwich_limit).abs()
    }

    pub fn single_error(&self, centered: bool) -> f64 {
        (self.single[centered as usize].mean - self.single_limit).abs()
    }
}

fn draw_once(case: &QuadformCase, seed: &SeedSpec) -> Result<Draw> {
    let (p, n, m) = (case.p, case.n, case.m);
    let mut rng = seed.rng();
    let x_in = standard_normal_matrix(p, n, &mut rng);
    let x_out = standard_normal_matrix(p, m, &mut rng);

    let mut gram = &x_in * x_in.transpose();
    symmetrize(&mut gram);
    let mean_in: DVector<f64> = x_in.column_mean();
    let plain = &gram / n as f64;
    let centered = (gram - (n as f64) * &mean_in * mean_in.transpose()) / (n - 1) as f64;

    let mean_out: DVector<f64> = x_out.column_mean();
    let out_theta = x_out.tr_mul(&case.theta);
    let mut draw = Draw {
        sandwich: [0.0; 2],
        single: [0.0; 2],
        cross: 0.0,
    };
    for (k, v) in [plain, centered].iter().enumerate() {
        let factor = SpdFactor::new(v, Some(n))?;
        let a = factor.solve(&case.xi);
        let b = factor.solve(&case.theta);
        // a' V_out b via the m-vectors X_out'a and X_out'b.
        let out_a = x_out.tr_mul(&a);
        let out_b = x_out.tr_mul(&b);
        if k == 0 {
            draw.sandwich[0] = out_a.dot(&out_b) / m as f64;
            draw.single[0] = out_a.dot(&out_theta) / m as f64;
        } else {
            let mm = m as f64;
            let (ma, mb, mt) = (mean_out.dot(&a), mean_out.dot(&b), mean_out.dot(&case.theta));
            draw.sandwich[1] = (out_a.dot(&out_b) - mm * ma * mb) / (mm - 1.0);
            draw.single[1] = (out_a.dot(&out_theta) - mm * ma * mt) / (mm - 1.0);
            draw.cross = mb.abs();
        }
    }
    Ok(draw)
}

fn draw_with_retries(case: &QuadformCase, rep: usize) -> Result<Draw> {
    let rep_seed = case.seed.child(rep as u64);
    let mut last = None;
    for attempt in 0..=SINGULAR_RETRIES {
        match draw_once(case, &rep_seed.child(attempt as u64)) {
            Ok(d) => return Ok(d),
            Err(e @ Error::Singular { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt").context(format!("repetition {rep}")))
}

/// Runs every repetition of `case` and aggregates in repetition order.
pub fn simulate_quadforms(case: &QuadformCase) -> Result<QuadformSummary> {
    case.validate()?;
    let draws = map_indexed(case.repetitions, |rep| draw_with_retries(case, rep))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let stat = |f: fn(&Draw) -> f64| MonteCarloMean::from_slice(&draws.iter().map(f).collect::<Vec<_>>());
    Ok(QuadformSummary {
        sandwich: [stat(|d| d.sandwich[0]), stat(|d| d.sandwich[1])],
        single: [stat(|d| d.single[0]), stat(|d| d.single[1])],
        cross_mean_abs: stat(|d| d.cross),
        sandwich_limit: case.sandwich_limit(),
        single_limit: case.single_limit(),
    })
}

/// `|MC mean of xi'V_n^{-1} V_out V_n^{-1} theta - (1 - c)^{-3} xi'theta|`.
pub fn quadform_sandwich_error(case: &QuadformCase, centered: bool) -> Result<f64> {
    Ok(simulate_quadforms(case)?.sandwich_error(centered))
}

/// `|MC mean of xi'V_n^{-1} V_out theta - (1 - c)^{-1} xi'theta|`.
pub fn quadform_single_error(case: &QuadformCase, centered: bool) -> Result<f64> {
    Ok(simulate_quadforms(case)?.single_error(centered))
}

/// Monte Carlo mean of `|xbar_out' V_n^{-1} theta|` (centered `V_n`).
pub fn cross_mean_form_error(case: &QuadformCase) -> Result<f64> {
    Ok(simulate_quadforms(case)?.cross_mean_abs.mean)
}

fn default_reps() -> usize {
    500
}
fn default_p() -> usize {
    400
}
fn default_window() -> usize {
    800
}
fn default_relative_tolerance() -> f64 {
    0.05
}
fn default_agreement_tolerance() -> f64 {
    0.02
}
fn default_cross_tolerance() -> f64 {
    0.1
}

/// Settings of the `verify-lemmas` run. `xi = theta = e_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_window")]
    pub n: usize,
    #[serde(default = "default_window")]
    pub m: usize,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Allowed `|mean - limit| / |limit|` for the sandwich and single forms.
    #[serde(default = "default_relative_tolerance")]
    pub relative_tolerance: f64,
    /// Allowed relative gap between the centered and plain means.
    #[serde(default = "default_agreement_tolerance")]
    pub agreement_tolerance: f64,
    /// Allowed relative gap between the cross-term mean and its `1/sqrt(m)` envelope.
    #[serde(default = "default_cross_tolerance")]
    pub cross_tolerance: f64,
}

impl VerifyConfig {
    pub fn new(p: usize, n: usize, m: usize, repetitions: usize, master_seed: u64) -> Self {
        VerifyConfig {
            p,
            n,
            m,
            repetitions,
            master_seed,
            relative_tolerance: default_relative_tolerance(),
            agreement_tolerance: default_agreement_tolerance(),
            cross_tolerance: default_cross_tolerance(),
        }
    }

    pub fn case(&self) -> Result<QuadformCase> {
        for (name, t) in [
            ("relative_tolerance", self.relative_tolerance),
            ("agreement_tolerance", self.agreement_tolerance),
            ("cross_tolerance", self.cross_tolerance),
        ] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {t}")));
            }
        }
        QuadformCase::unit(
            self.p,
            self.n,
            self.m,
            self.repetitions,
            SeedSpec::new(self.master_seed).child(label("verify-lemmas")),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub reference: f64,
    pub value: f64,
    pub std_error: Option<f64>,
    pub relative_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn relative(name: &str, value: f64, std_error: Option<f64>, reference: f64, tolerance: f64) -> Self {
        let relative_deviation = (value - reference).abs() / reference.abs();
        CheckResult {
            name: name.to_string(),
            reference,
            value,
            std_error,
            relative_deviation,
            tolerance,
            pass: relative_deviation <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub c: f64,
    pub c_tilde: f64,
    pub summary: QuadformSummary,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

pub fn verify_quadratic_forms(config: &VerifyConfig) -> Result<VerifyReport> {
    let case = config.case()?;
    let s = simulate_quadforms(&case)?;
    let tol = config.relative_tolerance;
    let mut checks = Vec::new();
    for (k, variant) in ["plain", "centered"].iter().enumerate() {
        checks.push(CheckResult::relative(
            &format!("sandwich_{variant}"),
            s.sandwich[k].mean,
            Some(s.sandwich[k].std_error),
            s.sandwich_limit,
            tol,
        ));
        checks.push(CheckResult::relative(
            &format!("single_{variant}"),
            s.single[k].mean,
            Some(s.single[k].std_error),
            s.single_limit,
            tol,
        ));
    }
    checks.push(CheckResult::relative(
        "sandwich_centered_vs_plain",
        s.sandwich[1].mean,
        None,
        s.sandwich[0].mean,
        config.agreement_tolerance,
    ));
    checks.push(CheckResult::relative(
        "single_centered_vs_plain",
        s.single[1].mean,
        None,
        s.single[0].mean,
        config.agreement_tolerance,
    ));
    checks.push(CheckResult::relative(
        "cross_mean_envelope",
        s.cross_mean_abs.mean,
        Some(s.cross_mean_abs.std_error),
        case.cross_mean_envelope(),
        config.cross_tolerance,
    ));
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        config: config.clone(),
        c: case.c(),
        c_tilde: case.c_tilde(),
        summary: s,
        checks,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(l: u64) -> SeedSpec {
        SeedSpec::new(99).child(l)
    }

    #[test]
    fn scalar_case() {
        let case = QuadformCase::unit(1, 2000, 2000, 400, seed(1)).unwrap();
        let s = simulate_quadforms(&case).unwrap();
        for centered in [false, true] {
            assert!(s.sandwich_error(centered) < 0.05 * s.sandwich_limit.abs());
            assert!(s.single_error(centered) < 0.05 * s.single_limit.abs());
        }
    }

    #[test]
    fn orthogonal_vectors_within_noise() {
        let p = 20;
        let xi = DVector::from_fn(p, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let theta = DVector::from_fn(p, |i, _| if i == 1 { 1.0 } else { 0.0 });
        let case = QuadformCase::new(p, 80, 80, xi, theta, 300, seed(2)).unwrap();
        assert_eq!(case.sandwich_limit(), 0.0);
        let s = simulate_quadforms(&case).unwrap();
        for k in 0..2 {
            assert!(
                s.sandwich[k].mean.abs() <= 3.0 * s.sandwich[k].std_error,
                "{:?}",
                s.sandwich[k]
            );
            assert!(
                s.single[k].mean.abs() <= 3.0 * s.single[k].std_error,
                "{:?}",
                s.single[k]
            );
        }
    }

    #[test]
    fn single_form_classical_regime() {
        let case = QuadformCase::unit(5, 500, 2000, 400, seed(3)).unwrap();
        let err = quadform_single_error(&case, false).unwrap();
        let direct = err + (case.single_limit() - 1.0);
        assert!(direct.abs() < 0.02, "{direct}");
    }

    #[test]
    fn zero_theta_gives_zero_cross_term() {
        let case = QuadformCase::new(4, 20, 20, DVector::from_element(4, 0.5), DVector::zeros(4), 5, seed(4)).unwrap();
        assert_eq!(cross_mean_form_error(&case).unwrap(), 0.0);
    }

    #[test]
    fn cross_term_matches_envelope() {
        let case = QuadformCase::unit(50, 100, 100, 400, seed(5)).unwrap();
        let v = cross_mean_form_error(&case).unwrap();
        let env = case.cross_mean_envelope();
        assert!((v - env).abs() / env < 0.15, "{v} vs {env}");
    }

    #[test]
    fn deterministic() {
        let case = QuadformCase::unit(10, 30, 30, 20, seed(6)).unwrap();
        assert_eq!(simulate_quadforms(&case).unwrap(), simulate_quadforms(&case).unwrap());
    }

    #[test]
    fn rejects_bad_cases() {
        assert!(QuadformCase::unit(10, 11, 30, 20, seed(7)).is_err());
        assert!(QuadformCase::unit(10, 30, 1, 20, seed(7)).is_err());
        assert!(QuadformCase::new(2, 30, 30, DVector::zeros(3), DVector::zeros(2), 5, seed(7)).is_err());
        assert!(QuadformCase::new(2, 30, 30, DVector::from_element(2, 1e4), DVector::zeros(2), 5, seed(7)).is_err());
    }

    #[test]
    fn config_defaults_from_json() {
        let c: VerifyConfig = serde_json::from_str(r#"{"p":4,"n":10,"m":10,"master_seed":1}"#).unwrap();
        assert_eq!(c.repetitions, 500);
        assert_eq!(c.relative_tolerance, 0.05);
        assert_eq!(c.agreement_tolerance, 0.02);
    }
}
