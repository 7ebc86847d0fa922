//! Estimation and evaluation of high-dimensional global minimum variance
//! (GMV) portfolios.
//!
//! The crate covers three estimators of the GMV weights (the plug-in sample
//! estimator and two weight-shrinkage estimators towards a target portfolio),
//! the out-of-sample variance and relative loss of a portfolio together with
//! their empirical counterparts, the closed-form high-dimensional limits of
//! all of these quantities, and the machinery used to check those limits
//! numerically: scenario generators, a Monte Carlo study driver, a harness
//! for the underlying quadratic-form limits and a rolling-window backtest.
//!
//! Matrices are `nalgebra::DMatrix<f64>`; a returns panel stores assets in
//! rows and time in columns.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod backtest;
pub mod datagen;
mod error;
pub mod estimators;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod parallel;
pub mod risk;
pub mod rmt_verify;
pub mod rng;
pub mod stats;

pub use error::{Error, Result, WindowSize};
pub use model::{CovKind, CovarianceEstimate, MeanVector, PortfolioWeights, ReturnsWindow, Strategy};
pub use rng::SeedSpec;
