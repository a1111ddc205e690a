//! Causal direction discovery between two variables in the presence of
//! control covariates.
//!
//! Given columns X, Y and controls W, the classifier fits a nonlinear
//! additive-noise regression in each direction (Y on X and W, X on Y and W)
//! on one half of the data and measures, on the other half, how strongly the
//! residuals still depend on the regressor given W. The direction with the
//! smaller kernel conditional-independence statistic is reported as causal.
//!
//! | module | contents |
//! |---|---|
//! | [`kernel`] | Gaussian kernel, Gram matrices, centering, bandwidth heuristic |
//! | [`independence`] | KCI statistic, ridge residual operator, HSIC fallback |
//! | [`regression`] | penalized B-spline additive models with GCV |
//! | [`classifier`] | normalize, split, fit both ways, compare |
//! | [`simulation`] | data generating process and Monte Carlo accuracy grids |
//! | [`cli`] | CSV ingestion, run manifests and the `revcause` commands |
//!
//! ```no_run
//! use revcause::classifier::{decide, ProblemSpec};
//! use revcause::simulation::{draw_sample, Cell, DgpConfig, Kappa};
//!
//! let cell = Cell { kappa: Kappa::K1, tau: 1.0, rho: 0, q: 1.0, n: 1000, target_var: 1.0 };
//! let data = draw_sample(&DgpConfig { cell, seed: 1 }).unwrap();
//! let spec = ProblemSpec::new("x", "y", &["w"]).unwrap();
//! let decision = decide(&data, &spec).unwrap();
//! println!("{}", decision.outcome);
//! ```

pub mod classifier;
pub mod cli;
pub mod data;
pub mod error;
pub mod independence;
pub mod kernel;
pub mod regression;
pub mod simulation;

#[cfg(test)]
mod test_oracle;

pub use classifier::{decide, DirectionDecision, Outcome, ProblemSpec};
pub use data::{Column, ColumnKind, Dataset};
pub use error::{Error, Result};
