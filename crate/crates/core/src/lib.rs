//! Classical and robust empirical likelihood (EL) estimation for linear
//! regression.
//!
//! EL assigns each observation an unknown probability p_i and maximizes
//! Π p_i subject to Σ p_i z_i(β) = 0. Classical constraints use
//! z_i = X_i·r_i; robust constraints replace the residual by ψ(r_i/σ) from a
//! Huber or Tukey M-estimator, bounding the pull of y-direction outliers.
//!
//! - [`kernels`]: ρ/ψ/ρ₀ functions and the MAD scale
//! - [`classical`]: OLS and IRLS M-estimation
//! - [`inner`]: estimating functions and the dual solve for λ(β)
//! - [`outer`]: Nelder–Mead maximization of the profile log-EL
//! - [`sim`]: seeded Monte Carlo comparison of estimators
//! - [`io`]: CSV ingestion and the bundled Belgium phone-calls data

pub mod classical;
pub mod dataset;
pub mod error;
pub mod inner;
pub mod io;
pub mod kernels;
pub mod methods;
pub mod outer;
pub mod rng;
pub mod sim;
pub mod simplex;

pub use classical::{m_fit, ml_variance, ols_fit, RegressionFit, RegressionMethod};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use inner::{build_z, profile, profile_log_el, solve_lambda, ConstraintMode, InnerSolution};
pub use io::{belgium_dataset, read_dataset, write_dataset, ResponseColumn, TabularSource};
pub use kernels::{mad_scale, KernelKind, PsiKernel, ScaleEstimate, ScaleMethod};
pub use methods::{Method, MethodConfig};
pub use outer::{el_fit, fit_report, robust_mode, ElFit, ElOptions, FitReport};
pub use sim::{generate_replication, mse, relative_efficiency, run_scenario, ErrorModel, ScenarioReport, ScenarioSpec};

pub use nalgebra::{DMatrix, DVector};
