//! Continuous-time structural equation models for multi-group behavior
//! panels: exact discretization, Kalman-filter likelihood, maximum-likelihood
//! fitting, standardized effects and simulation.

pub mod data;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod io;
pub mod kalman;
pub mod mat;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod sim;
pub mod standardize;

pub use data::{extract_groups, GroupData, Subject};
pub use dynamics::{discretize_dynamics, stationary_covariance, Discrete};
pub use error::{Error, Result};
pub use fit::{aic, fit, fit_groups, FitResult, ParamEstimate};
pub use kalman::{group_loglik, kalman_filter, KalmanOutput};
pub use model::{CtModelSpec, CtParams, DriftForm, GroupParams, Grouping, InitialForm, OptimizerConfig};
pub use sim::{recovery_experiment, simulate, ManifestMode, PredictorProcess, RecoveryReport, SimDesign};
pub use standardize::{rank_links, standardize, LinkEdge, LinkReport, StdEffect};
