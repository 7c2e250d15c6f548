//! Statistical validation of the index: rank stability across waves and
//! k-factors, pooled OLS against market proxies, backward elimination, and
//! prediction from a fitted (or the published) linear model.

mod eliminate;
mod ols;
mod predict;
mod report;
mod spearman;
mod sweep;

pub use eliminate::{backward_eliminate, DEFAULT_P_THRESHOLD};
pub use ols::{ols_fit, ols_fit_matrix, RegressionFit, Term, INTERCEPT};
pub use predict::{predict_iai, IaiInputs, LinearModel};
pub use report::render_fit_table;
pub use spearman::{average_ranks, spearman_rho, Ranking};
pub use sweep::{sweep_k, KSweep, DEFAULT_K_GRID};
