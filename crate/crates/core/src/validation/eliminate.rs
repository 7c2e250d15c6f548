use log::info;

use super::ols::{ols_fit, RegressionFit, INTERCEPT};
use crate::error::{Error, Result};
use crate::proxy::FirmPanelRow;

pub const DEFAULT_P_THRESHOLD: f64 = 0.05;

/// Refits repeatedly, each time removing the regressor with the largest
/// p-value while it exceeds `p_threshold`. Ties go to the alphabetically
/// first name. Listwise deletion is redone on every refit, so dropping a
/// sparse variable brings its rows back.
pub fn backward_eliminate(
    rows: &[FirmPanelRow],
    dependent: &str,
    regressors: &[&str],
    p_threshold: f64,
) -> Result<RegressionFit> {
    if !(p_threshold > 0.0 && p_threshold < 1.0) {
        return Err(Error::Contract(format!(
            "p threshold must lie in (0, 1), got {p_threshold}"
        )));
    }
    let mut active: Vec<&str> = regressors.to_vec();
    let mut dropped = Vec::new();
    loop {
        if active.is_empty() {
            return Err(Error::DegenerateModel(format!(
                "every regressor was eliminated (dropped in order: {})",
                dropped.join(", ")
            )));
        }
        let mut fit = ols_fit(rows, dependent, &active)?;
        let worst = fit
            .terms
            .iter()
            .filter(|t| t.name != INTERCEPT)
            .max_by(|a, b| a.p_value.total_cmp(&b.p_value).then_with(|| b.name.cmp(&a.name)))
            .expect("at least one regressor");
        if worst.p_value <= p_threshold {
            fit.dropped_order = dropped;
            return Ok(fit);
        }
        info!("dropping {} (p = {:.3}, n = {})", worst.name, worst.p_value, fit.n_obs);
        let name = worst.name.clone();
        active.retain(|v| *v != name);
        dropped.push(name);
    }
}
