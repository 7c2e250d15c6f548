use log::warn;
use serde::{Deserialize, Serialize};

use super::ols::RegressionFit;

/// Intercept plus named slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<(String, f64)>,
}

impl LinearModel {
    /// The published final four-variable model.
    pub fn published() -> Self {
        LinearModel {
            intercept: 1012.343,
            coefficients: vec![
                ("coverage".into(), 2.23952),
                ("vol".into(), -0.8197953),
                ("ln_size".into(), 20.01405),
                ("qtobin".into(), 23.09268),
            ],
        }
    }

    pub fn from_fit(fit: &RegressionFit) -> Self {
        LinearModel {
            intercept: fit.intercept(),
            coefficients: fit
                .regressors()
                .iter()
                .map(|n| (canonical(n).to_owned(), fit.coefficient(n).unwrap()))
                .collect(),
        }
    }

    pub fn coefficient(&self, name: &str) -> f64 {
        let name = canonical(name);
        self.coefficients
            .iter()
            .find(|(n, _)| n == name)
            .map_or(0.0, |(_, c)| *c)
    }
}

fn canonical(name: &str) -> &str {
    match name {
        "lnsize" => "ln_size",
        "lnvolume" => "ln_volume",
        "cov" => "coverage",
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IaiInputs {
    pub coverage: f64,
    pub vol: f64,
    pub ln_size: f64,
    pub qtobin: f64,
}

/// Observed min/max of each input in the estimation sample.
const SAMPLE_RANGES: [(&str, f64, f64); 4] = [
    ("coverage", 0.0, 21.0),
    ("vol", 1.67, 145.593),
    ("ln_size", 19.10888, 28.05268),
    ("qtobin", 0.5829, 11.2332),
];

/// `intercept + Σ coef * x`. Inputs outside the estimation sample's range are
/// accepted with a warning.
pub fn predict_iai(inputs: &IaiInputs, model: &LinearModel) -> f64 {
    let values = [inputs.coverage, inputs.vol, inputs.ln_size, inputs.qtobin];
    for ((name, lo, hi), v) in SAMPLE_RANGES.iter().zip(values) {
        if v < *lo || v > *hi {
            warn!("{name} = {v} lies outside the estimation sample range [{lo}, {hi}]");
        }
    }
    model.intercept
        + SAMPLE_RANGES
            .iter()
            .zip(values)
            .map(|((name, _, _), v)| model.coefficient(name) * v)
            .sum::<f64>()
}
