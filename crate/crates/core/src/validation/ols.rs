use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};
use crate::proxy::FirmPanelRow;

pub const INTERCEPT: &str = "_cons";

/// Relative size below which a column's component orthogonal to the earlier
/// columns counts as zero.
const COLLINEARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    /// 95% confidence interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Pooled OLS fit with homoskedastic standard errors. Terms are listed in
/// regressor order with the intercept last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub dependent: String,
    pub terms: Vec<Term>,
    pub r2: f64,
    pub adj_r2: f64,
    pub rmse: f64,
    pub n_obs: usize,
    pub ss_model: f64,
    pub ss_residual: f64,
    pub f_stat: f64,
    pub f_p_value: f64,
    /// Variables removed by backward elimination, first removed first.
    pub dropped_order: Vec<String>,
}

impl RegressionFit {
    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.term(name).map(|t| t.coefficient)
    }

    pub fn intercept(&self) -> f64 {
        self.coefficient(INTERCEPT).unwrap_or(0.0)
    }

    /// Non-intercept variable names.
    pub fn regressors(&self) -> Vec<&str> {
        self.terms
            .iter()
            .filter(|t| t.name != INTERCEPT)
            .map(|t| t.name.as_str())
            .collect()
    }

    pub fn df_model(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn df_residual(&self) -> usize {
        self.n_obs - self.terms.len()
    }
}

/// Fits `dependent ~ regressors + intercept` after listwise deletion of rows
/// missing any requested variable.
pub fn ols_fit(rows: &[FirmPanelRow], dependent: &str, regressors: &[&str]) -> Result<RegressionFit> {
    let mut y = Vec::new();
    let mut x = Vec::new();
    'rows: for row in rows {
        let Some(yv) = row.value(dependent)? else { continue };
        let mut xs = Vec::with_capacity(regressors.len());
        for name in regressors {
            match row.value(name)? {
                Some(v) => xs.push(v),
                None => continue 'rows,
            }
        }
        y.push(yv);
        x.push(xs);
    }
    ols_fit_matrix(dependent, regressors, &x, &y)
}

/// OLS on explicit data; `x[i]` holds row `i`'s regressor values.
pub fn ols_fit_matrix(dependent: &str, names: &[&str], x: &[Vec<f64>], y: &[f64]) -> Result<RegressionFit> {
    let n = y.len();
    let p = names.len();
    if x.len() != n {
        return Err(Error::Contract(format!(
            "{} regressor rows for {n} observations",
            x.len()
        )));
    }
    if n <= p + 1 {
        return Err(Error::DegenerateModel(format!(
            "{n} observations cannot identify {p} regressors plus an intercept"
        )));
    }
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::Contract("ragged regressor rows".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in regression data".into()));
    }

    // Intercept in column 0 so a constant regressor is the one reported.
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let yv = DVector::from_column_slice(y);

    let qr = design.clone().qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..=p)
        .filter(|&j| {
            let norm = design.column(j).norm();
            norm == 0.0 || r[(j, j)].abs() <= COLLINEARITY_TOL * norm
        })
        .map(|j| {
            if j == 0 {
                INTERCEPT.to_owned()
            } else {
                names[j - 1].to_owned()
            }
        })
        .collect();
    if !collinear.is_empty() {
        return Err(Error::Collinearity(collinear));
    }

    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Collinearity(names.iter().map(|s| s.to_string()).collect()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p + 1, p + 1))
        .ok_or_else(|| Error::Collinearity(names.iter().map(|s| s.to_string()).collect()))?;
    // (X'X)^-1 = R^-1 R^-T; only the diagonal is needed.
    let xtx_inv_diag: Vec<f64> = (0..=p).map(|j| r_inv.row(j).norm_squared()).collect();

    let residuals = &yv - &design * &beta;
    let ss_residual = residuals.norm_squared();
    let y_mean = yv.mean();
    let ss_total: f64 = yv.iter().map(|v| (v - y_mean).powi(2)).sum();
    let df_resid = (n - p - 1) as f64;
    let sigma2 = ss_residual / df_resid;

    let t_dist = StudentsT::new(0.0, 1.0, df_resid).map_err(|e| Error::Domain(e.to_string()))?;
    let t_crit = t_dist.inverse_cdf(0.975);

    let make_term = |name: &str, j: usize| {
        let coefficient = beta[j];
        let std_error = (sigma2 * xtx_inv_diag[j]).sqrt();
        let t_stat = coefficient / std_error;
        let p_value = if t_stat.is_nan() {
            1.0
        } else {
            2.0 * t_dist.sf(t_stat.abs())
        };
        Term {
            name: name.to_owned(),
            coefficient,
            std_error,
            t_stat,
            p_value,
            ci_low: coefficient - t_crit * std_error,
            ci_high: coefficient + t_crit * std_error,
        }
    };
    let mut terms: Vec<Term> = names
        .iter()
        .enumerate()
        .map(|(i, name)| make_term(name, i + 1))
        .collect();
    terms.push(make_term(INTERCEPT, 0));

    let r2 = if ss_total > 0.0 {
        (1.0 - ss_residual / ss_total).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df_resid;
    let ss_model = (ss_total - ss_residual).max(0.0);
    let (f_stat, f_p_value) = if p == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let f = (ss_model / p as f64) / sigma2;
        let pval = FisherSnedecor::new(p as f64, df_resid)
            .map(|d| if f.is_finite() { d.sf(f) } else { 0.0 })
            .unwrap_or(f64::NAN);
        (f, pval)
    };

    Ok(RegressionFit {
        dependent: dependent.to_owned(),
        terms,
        r2,
        adj_r2,
        rmse: sigma2.sqrt(),
        n_obs: n,
        ss_model,
        ss_residual,
        f_stat,
        f_p_value,
        dropped_order: Vec::new(),
    })
}
