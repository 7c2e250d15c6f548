use std::fmt::Write;

use super::ols::RegressionFit;

/// Plain-text fit report: an ANOVA block with the fit statistics, followed by
/// one line per coefficient (`Coef. Std. Err. t P>|t| [95% Conf. Interval]`).
pub fn render_fit_table(fit: &RegressionFit) -> String {
    let mut out = String::new();
    let df_m = fit.df_model();
    let df_r = fit.df_residual();
    let ss_total = fit.ss_model + fit.ss_residual;
    let ms = |ss: f64, df: usize| if df == 0 { f64::NAN } else { ss / df as f64 };
    let stats = [
        format!("Number of obs = {:>10}", fit.n_obs),
        format!("F({df_m}, {df_r}) = {:>10.2}", fit.f_stat),
        format!("Prob > F      = {:>10.4}", fit.f_p_value),
        format!("R-squared     = {:>10.4}", fit.r2),
        format!("Adj R-squared = {:>10.4}", fit.adj_r2),
        format!("Root MSE      = {:>10.3}", fit.rmse),
    ];
    let anova = [
        format!("{:>10} | {:>14} {:>6} {:>14}", "Source", "SS", "df", "MS"),
        "-".repeat(50),
        format!(
            "{:>10} | {:>14.3} {:>6} {:>14.3}",
            "Model",
            fit.ss_model,
            df_m,
            ms(fit.ss_model, df_m)
        ),
        format!(
            "{:>10} | {:>14.3} {:>6} {:>14.3}",
            "Residual",
            fit.ss_residual,
            df_r,
            ms(fit.ss_residual, df_r)
        ),
        "-".repeat(50),
        format!(
            "{:>10} | {:>14.3} {:>6} {:>14.3}",
            "Total",
            ss_total,
            fit.n_obs - 1,
            ms(ss_total, fit.n_obs - 1)
        ),
    ];
    for i in 0..anova.len().max(stats.len()) {
        let left = anova.get(i).map(String::as_str).unwrap_or("");
        let right = stats.get(i).map(String::as_str).unwrap_or("");
        let _ = writeln!(out, "{left:<52}   {right}");
    }
    out = out.lines().map(str::trim_end).collect::<Vec<_>>().join("\n");
    out.push_str("\n\n");

    let rule = "-".repeat(90);
    let _ = writeln!(
        out,
        "{:>12} | {:>12} {:>12} {:>8} {:>7} {:>14} {:>14}",
        fit.dependent, "Coef.", "Std. Err.", "t", "P>|t|", "[95% Conf.", "Interval]"
    );
    let _ = writeln!(out, "{rule}");
    for t in &fit.terms {
        let _ = writeln!(
            out,
            "{:>12} | {:>12.7} {:>12.7} {:>8.2} {:>7.3} {:>14.7} {:>14.7}",
            t.name, t.coefficient, t.std_error, t.t_stat, t.p_value, t.ci_low, t.ci_high
        );
    }
    let _ = writeln!(out, "{rule}");
    if !fit.dropped_order.is_empty() {
        let _ = writeln!(out, "dropped (in order): {}", fit.dropped_order.join(", "));
    }
    out
}
