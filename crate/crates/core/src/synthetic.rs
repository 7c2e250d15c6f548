//! Seeded synthetic data: vote logs driven by a latent firm ordering, and
//! regression panels whose OLS fits hit prescribed t-statistics exactly.

use chrono::{DateTime, Duration, Utc};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::firm::{Firm, FirmId, FirmUniverse};
use crate::proxy::FirmPanelRow;
use crate::votes::VoteEvent;

/// `F000`, `F001`, ... in latent order: lower index = better disclosure.
pub fn firm_ids(n: usize) -> Vec<FirmId> {
    (0..n).map(|i| FirmId(format!("F{i:03}"))).collect()
}

pub fn universe(n: usize) -> FirmUniverse {
    FirmUniverse::new(firm_ids(n).into_iter().map(|id| {
        let t = format!("T{}", &id.0[1..]);
        Firm::new(id.0.clone(), t, format!("Firm {}", id.0))
    }))
    .expect("generated ids are unique")
}

/// Parameters of a simulated survey.
#[derive(Debug, Clone)]
pub struct LatentLogSpec {
    pub n_firms: usize,
    pub n_votes: usize,
    /// Probability the analyst picks the latently worse firm.
    pub noise: f64,
    pub seed: u64,
    pub start: DateTime<Utc>,
    /// Gap between consecutive vote timestamps.
    pub spacing: Duration,
}

impl LatentLogSpec {
    pub fn new(n_firms: usize, n_votes: usize, noise: f64, seed: u64) -> Self {
        LatentLogSpec {
            n_firms,
            n_votes,
            noise,
            seed,
            start: DateTime::parse_from_rfc3339("2016-09-01T00:00:00Z")
                .expect("valid")
                .with_timezone(&Utc),
            spacing: Duration::minutes(1),
        }
    }
}

/// Votes on uniformly random distinct pairs; the latently better firm wins
/// with probability `1 - noise`. Sessions hold ten consecutive votes.
pub fn latent_order_log(spec: &LatentLogSpec) -> Vec<VoteEvent> {
    assert!(spec.n_firms >= 2, "need at least two firms");
    let ids = firm_ids(spec.n_firms);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.n_votes)
        .map(|i| {
            let a = rng.random_range(0..spec.n_firms);
            let mut b = rng.random_range(0..spec.n_firms - 1);
            if b >= a {
                b += 1;
            }
            let better = a.min(b);
            let worse = a.max(b);
            let winner = if rng.random::<f64>() < spec.noise {
                worse
            } else {
                better
            };
            VoteEvent {
                seq: i as u64 + 1,
                timestamp: spec.start + spec.spacing * i as i32,
                session_id: format!("s{:06}", i / 10),
                analyst_id: format!("a{:04}", (i / 10) % 997),
                firm_a: ids[a].clone(),
                firm_b: ids[b].clone(),
                winner: ids[winner].clone(),
            }
        })
        .collect()
}

/// Target response built so OLS of `y` on `x` (plus intercept) returns the
/// given t-statistics and root MSE exactly.
#[derive(Debug, Clone)]
pub struct CalibrationTarget {
    pub t_stats: Vec<f64>,
    pub intercept: f64,
    pub rmse: f64,
}

fn design(x: &[Vec<f64>]) -> DMatrix<f64> {
    let p = x.first().map_or(0, Vec::len);
    DMatrix::from_fn(x.len(), p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] })
}

/// Coefficients that produce the target t-statistics for this design.
fn target_coefficients(xm: &DMatrix<f64>, target: &CalibrationTarget) -> Result<DVector<f64>> {
    let gram_inv = (xm.transpose() * xm)
        .try_inverse()
        .ok_or_else(|| Error::Collinearity(vec!["calibration design".into()]))?;
    let p = xm.ncols() - 1;
    if target.t_stats.len() != p {
        return Err(Error::Contract(format!(
            "{} t targets for {p} regressors",
            target.t_stats.len()
        )));
    }
    let mut beta = DVector::zeros(p + 1);
    beta[0] = target.intercept;
    for j in 0..p {
        beta[j + 1] = target.t_stats[j] * target.rmse * gram_inv[(j + 1, j + 1)].sqrt();
    }
    Ok(beta)
}

/// Projects `v` onto the orthogonal complement of `xm`'s columns.
fn residualize(xm: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let qr = xm.clone().qr();
    let q = qr.q();
    v - &q * (q.transpose() * v)
}

/// Returns `y` such that `ols(y ~ x)` has exactly the target t-statistics,
/// intercept and root MSE.
pub fn calibrated_response(x: &[Vec<f64>], target: &CalibrationTarget, seed: u64) -> Result<Vec<f64>> {
    let xm = design(x);
    let n = xm.nrows();
    let df = n as f64 - xm.ncols() as f64;
    if df <= 0.0 {
        return Err(Error::DegenerateModel(
            "calibration needs more rows than columns".into(),
        ));
    }
    let beta = target_coefficients(&xm, target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let e = residualize(&xm, &raw);
    let e = e.scale(target.rmse * df.sqrt() / e.norm());
    Ok((&xm * beta + e).iter().copied().collect())
}

/// Extends a response already fixed on some rows to further rows so that the
/// fit over all rows hits the target. `x_fixed`/`y_fixed` are the rows whose
/// response cannot change, `x_free` the rows to fill in.
pub fn calibrated_extension(
    x_fixed: &[Vec<f64>],
    y_fixed: &[f64],
    x_free: &[Vec<f64>],
    target: &CalibrationTarget,
    seed: u64,
) -> Result<Vec<f64>> {
    let all: Vec<Vec<f64>> = x_fixed.iter().chain(x_free).cloned().collect();
    let xa = design(&all);
    let xf = design(x_fixed);
    let xm = design(x_free);
    let df = all.len() as f64 - xa.ncols() as f64;
    let beta = target_coefficients(&xa, target)?;

    // Total residual r = y - X beta must be orthogonal to X and have the
    // target norm. The fixed block's part is given; the free block takes a
    // particular solution plus a component orthogonal to its own columns.
    let r_fixed = DVector::from_column_slice(y_fixed) - &xf * &beta;
    let c = -(xf.transpose() * &r_fixed);
    let gram = xm.transpose() * &xm;
    let coef = gram
        .lu()
        .solve(&c)
        .ok_or_else(|| Error::Collinearity(vec!["free block".into()]))?;
    let r_particular = &xm * coef;
    let used = r_fixed.norm_squared() + r_particular.norm_squared();
    let needed = target.rmse.powi(2) * df;
    if used > needed {
        return Err(Error::DegenerateModel(format!(
            "fixed rows already carry residual SS {used:.1} above the target {needed:.1}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DVector::from_fn(xm.nrows(), |_, _| StandardNormal.sample(&mut rng));
    let u = residualize(&xm, &raw);
    let r_free = r_particular + u.scale((needed - used).sqrt() / u.norm());
    Ok((&xm * beta + r_free).iter().copied().collect())
}

/// Two-sided t-statistic whose p-value on `df` degrees of freedom is `p`.
pub fn t_for_p_value(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("positive df")
        .inverse_cdf(1.0 - p / 2.0)
}

/// Layout and targets for the elimination-path panel.
#[derive(Debug, Clone)]
pub struct EliminationFixture {
    pub rows: Vec<FirmPanelRow>,
    /// Regressors of the full model, in table order.
    pub full_model: Vec<&'static str>,
}

pub const FULL_MODEL: [&str; 8] = [
    "coverage",
    "error",
    "vol",
    "baa",
    "ln_volume",
    "ln_size",
    "ff",
    "qtobin",
];

/// 114 firms over three waves (342 rows). Forecast error is present on 174
/// rows and Tobin q missing on 3, one of them among the error rows, so the
/// full model sees 173 complete rows and the model without `error` 339.
///
/// The full-model fit has `ff`, `baa`, `error`, `ln_volume` at p-values
/// 0.892, 0.968, 0.328 and 0.149 with everything else significant; once
/// `error` is gone the 339-row fit keeps `ln_volume` at p = 0.149 while
/// coverage, vol, ln_size and qtobin stay significant.
pub fn elimination_fixture(seed: u64) -> Result<EliminationFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_firms = 114;
    let waves = ["w2", "w3", "w4"];
    let norm = |m: f64, s: f64| Normal::new(m, s).expect("valid normal");

    let mut rows = Vec::with_capacity(n_firms * waves.len());
    for wave in waves {
        for f in 0..n_firms {
            let coverage = norm(10.55, 4.8).sample(&mut rng).round().clamp(0.0, 21.0) as u32;
            let vol = norm(40.67, 19.0).sample(&mut rng).clamp(1.67, 145.593);
            let baa = 0.0444 + norm(0.0, 0.2).sample(&mut rng).abs();
            let ln_volume = norm(16.25, 2.1).sample(&mut rng);
            let ln_size = norm(23.26, 1.57).sample(&mut rng);
            let ff = norm(58.2, 26.0).sample(&mut rng).clamp(4.05, 100.0);
            let qtobin = 0.5829 + norm(0.0, 0.8).sample(&mut rng).exp();
            let error = norm(-0.24, 0.73).sample(&mut rng);
            rows.push(FirmPanelRow {
                firm_id: format!("F{f:03}"),
                wave: wave.to_owned(),
                ranking: 0.0,
                coverage: Some(coverage),
                error: Some(error),
                vol: Some(vol),
                baa: Some(baa),
                ln_volume: Some(ln_volume),
                ln_size: Some(ln_size),
                ff: Some(ff),
                qtobin: Some(qtobin),
                pin: None,
            });
        }
    }
    // Error on the even rows plus rows 1, 3 and 5 (174 in all); qtobin
    // missing on one error row and two rows without error.
    for (i, row) in rows.iter_mut().enumerate() {
        if i % 2 == 1 && i > 5 {
            row.error = None;
        }
    }
    for i in [0, 7, 9] {
        rows[i].qtobin = None;
    }

    let values = |row: &FirmPanelRow, names: &[&str]| -> Vec<f64> {
        names.iter().map(|n| row.value(n).unwrap().unwrap()).collect()
    };
    let has_all = |row: &FirmPanelRow, names: &[&str]| names.iter().all(|n| row.value(n).unwrap().is_some());

    // Stage 1: the full model on complete rows.
    let stage1: Vec<usize> = (0..rows.len()).filter(|&i| has_all(&rows[i], &FULL_MODEL)).collect();
    let df1 = (stage1.len() - FULL_MODEL.len() - 1) as f64;
    let t1: Vec<f64> = FULL_MODEL
        .iter()
        .map(|name| match *name {
            "coverage" => 2.9,
            "error" => -t_for_p_value(0.328, df1),
            "vol" => -3.01,
            "baa" => t_for_p_value(0.968, df1),
            "ln_volume" => t_for_p_value(0.149, df1),
            "ln_size" => 4.57,
            "ff" => -t_for_p_value(0.892, df1),
            "qtobin" => 3.48,
            _ => unreachable!(),
        })
        .collect();
    let x1: Vec<Vec<f64>> = stage1.iter().map(|&i| values(&rows[i], &FULL_MODEL)).collect();
    let y1 = calibrated_response(
        &x1,
        &CalibrationTarget {
            t_stats: t1,
            intercept: 976.4072,
            rmse: 72.196,
        },
        seed ^ 1,
    )?;
    for (&i, y) in stage1.iter().zip(&y1) {
        rows[i].ranking = *y;
    }

    // Stage 2: without baa, ff and error, on every row with qtobin.
    let reduced = ["coverage", "vol", "ln_volume", "ln_size", "qtobin"];
    let df2 = (rows.iter().filter(|r| has_all(r, &reduced)).count() - reduced.len() - 1) as f64;
    let free: Vec<usize> = (0..rows.len())
        .filter(|&i| has_all(&rows[i], &reduced) && !stage1.contains(&i))
        .collect();
    let target2 = CalibrationTarget {
        t_stats: vec![2.68, -4.12, t_for_p_value(0.149, df2), 7.54, 6.54],
        intercept: 1012.343,
        rmse: 68.769,
    };
    let xf: Vec<Vec<f64>> = stage1.iter().map(|&i| values(&rows[i], &reduced)).collect();
    let xm: Vec<Vec<f64>> = free.iter().map(|&i| values(&rows[i], &reduced)).collect();
    let y2 = calibrated_extension(&xf, &y1, &xm, &target2, seed ^ 2)?;
    for (&i, y) in free.iter().zip(&y2) {
        rows[i].ranking = *y;
    }
    // Rows never used by either fit still need a plausible index value.
    for row in rows.iter_mut().filter(|r| r.ranking == 0.0) {
        row.ranking = 1505.0 + rng.random_range(-80.0..80.0);
    }

    Ok(EliminationFixture {
        rows,
        full_model: FULL_MODEL.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::ols_fit_matrix;

    #[test]
    fn latent_log_is_well_formed() {
        let log = latent_order_log(&LatentLogSpec::new(10, 200, 0.05, 1));
        assert_eq!(log.len(), 200);
        crate::elo::check_log_order(&log).unwrap();
        assert!(log.iter().all(|e| e.validate().is_ok()));
        let upsets = log.iter().filter(|e| e.winner.0 > e.loser().0).count();
        assert!(upsets > 0 && upsets < 30, "{upsets}");
    }

    #[test]
    fn calibrated_response_hits_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.random::<f64>() * 10.0, rng.random::<f64>()])
            .collect();
        let target = CalibrationTarget {
            t_stats: vec![3.0, -0.5],
            intercept: 7.0,
            rmse: 2.0,
        };
        let y = calibrated_response(&x, &target, 9).unwrap();
        let fit = ols_fit_matrix("y", &["a", "b"], &x, &y).unwrap();
        assert!((fit.term("a").unwrap().t_stat - 3.0).abs() < 1e-8);
        assert!((fit.term("b").unwrap().t_stat + 0.5).abs() < 1e-8);
        assert!((fit.intercept() - 7.0).abs() < 1e-8);
        assert!((fit.rmse - 2.0).abs() < 1e-9);
    }

    #[test]
    fn t_for_p_inverts_two_sided_p() {
        // t(0.975; 164 df) = 1.97453
        let t = t_for_p_value(0.05, 164.0);
        assert!((t - 1.97453).abs() < 1e-4);
        let t2 = t_for_p_value(0.05, 2.0);
        assert!((t2 - 4.302653).abs() < 1e-5);
    }
}
