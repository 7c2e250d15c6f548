//! Market proxies for information asymmetry and the firm-wave panel they feed.
//!
//! VOL and BaA are reported in percent (x100): VOL is the firm/index ratio of
//! daily log-return standard deviations, BaA the window mean of daily relative
//! quoted spreads.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::firm::{FirmId, FirmUniverse};
use crate::numeric::{mean, sample_sd};

pub const MIN_RETURN_OBSERVATIONS: usize = 20;
pub const DEFAULT_WINDOW_DAYS: usize = 252;
pub const ERROR_PRICE_LAG_DAYS: usize = 5;

/// Absolute forecast miss deflated by the price five days before the
/// announcement.
pub fn compute_error(actual_eps: f64, median_forecast: f64, price_5d_before: f64) -> Result<f64> {
    if !(price_5d_before > 0.0) {
        return Err(Error::Domain(format!(
            "deflating price must be positive, got {price_5d_before}"
        )));
    }
    Ok((actual_eps - median_forecast).abs() / price_5d_before)
}

/// `100 * sd(firm) / sd(index)` over daily return series of equal length.
pub fn compute_vol(firm_returns: &[f64], index_returns: &[f64]) -> Result<f64> {
    if firm_returns.len() != index_returns.len() {
        return Err(Error::Contract(format!(
            "return series cover different windows ({} vs {} observations)",
            firm_returns.len(),
            index_returns.len()
        )));
    }
    if firm_returns.len() < MIN_RETURN_OBSERVATIONS {
        return Err(Error::DegenerateWindow(format!(
            "{} return observations, need at least {MIN_RETURN_OBSERVATIONS}",
            firm_returns.len()
        )));
    }
    let index_sd = sample_sd(index_returns);
    let scale = index_returns.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if !(index_sd > 1e-12 * scale) {
        return Err(Error::DegenerateWindow("index returns have zero variance".into()));
    }
    Ok(100.0 * sample_sd(firm_returns) / index_sd)
}

/// Daily log returns of a price series.
pub fn log_returns(prices: &[f64]) -> Vec<f64> {
    prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
}

/// One day's relative spread `(ask - bid) / price`, unscaled.
pub fn compute_baa(bid: f64, ask: f64, price: f64) -> Result<f64> {
    if !(bid > 0.0 && price > 0.0) {
        return Err(Error::Domain(format!(
            "bid and price must be positive, got bid={bid} price={price}"
        )));
    }
    if ask < bid {
        return Err(Error::DataQuality(format!("crossed quote: ask {ask} < bid {bid}")));
    }
    Ok((ask - bid) / price)
}

/// Window mean of daily relative spreads in percent. Crossed or invalid
/// quotes are skipped with a warning; `None` when no day survives.
pub fn window_baa(quotes: &[(f64, f64, f64)]) -> Option<f64> {
    let spreads: Vec<f64> = quotes
        .iter()
        .filter_map(|&(bid, ask, price)| match compute_baa(bid, ask, price) {
            Ok(v) => Some(v),
            Err(e) => {
                warn!("skipping quote day: {e}");
                None
            }
        })
        .collect();
    (!spreads.is_empty()).then(|| 100.0 * mean(&spreads))
}

/// `(market value of equity + total liabilities) / total assets`.
pub fn compute_tobinq(market_cap: f64, total_liabilities: f64, total_assets: f64) -> Result<f64> {
    if !(total_assets > 0.0) {
        return Err(Error::Domain(format!(
            "total assets must be positive, got {total_assets}"
        )));
    }
    if !(market_cap > 0.0) || total_liabilities < 0.0 {
        return Err(Error::Domain(format!(
            "need market_cap > 0 and liabilities >= 0, got {market_cap} and {total_liabilities}"
        )));
    }
    Ok((market_cap + total_liabilities) / total_assets)
}

/// One firm in one wave. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmPanelRow {
    pub firm_id: String,
    pub wave: String,
    pub ranking: f64,
    pub coverage: Option<u32>,
    pub error: Option<f64>,
    pub vol: Option<f64>,
    pub baa: Option<f64>,
    pub ln_volume: Option<f64>,
    pub ln_size: Option<f64>,
    pub ff: Option<f64>,
    pub qtobin: Option<f64>,
    #[serde(default)]
    pub pin: Option<f64>,
}

/// Regressor names accepted by [`FirmPanelRow::value`].
pub const PANEL_VARIABLES: [&str; 10] = [
    "ranking",
    "coverage",
    "error",
    "vol",
    "baa",
    "ln_volume",
    "ln_size",
    "ff",
    "qtobin",
    "pin",
];

impl FirmPanelRow {
    /// Looks a variable up by name. `lnsize`/`lnvolume` are accepted as
    /// aliases. Unknown names are an error.
    pub fn value(&self, name: &str) -> Result<Option<f64>> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "ranking" | "iai" => Some(self.ranking),
            "coverage" | "cov" => self.coverage.map(f64::from),
            "error" => self.error,
            "vol" => self.vol,
            "baa" => self.baa,
            "ln_volume" | "lnvolume" => self.ln_volume,
            "ln_size" | "lnsize" => self.ln_size,
            "ff" => self.ff,
            "qtobin" => self.qtobin,
            "pin" => self.pin,
            other => return Err(Error::Contract(format!("unknown panel variable {other:?}"))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::DataQuality(format!("{} / {}: {msg}", self.firm_id, self.wave)));
        if self.baa.is_some_and(|v| v < 0.0) {
            return fail("baa must be >= 0".into());
        }
        if self.ff.is_some_and(|v| !(v > 0.0 && v <= 100.0)) {
            return fail(format!("free float {:?} outside (0, 100]", self.ff));
        }
        if self.qtobin.is_some_and(|v| !(v > 0.0)) {
            return fail("qtobin must be > 0".into());
        }
        Ok(())
    }
}

pub fn write_panel_csv<W: Write>(mut writer: W, rows: &[FirmPanelRow]) -> Result<()> {
    writeln!(writer, "# vol and baa are scaled x100; empty cells are missing")?;
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "firm_id",
        "wave",
        "ranking",
        "coverage",
        "error",
        "vol",
        "baa",
        "ln_volume",
        "ln_size",
        "ff",
        "qtobin",
        "pin",
    ])?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.firm_id.clone(),
            r.wave.clone(),
            r.ranking.to_string(),
            r.coverage.map(|c| c.to_string()).unwrap_or_default(),
            cell(r.error),
            cell(r.vol),
            cell(r.baa),
            cell(r.ln_volume),
            cell(r.ln_size),
            cell(r.ff),
            cell(r.qtobin),
            cell(r.pin),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_panel_csv<R: Read>(reader: R) -> Result<Vec<FirmPanelRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<FirmPanelRow>() {
        let row = rec?;
        row.validate()?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Deserialize)]
pub struct PriceRow {
    pub firm_id: String,
    pub date: NaiveDate,
    pub close: f64,
    pub bid: Option<f64>,
    pub ask: Option<f64>,
    pub volume: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct IndexRow {
    pub date: NaiveDate,
    pub close: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FundamentalsRow {
    pub firm_id: String,
    pub wave: String,
    pub market_cap: Option<f64>,
    pub total_liabilities: Option<f64>,
    pub total_assets: Option<f64>,
    pub free_float_pct: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CoverageRow {
    pub firm_id: String,
    pub wave: String,
    pub analyst_count: u32,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EarningsRow {
    pub firm_id: String,
    pub announce_date: NaiveDate,
    pub actual_eps: Option<f64>,
    pub median_forecast_eps: Option<f64>,
}

/// Reads any of the proxy input CSVs into its row type.
pub fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketDay {
    pub date: NaiveDate,
    pub close: f64,
    pub bid: Option<f64>,
    pub ask: Option<f64>,
    pub volume: Option<f64>,
}

/// Daily market data for one firm; dates strictly increasing, prices > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSeries {
    pub firm_id: String,
    pub days: Vec<MarketDay>,
}

impl MarketSeries {
    pub fn new(firm_id: impl Into<String>, days: Vec<MarketDay>) -> Result<Self> {
        let firm_id = firm_id.into();
        if days.windows(2).any(|w| w[1].date <= w[0].date) {
            return Err(Error::DataQuality(format!(
                "firm {firm_id}: dates not strictly increasing"
            )));
        }
        if days.iter().any(|d| !(d.close > 0.0)) {
            return Err(Error::DataQuality(format!("firm {firm_id}: non-positive close price")));
        }
        Ok(MarketSeries { firm_id, days })
    }

    /// The last `len` days on or before `end`.
    pub fn window(&self, end: NaiveDate, len: usize) -> &[MarketDay] {
        let stop = self.days.partition_point(|d| d.date <= end);
        &self.days[stop.saturating_sub(len)..stop]
    }
}

/// Index-level daily closes.
#[derive(Debug, Clone, Default)]
pub struct IndexSeries {
    closes: BTreeMap<NaiveDate, f64>,
}

impl IndexSeries {
    pub fn new(rows: &[IndexRow]) -> Result<Self> {
        let mut closes = BTreeMap::new();
        for r in rows {
            if !(r.close > 0.0) {
                return Err(Error::DataQuality(format!("index close on {} is not positive", r.date)));
            }
            if closes.insert(r.date, r.close).is_some() {
                return Err(Error::DataQuality(format!("duplicate index date {}", r.date)));
            }
        }
        Ok(IndexSeries { closes })
    }
}

/// A named rating snapshot taken at a cutoff date.
#[derive(Debug, Clone)]
pub struct WaveRatings {
    pub wave: String,
    pub cutoff: NaiveDate,
    pub ratings: Vec<(FirmId, f64)>,
}

#[derive(Debug, Clone)]
pub struct PanelConfig {
    /// Trading days per proxy window, ending at the wave cutoff.
    pub window_days: usize,
}

impl Default for PanelConfig {
    fn default() -> Self {
        PanelConfig {
            window_days: DEFAULT_WINDOW_DAYS,
        }
    }
}

/// Raw proxy inputs, indexed for the join.
#[derive(Debug, Clone, Default)]
pub struct ProxyInputs {
    series: HashMap<String, MarketSeries>,
    index: IndexSeries,
    fundamentals: HashMap<(String, String), FundamentalsRow>,
    coverage: HashMap<(String, String), u32>,
    earnings: HashMap<String, Vec<EarningsRow>>,
    pin: HashMap<(String, String), f64>,
}

impl ProxyInputs {
    pub fn new(
        prices: Vec<PriceRow>,
        index: &[IndexRow],
        fundamentals: Vec<FundamentalsRow>,
        coverage: Vec<CoverageRow>,
        earnings: Vec<EarningsRow>,
    ) -> Result<Self> {
        let mut by_firm: BTreeMap<String, Vec<MarketDay>> = BTreeMap::new();
        for p in prices {
            by_firm.entry(p.firm_id).or_default().push(MarketDay {
                date: p.date,
                close: p.close,
                bid: p.bid,
                ask: p.ask,
                volume: p.volume,
            });
        }
        let mut series = HashMap::new();
        for (firm, mut days) in by_firm {
            days.sort_by_key(|d| d.date);
            series.insert(firm.clone(), MarketSeries::new(firm, days)?);
        }

        let mut fund_map = HashMap::new();
        for f in fundamentals {
            let key = (f.firm_id.clone(), f.wave.clone());
            if fund_map.insert(key, f.clone()).is_some() {
                return Err(Error::Join {
                    firm: f.firm_id,
                    wave: f.wave,
                });
            }
        }
        let mut cov_map = HashMap::new();
        for c in coverage {
            if cov_map
                .insert((c.firm_id.clone(), c.wave.clone()), c.analyst_count)
                .is_some()
            {
                return Err(Error::Join {
                    firm: c.firm_id,
                    wave: c.wave,
                });
            }
        }
        let mut earn_map: HashMap<String, Vec<EarningsRow>> = HashMap::new();
        for e in earnings {
            earn_map.entry(e.firm_id.clone()).or_default().push(e);
        }
        for rows in earn_map.values_mut() {
            rows.sort_by_key(|r| r.announce_date);
        }

        Ok(ProxyInputs {
            series,
            index: IndexSeries::new(index)?,
            fundamentals: fund_map,
            coverage: cov_map,
            earnings: earn_map,
            pin: HashMap::new(),
        })
    }

    /// Attaches a PIN estimate for a firm in a wave.
    pub fn with_pin(mut self, firm_id: &str, wave: &str, pin: f64) -> Self {
        self.pin.insert((firm_id.to_owned(), wave.to_owned()), pin);
        self
    }

    fn vol(&self, firm: &str, cutoff: NaiveDate, window: usize) -> Option<f64> {
        let days = self.series.get(firm)?.window(cutoff, window);
        let joined: Vec<(f64, f64)> = days
            .iter()
            .filter_map(|d| self.index.closes.get(&d.date).map(|&ix| (d.close, ix)))
            .collect();
        let firm_prices: Vec<f64> = joined.iter().map(|p| p.0).collect();
        let index_prices: Vec<f64> = joined.iter().map(|p| p.1).collect();
        match compute_vol(&log_returns(&firm_prices), &log_returns(&index_prices)) {
            Ok(v) => Some(v),
            Err(e) => {
                warn!("vol missing for {firm} at {cutoff}: {e}");
                None
            }
        }
    }

    fn baa(&self, firm: &str, cutoff: NaiveDate, window: usize) -> Option<f64> {
        let days = self.series.get(firm)?.window(cutoff, window);
        let quotes: Vec<(f64, f64, f64)> = days.iter().filter_map(|d| Some((d.bid?, d.ask?, d.close))).collect();
        window_baa(&quotes)
    }

    fn ln_volume(&self, firm: &str, cutoff: NaiveDate, window: usize) -> Option<f64> {
        let days = self.series.get(firm)?.window(cutoff, window);
        let volumes: Vec<f64> = days.iter().filter_map(|d| d.volume).filter(|v| *v > 0.0).collect();
        (!volumes.is_empty()).then(|| mean(&volumes).ln())
    }

    /// Uses the latest announcement on or before the cutoff.
    fn error(&self, firm: &str, cutoff: NaiveDate) -> Option<f64> {
        let row = self
            .earnings
            .get(firm)?
            .iter()
            .rev()
            .find(|r| r.announce_date <= cutoff)?;
        let (actual, forecast) = (row.actual_eps?, row.median_forecast_eps?);
        let series = self.series.get(firm)?;
        let before = series.days.partition_point(|d| d.date < row.announce_date);
        let price = series.days.get(before.checked_sub(ERROR_PRICE_LAG_DAYS)?)?.close;
        compute_error(actual, forecast, price).ok()
    }
}

/// Joins rating snapshots with proxies: one row per firm per wave. Missing
/// inputs leave the corresponding field `None`.
pub fn assemble_panel(
    universe: &FirmUniverse,
    waves: &[WaveRatings],
    inputs: &ProxyInputs,
    config: &PanelConfig,
) -> Result<Vec<FirmPanelRow>> {
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for wave in waves {
        for (firm_id, rating) in &wave.ratings {
            if !universe.contains(firm_id) {
                return Err(Error::Contract(format!(
                    "rated firm {firm_id} is not in the firm universe"
                )));
            }
            if !seen.insert((firm_id.clone(), wave.wave.clone())) {
                return Err(Error::Join {
                    firm: firm_id.to_string(),
                    wave: wave.wave.clone(),
                });
            }
            let firm = firm_id.as_str();
            let key = (firm.to_owned(), wave.wave.clone());
            let fundamentals = inputs.fundamentals.get(&key);
            let qtobin = fundamentals.and_then(|f| {
                compute_tobinq(f.market_cap?, f.total_liabilities?, f.total_assets?)
                    .map_err(|e| warn!("qtobin missing for {firm} in {}: {e}", wave.wave))
                    .ok()
            });
            let row = FirmPanelRow {
                firm_id: firm.to_owned(),
                wave: wave.wave.clone(),
                ranking: *rating,
                coverage: inputs.coverage.get(&key).copied(),
                error: inputs.error(firm, wave.cutoff),
                vol: inputs.vol(firm, wave.cutoff, config.window_days),
                baa: inputs.baa(firm, wave.cutoff, config.window_days),
                ln_volume: inputs.ln_volume(firm, wave.cutoff, config.window_days),
                ln_size: fundamentals
                    .and_then(|f| f.total_assets)
                    .filter(|a| *a > 0.0)
                    .map(f64::ln),
                ff: fundamentals.and_then(|f| f.free_float_pct),
                qtobin,
                pin: inputs.pin.get(&key).copied(),
            };
            row.validate()?;
            rows.push(row);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_examples() {
        assert_eq!(compute_error(1.3, 1.3, 20.0).unwrap(), 0.0);
        assert!((compute_error(2.0, 1.5, 10.0).unwrap() - 0.05).abs() < 1e-15);
        assert!(matches!(compute_error(2.0, 1.5, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn error_is_currency_invariant() {
        let base = compute_error(2.4, 1.1, 17.0).unwrap();
        let scaled = compute_error(2.4 * 3.7, 1.1 * 3.7, 17.0 * 3.7).unwrap();
        assert!((base - scaled).abs() < 1e-15);
    }

    #[test]
    fn vol_examples() {
        let index: Vec<f64> = (0..30).map(|i| ((i * 7919) % 13) as f64 / 100.0 - 0.06).collect();
        assert!((compute_vol(&index, &index).unwrap() - 100.0).abs() < 1e-12);
        let doubled: Vec<f64> = index.iter().map(|r| 2.0 * r).collect();
        assert!((compute_vol(&doubled, &index).unwrap() - 200.0).abs() < 1e-10);
        let shifted: Vec<f64> = index.iter().map(|r| r + 0.3).collect();
        assert!((compute_vol(&shifted, &index).unwrap() - 100.0).abs() < 1e-9);
        assert!(matches!(
            compute_vol(&index[..10], &index[..10]),
            Err(Error::DegenerateWindow(_))
        ));
        assert!(matches!(
            compute_vol(&index, &[0.01; 30]),
            Err(Error::DegenerateWindow(_))
        ));
    }

    #[test]
    fn baa_examples() {
        assert_eq!(compute_baa(10.0, 10.0, 10.0).unwrap(), 0.0);
        assert!((compute_baa(10.00, 10.10, 10.05).unwrap() - 0.00995).abs() < 1e-5);
        assert!(matches!(compute_baa(10.1, 10.0, 10.0), Err(Error::DataQuality(_))));
        let mean_pct = window_baa(&[(10.0, 10.1, 10.05), (10.1, 10.0, 10.0), (9.0, 9.0, 9.0)]).unwrap();
        assert!((mean_pct - 100.0 * (0.1 / 10.05) / 2.0).abs() < 1e-12);
        assert_eq!(window_baa(&[]), None);
        let a = compute_baa(10.0, 10.1, 10.05).unwrap();
        let b = compute_baa(1000.0, 1010.0, 1005.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn tobinq_examples() {
        assert_eq!(compute_tobinq(500.0, 500.0, 1000.0).unwrap(), 1.0);
        assert_eq!(compute_tobinq(1000.0, 500.0, 1000.0).unwrap(), 1.5);
        assert!((compute_tobinq(600.0, 400.0, 1000.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(compute_tobinq(1.0, 1.0, 0.0), Err(Error::Domain(_))));
        let q = compute_tobinq(123.0, 45.0, 67.0).unwrap();
        assert!((q - compute_tobinq(123e6, 45e6, 67e6).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn market_window_takes_trailing_days() {
        let start = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
        let days: Vec<_> = (0..10)
            .map(|i| MarketDay {
                date: start + chrono::Duration::days(i),
                close: 1.0,
                bid: None,
                ask: None,
                volume: None,
            })
            .collect();
        let s = MarketSeries::new("F", days).unwrap();
        let w = s.window(start + chrono::Duration::days(5), 3);
        assert_eq!(w.len(), 3);
        assert_eq!(w[2].date, start + chrono::Duration::days(5));
        assert_eq!(s.window(start - chrono::Duration::days(1), 3).len(), 0);
    }

    #[test]
    fn panel_row_lookup_and_validation() {
        let row = FirmPanelRow {
            firm_id: "F".into(),
            wave: "w1".into(),
            ranking: 1500.0,
            coverage: Some(3),
            error: None,
            vol: Some(40.0),
            baa: Some(0.2),
            ln_volume: Some(16.0),
            ln_size: Some(23.0),
            ff: Some(58.0),
            qtobin: Some(1.5),
            pin: None,
        };
        assert_eq!(row.value("lnsize").unwrap(), Some(23.0));
        assert_eq!(row.value("coverage").unwrap(), Some(3.0));
        assert_eq!(row.value("error").unwrap(), None);
        assert!(row.value("nonsense").is_err());
        assert!(FirmPanelRow {
            ff: Some(0.0),
            ..row.clone()
        }
        .validate()
        .is_err());
        assert!(FirmPanelRow {
            qtobin: Some(-1.0),
            ..row.clone()
        }
        .validate()
        .is_err());

        let mut buf = Vec::new();
        write_panel_csv(&mut buf, std::slice::from_ref(&row)).unwrap();
        assert_eq!(read_panel_csv(buf.as_slice()).unwrap(), vec![row]);
    }
}
