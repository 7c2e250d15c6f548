use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use iai_core::elo::{read_ranking_csv, write_ranking_csv};
use iai_core::pin::{estimate_pin, read_trade_days, simulate_trades, PinFitRecord, PinOptions};
use iai_core::proxy::{
    assemble_panel, read_panel_csv, read_rows, write_panel_csv, PanelConfig, ProxyInputs, WaveRatings,
};
use iai_core::validation::{
    backward_eliminate, ols_fit, predict_iai, render_fit_table, spearman_rho, sweep_k, IaiInputs, LinearModel, Ranking,
};
use iai_core::votes::read_votes;
use iai_core::waves::{parse_cutoff, read_waves, WaveCut};
use iai_core::{
    replay_with, snapshot_ranking, EloConfig, FirmPanelRow, FirmUniverse, PinParams, RankedFirm, RatingState,
    RegressionFit, ReplayOptions, TradeDay, VoteEvent,
};
use iai_survey::{Analyst, AppState, PairingPolicy, Store, StoreOptions};

use crate::io::{check_inputs, header_line, open_input, opt_display, output};
use crate::{Cli, Command, EloArgs, ModelArgs};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Serve {
            universe,
            data_dir,
            listen,
            k,
            pairing,
            static_dir,
        } => serve(cli.seed, universe, data_dir, *listen, *k, pairing, static_dir.clone()),
        Command::Replay {
            votes,
            elo,
            cutoff,
            out,
        } => replay(votes, elo, cutoff.as_deref(), out.as_deref()),
        Command::Snapshot {
            votes,
            cutoffs,
            elo,
            out_dir,
        } => snapshot(votes, cutoffs, elo, out_dir),
        Command::SweepK {
            votes,
            k,
            cutoffs,
            universe,
            out,
        } => sweep(votes, k, cutoffs, universe.as_deref(), out.as_deref()),
        Command::Spearman { a, b } => spearman(a, b),
        Command::PinEstimate {
            trades,
            window,
            cutoffs,
            end,
            out,
        } => pin_estimate(
            cli.seed,
            trades,
            *window,
            cutoffs.as_deref(),
            end.as_deref(),
            out.as_deref(),
        ),
        Command::PinSimulate {
            mu,
            eps_b,
            eps_s,
            alpha,
            delta,
            days,
            firm,
            out,
        } => {
            let theta = PinParams::new(*mu, *eps_b, *eps_s, *alpha, *delta)?;
            pin_simulate(cli.seed, &theta, *days, firm, out.as_deref())
        }
        Command::Panel {
            votes,
            cutoffs,
            elo,
            prices,
            index,
            fundamentals,
            coverage,
            earnings,
            pin,
            window,
            out,
        } => {
            let files = PanelFiles {
                prices,
                index,
                fundamentals,
                coverage,
                earnings,
                pin: pin.as_deref(),
            };
            panel(votes, cutoffs, elo, &files, *window, out.as_deref())
        }
        Command::Regress { model } => regress(model),
        Command::Eliminate { model, p_threshold } => eliminate(model, *p_threshold),
        Command::Predict {
            coverage,
            vol,
            lnsize,
            qtobin,
            model,
        } => predict(
            IaiInputs {
                coverage: *coverage,
                vol: *vol,
                ln_size: *lnsize,
                qtobin: *qtobin,
            },
            model.as_deref(),
        ),
    }
}

fn serve(
    seed: u64,
    universe: &Path,
    data_dir: &Path,
    listen: std::net::SocketAddr,
    k: f64,
    pairing: &str,
    static_dir: Option<PathBuf>,
) -> Result<()> {
    let pairing: PairingPolicy = pairing.parse().map_err(|e: String| anyhow!(e))?;
    let universe = FirmUniverse::from_csv(open_input(universe)?)?;
    let options = StoreOptions {
        pairing,
        seed: Some(seed),
        ..Default::default()
    };
    EloConfig::with_k(k)?;
    let store = Store::open(data_dir, universe, options)?;
    let state = AppState {
        store: Arc::new(store),
        default_k: k,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        };
        iai_survey::serve(
            listen,
            state,
            static_dir,
            |addr| {
                println!("listening on http://{addr}");
                let _ = std::io::stdout().flush();
            },
            shutdown,
        )
        .await
    })?;
    Ok(())
}

fn elo_config(args: &EloArgs) -> Result<EloConfig> {
    let config = EloConfig {
        k_factor: args.k,
        expectation_mode: args.expectation.parse()?,
        ..Default::default()
    };
    config.validate()?;
    Ok(config)
}

fn load_votes(path: &Path) -> Result<Vec<VoteEvent>> {
    read_votes(open_input(path)?).with_context(|| format!("reading votes from {}", path.display()))
}

fn load_universe(path: Option<&Path>) -> Result<Option<FirmUniverse>> {
    path.map(|p| FirmUniverse::from_csv(open_input(p)?).with_context(|| format!("reading {}", p.display())))
        .transpose()
}

/// Ids of certified analysts, when filtering is requested.
fn certified_ids(args: &EloArgs) -> Result<Option<HashSet<String>>> {
    if !args.certified_only {
        return Ok(None);
    }
    let path = args
        .analysts
        .as_deref()
        .ok_or_else(|| anyhow!("--certified-only needs --analysts"))?;
    let text = std::io::read_to_string(open_input(path)?)?;
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let a: Analyst = serde_json::from_str(line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        if a.certified {
            ids.insert(a.analyst_id);
        }
    }
    Ok(Some(ids))
}

struct Replayer {
    config: EloConfig,
    log: Vec<VoteEvent>,
    universe: Option<FirmUniverse>,
    certified: Option<HashSet<String>>,
}

impl Replayer {
    fn load(votes: &Path, args: &EloArgs) -> Result<Self> {
        let mut files = vec![votes.to_path_buf()];
        files.extend(args.universe.clone());
        files.extend(args.analysts.clone());
        check_inputs(&files)?;
        Ok(Replayer {
            config: elo_config(args)?,
            log: load_votes(votes)?,
            universe: load_universe(args.universe.as_deref())?,
            certified: certified_ids(args)?,
        })
    }

    fn state(&self, cutoff: Option<chrono::DateTime<chrono::Utc>>) -> Result<RatingState> {
        let keep = |e: &VoteEvent| self.certified.as_ref().is_none_or(|ids| ids.contains(&e.analyst_id));
        let state = replay_with(
            &self.log,
            &self.config,
            ReplayOptions {
                cutoff,
                seed: self
                    .universe
                    .as_ref()
                    .map(|u| RatingState::seeded(u, self.config.initial_rating)),
                filter: self.certified.as_ref().map(|_| &keep as &dyn Fn(&VoteEvent) -> bool),
            },
        )?;
        Ok(state)
    }

    fn params(&self) -> Vec<(&'static str, String)> {
        vec![
            ("k", self.config.k_factor.to_string()),
            (
                "expectation",
                format!("{:?}", self.config.expectation_mode).to_lowercase(),
            ),
            ("votes", self.log.len().to_string()),
            ("certified_only", self.certified.is_some().to_string()),
        ]
    }
}

fn write_ranking(
    path: Option<&Path>,
    header: &str,
    ranking: &[RankedFirm],
    universe: Option<&FirmUniverse>,
) -> Result<()> {
    let mut out = output(path)?;
    writeln!(out, "{header}")?;
    write_ranking_csv(&mut out, ranking, universe)?;
    out.flush()?;
    Ok(())
}

fn replay(votes: &Path, args: &EloArgs, cutoff: Option<&str>, out: Option<&Path>) -> Result<()> {
    let cutoff = cutoff.map(parse_cutoff).transpose()?;
    let r = Replayer::load(votes, args)?;
    let state = r.state(cutoff)?;
    let mut params = r.params();
    params.push(("cutoff", cutoff.map_or_else(|| "none".into(), |c| c.to_rfc3339())));
    params.push(("applied_through_seq", state.last_applied.to_string()));
    let ranking = snapshot_ranking(&state);
    write_ranking(out, &header_line("replay", &params), &ranking, r.universe.as_ref())?;
    log::info!("ranked {} firms through seq {}", ranking.len(), state.last_applied);
    Ok(())
}

fn load_waves(path: &Path) -> Result<Vec<WaveCut>> {
    read_waves(open_input(path)?).with_context(|| format!("reading waves from {}", path.display()))
}

fn snapshot(votes: &Path, cutoffs: &Path, args: &EloArgs, out_dir: &Path) -> Result<()> {
    check_inputs([&cutoffs.to_path_buf()])?;
    let r = Replayer::load(votes, args)?;
    let waves = load_waves(cutoffs)?;
    for wave in &waves {
        let state = r.state(Some(wave.cutoff))?;
        let mut params = r.params();
        params.push(("wave", wave.name.clone()));
        params.push(("cutoff", wave.cutoff.to_rfc3339()));
        let path = out_dir.join(format!("ranking_{}.csv", wave.name));
        write_ranking(
            Some(&path),
            &header_line("snapshot", &params),
            &snapshot_ranking(&state),
            r.universe.as_ref(),
        )?;
        println!("{}\t{}\t{}", wave.name, state.last_applied, path.display());
    }
    Ok(())
}

fn sweep(votes: &Path, ks: &[f64], cutoffs: &Path, universe: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let mut files = vec![votes.to_path_buf(), cutoffs.to_path_buf()];
    files.extend(universe.map(Path::to_path_buf));
    check_inputs(&files)?;
    let log = load_votes(votes)?;
    let waves = load_waves(cutoffs)?;
    let base = EloConfig::default();
    let seed = load_universe(universe)?.map(|u| RatingState::seeded(&u, base.initial_rating));
    let report = sweep_k(&log, ks, &waves, &base, seed.as_ref())?;

    let mut stdout = std::io::stdout().lock();
    let pairs: Vec<String> = waves
        .windows(2)
        .map(|w| format!("{}-{}", w[0].name, w[1].name))
        .collect();
    writeln!(stdout, "k\t{}\tmean", pairs.join("\t"))?;
    for (i, k) in report.k_values.iter().enumerate() {
        let cells: Vec<String> = report.consecutive[i].iter().map(|r| format!("{r:.4}")).collect();
        writeln!(stdout, "{k}\t{}\t{:.4}", cells.join("\t"), report.mean_rho[i])?;
    }
    writeln!(stdout, "recommended k: {}", report.recommended_k)?;
    if let Some(path) = out {
        let mut w = output(Some(path))?;
        let params = [
            ("k", ks.iter().map(f64::to_string).collect::<Vec<_>>().join(",")),
            ("votes", log.len().to_string()),
        ];
        let doc = serde_json::json!({ "generator": header_line("sweep-k", &params)[2..], "sweep": report });
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

fn spearman(a: &Path, b: &Path) -> Result<()> {
    check_inputs([&a.to_path_buf(), &b.to_path_buf()])?;
    let ra = read_ranking_csv(open_input(a)?)?;
    let rb = read_ranking_csv(open_input(b)?)?;
    let ids: HashSet<_> = ra.iter().map(|r| &r.firm_id).collect();
    let common = rb.iter().filter(|r| ids.contains(&r.firm_id)).count();
    let rho = spearman_rho(&Ranking::from_snapshot(&ra), &Ranking::from_snapshot(&rb))?;
    println!("rho\t{rho:.6}\tn\t{common}");
    Ok(())
}

/// PIN fit as written to JSON; `wave` is present when windows end at
/// wave cutoffs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PinRecord {
    #[serde(flatten)]
    pub fit: PinFitRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_end: Option<NaiveDate>,
    #[serde(default)]
    pub days: usize,
    #[serde(default)]
    pub low_confidence: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PinReport {
    pub generator: String,
    pub fits: Vec<PinRecord>,
}

/// The last `window` days on or before `end`.
fn trailing(days: &[TradeDay], end: Option<NaiveDate>, window: usize) -> &[TradeDay] {
    let stop = end.map_or(days.len(), |e| days.partition_point(|d| d.date <= e));
    &days[stop.saturating_sub(window)..stop]
}

fn pin_estimate(
    seed: u64,
    trades: &Path,
    window: usize,
    cutoffs: Option<&Path>,
    end: Option<&str>,
    out: Option<&Path>,
) -> Result<()> {
    if window == 0 {
        bail!("--window must be positive");
    }
    let mut files = vec![trades.to_path_buf()];
    files.extend(cutoffs.map(Path::to_path_buf));
    check_inputs(&files)?;
    let by_firm = read_trade_days(open_input(trades)?)?;
    let ends: Vec<(Option<String>, Option<NaiveDate>)> = match (cutoffs, end) {
        (Some(path), _) => load_waves(path)?
            .into_iter()
            .map(|w| (Some(w.name), Some(w.cutoff.date_naive())))
            .collect(),
        (None, Some(e)) => vec![(None, Some(NaiveDate::parse_from_str(e, "%Y-%m-%d").context("--end")?))],
        (None, None) => vec![(None, None)],
    };

    let mut tasks = Vec::new();
    for (firm, days) in &by_firm {
        for (wave, end) in &ends {
            let slice = trailing(days, *end, window);
            if slice.is_empty() {
                log::warn!("{firm}: no trade days in window ending {end:?}");
                continue;
            }
            tasks.push((firm.as_str(), wave.clone(), *end, slice));
        }
    }
    let options = PinOptions {
        seed,
        ..Default::default()
    };
    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(tasks.len().max(1));
    let chunk = tasks.len().div_ceil(threads).max(1);
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = tasks
            .chunks(chunk)
            .map(|part| {
                let options = &options;
                s.spawn(move || {
                    part.iter()
                        .map(|(firm, wave, end, days)| {
                            (*firm, wave.clone(), *end, days.len(), estimate_pin(days, options))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("estimation thread panicked"))
            .collect()
    });

    let mut fits = Vec::new();
    let mut failed = 0usize;
    for (firm, wave, end, n_days, result) in results {
        match result {
            Ok(fit) => fits.push(PinRecord {
                fit: PinFitRecord::new(firm, &fit),
                wave,
                window_end: end,
                days: n_days,
                low_confidence: fit.low_confidence,
            }),
            Err(e) => {
                failed += 1;
                log::warn!("{firm}: {e}");
            }
        }
    }
    if fits.is_empty() && failed > 0 {
        bail!("PIN estimation failed for all {failed} firm windows");
    }
    let params = [
        ("window", window.to_string()),
        ("seed", seed.to_string()),
        ("cutoffs", opt_display(cutoffs)),
        ("end", end.unwrap_or("latest").to_owned()),
    ];
    let report = PinReport {
        generator: header_line("pin-estimate", &params)[2..].to_owned(),
        fits,
    };
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    log::info!("{} fits, {failed} failures", report.fits.len());
    Ok(())
}

fn pin_simulate(seed: u64, theta: &PinParams, days: usize, firm: &str, out: Option<&Path>) -> Result<()> {
    let trades = simulate_trades(theta, days, seed)?;
    let params = [
        ("mu", theta.mu.to_string()),
        ("eps_b", theta.eps_b.to_string()),
        ("eps_s", theta.eps_s.to_string()),
        ("alpha", theta.alpha.to_string()),
        ("delta", theta.delta.to_string()),
        ("days", days.to_string()),
        ("seed", seed.to_string()),
        ("pin", format!("{:.6}", theta.pin())),
    ];
    let mut w = output(out)?;
    writeln!(w, "{}", header_line("pin-simulate", &params))?;
    writeln!(w, "firm_id,date,buys,sells")?;
    for d in &trades {
        writeln!(w, "{firm},{},{},{}", d.date, d.buys, d.sells)?;
    }
    w.flush()?;
    Ok(())
}

struct PanelFiles<'a> {
    prices: &'a PathBuf,
    index: &'a PathBuf,
    fundamentals: &'a PathBuf,
    coverage: &'a PathBuf,
    earnings: &'a PathBuf,
    pin: Option<&'a Path>,
}

fn rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    read_rows(open_input(path)?).with_context(|| format!("reading {}", path.display()))
}

fn panel(
    votes: &Path,
    cutoffs: &Path,
    args: &EloArgs,
    files: &PanelFiles,
    window: usize,
    out: Option<&Path>,
) -> Result<()> {
    let mut inputs = vec![cutoffs.to_path_buf(), files.prices.clone(), files.index.clone()];
    inputs.extend([
        files.fundamentals.clone(),
        files.coverage.clone(),
        files.earnings.clone(),
    ]);
    inputs.extend(files.pin.map(Path::to_path_buf));
    check_inputs(&inputs)?;
    if args.universe.is_none() {
        bail!("panel needs --universe");
    }
    let r = Replayer::load(votes, args)?;
    let universe = r.universe.as_ref().expect("checked above");
    let waves = load_waves(cutoffs)?;
    let mut snapshots = Vec::new();
    for wave in &waves {
        let state = r.state(Some(wave.cutoff))?;
        snapshots.push(WaveRatings {
            wave: wave.name.clone(),
            cutoff: wave.cutoff.date_naive(),
            ratings: state.scores.into_iter().collect(),
        });
    }

    let index: Vec<iai_core::proxy::IndexRow> = rows(files.index)?;
    let mut proxy = ProxyInputs::new(
        rows(files.prices)?,
        &index,
        rows(files.fundamentals)?,
        rows(files.coverage)?,
        rows(files.earnings)?,
    )?;
    if let Some(path) = files.pin {
        let report: PinReport = serde_json::from_reader(open_input(path)?)
            .with_context(|| format!("reading PIN fits from {}", path.display()))?;
        for rec in report.fits {
            match rec.wave {
                Some(wave) => proxy = proxy.with_pin(&rec.fit.firm_id, &wave, rec.fit.pin),
                None => log::warn!(
                    "PIN fit for {} has no wave; rerun pin-estimate with --cutoffs",
                    rec.fit.firm_id
                ),
            }
        }
    }
    let panel = assemble_panel(universe, &snapshots, &proxy, &PanelConfig { window_days: window })?;
    let mut params = r.params();
    params.push(("window", window.to_string()));
    params.push((
        "waves",
        waves.iter().map(|w| w.name.as_str()).collect::<Vec<_>>().join(","),
    ));
    let mut w = output(out)?;
    writeln!(w, "{}", header_line("panel", &params))?;
    write_panel_csv(&mut w, &panel)?;
    w.flush()?;
    log::info!("{} panel rows", panel.len());
    Ok(())
}

fn load_panel(args: &ModelArgs) -> Result<Vec<FirmPanelRow>> {
    check_inputs([&args.panel])?;
    let mut rows = read_panel_csv(open_input(&args.panel)?)?;
    if let Some(wave) = &args.wave {
        rows.retain(|r| &r.wave == wave);
        if rows.is_empty() {
            bail!("no panel rows for wave {wave}");
        }
    }
    Ok(rows)
}

fn report_fit(fit: &RegressionFit, json: Option<&Path>) -> Result<()> {
    print!("{}", render_fit_table(fit));
    if let Some(path) = json {
        let mut w = output(Some(path))?;
        serde_json::to_writer_pretty(&mut w, fit)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

fn regress(args: &ModelArgs) -> Result<()> {
    let rows = load_panel(args)?;
    let names: Vec<&str> = args.regressors.iter().map(String::as_str).collect();
    let fit = ols_fit(&rows, &args.dependent, &names)?;
    report_fit(&fit, args.json.as_deref())
}

fn eliminate(args: &ModelArgs, p_threshold: f64) -> Result<()> {
    let rows = load_panel(args)?;
    let names: Vec<&str> = args.regressors.iter().map(String::as_str).collect();
    let fit = backward_eliminate(&rows, &args.dependent, &names, p_threshold)?;
    println!(
        "dropped: {}",
        if fit.dropped_order.is_empty() {
            "none".into()
        } else {
            fit.dropped_order.join(", ")
        }
    );
    println!("kept: {}", fit.regressors().join(", "));
    report_fit(&fit, args.json.as_deref())
}

fn predict(inputs: IaiInputs, model: Option<&Path>) -> Result<()> {
    let model = match model {
        Some(path) => {
            let fit: RegressionFit = serde_json::from_reader(open_input(path)?)
                .with_context(|| format!("reading fit from {}", path.display()))?;
            LinearModel::from_fit(&fit)
        }
        None => LinearModel::published(),
    };
    println!("{:.2}", predict_iai(&inputs, &model));
    Ok(())
}
