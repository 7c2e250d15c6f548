mod commands;
mod io;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Information asymmetry index pipeline: survey service, Elo ratings,
/// PIN estimation, market proxies and regression validation.
#[derive(Debug, Parser)]
#[command(name = "iai", version, about)]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, env = "IAI_LOG", default_value = "info")]
    pub log: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct EloArgs {
    /// Elo k-factor.
    #[arg(long, default_value_t = 24.0)]
    pub k: f64,

    /// Expectation: the banded table or the logistic curve.
    #[arg(long, default_value = "table")]
    pub expectation: String,

    /// Firm universe `firm_id,ticker,name,active_from,active_to`; firms
    /// without votes are ranked at the initial rating.
    #[arg(long)]
    pub universe: Option<PathBuf>,

    /// Drop votes cast by analysts not flagged certified.
    #[arg(long, requires = "analysts")]
    pub certified_only: bool,

    /// Analyst registry (`analysts.jsonl` from the service data directory).
    #[arg(long)]
    pub analysts: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the survey HTTP service.
    Serve {
        /// Firm universe CSV `firm_id,ticker,name,active_from,active_to`.
        #[arg(long, env = "IAI_UNIVERSE")]
        universe: PathBuf,
        /// Directory holding votes.csv, analysts.jsonl and sessions.jsonl.
        #[arg(long, env = "IAI_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long, env = "IAI_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Default k for GET /api/ratings.
        #[arg(long, env = "IAI_DEFAULT_K", default_value_t = 24.0)]
        k: f64,
        /// Pairing policy: uniform or proximity.
        #[arg(long, default_value = "uniform")]
        pairing: String,
        /// Static assets served under `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Replay a vote log into a ranking CSV `rank,firm_id,ticker,rating`.
    Replay {
        /// Vote log `seq,timestamp_iso8601,session_id,analyst_id,firm_a,firm_b,winner`.
        #[arg(long)]
        votes: PathBuf,
        #[command(flatten)]
        elo: EloArgs,
        /// Only votes stamped at or before this instant (or date).
        #[arg(long)]
        cutoff: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one ranking CSV per wave.
    Snapshot {
        #[arg(long)]
        votes: PathBuf,
        /// Waves CSV `name,cutoff`.
        #[arg(long)]
        cutoffs: PathBuf,
        #[command(flatten)]
        elo: EloArgs,
        /// Directory receiving `ranking_<wave>.csv`.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Inter-wave rank stability for several k-factors.
    SweepK {
        #[arg(long)]
        votes: PathBuf,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',', default_value = "16,24,36,64,80")]
        k: Vec<f64>,
        /// Waves CSV `name,cutoff`.
        #[arg(long)]
        cutoffs: PathBuf,
        #[arg(long)]
        universe: Option<PathBuf>,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spearman rank correlation between two ranking CSVs.
    Spearman { a: PathBuf, b: PathBuf },
    /// Maximum-likelihood PIN per firm from `firm_id,date,buys,sells`.
    PinEstimate {
        #[arg(long)]
        trades: PathBuf,
        /// Trading days per estimation window.
        #[arg(long, default_value_t = 60)]
        window: usize,
        /// Estimate the window ending at each wave cutoff in this CSV.
        #[arg(long, conflicts_with = "end")]
        cutoffs: Option<PathBuf>,
        /// Last date of the window; the latest day when absent.
        #[arg(long)]
        end: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate daily buy/sell counts from PIN parameters.
    PinSimulate {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        eps_b: f64,
        #[arg(long)]
        eps_s: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 250)]
        days: usize,
        #[arg(long, default_value = "F000")]
        firm: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Join wave ratings with market proxies into the regression panel.
    Panel {
        #[arg(long)]
        votes: PathBuf,
        #[arg(long)]
        cutoffs: PathBuf,
        #[command(flatten)]
        elo: EloArgs,
        /// `firm_id,date,close,bid,ask,volume`.
        #[arg(long)]
        prices: PathBuf,
        /// `date,close`.
        #[arg(long)]
        index: PathBuf,
        /// `firm_id,wave,market_cap,total_liabilities,total_assets,free_float_pct`.
        #[arg(long)]
        fundamentals: PathBuf,
        /// `firm_id,wave,analyst_count`.
        #[arg(long)]
        coverage: PathBuf,
        /// `firm_id,announce_date,actual_eps,median_forecast_eps`.
        #[arg(long)]
        earnings: PathBuf,
        /// PIN fits from `pin-estimate --cutoffs`.
        #[arg(long)]
        pin: Option<PathBuf>,
        /// Trading days in each wave's market window.
        #[arg(long, default_value_t = 252)]
        window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// OLS of a panel column on regressors.
    Regress {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Backward elimination by largest p-value.
    Eliminate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.05)]
        p_threshold: f64,
    },
    /// Predict the index from the four-variable model.
    Predict {
        #[arg(long)]
        coverage: f64,
        #[arg(long)]
        vol: f64,
        #[arg(long)]
        lnsize: f64,
        #[arg(long)]
        qtobin: f64,
        /// Fit JSON from `regress --json` or `eliminate --json`; the
        /// published coefficients when absent.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Panel CSV from `panel`.
    #[arg(long)]
    pub panel: PathBuf,
    #[arg(long, default_value = "ranking")]
    pub dependent: String,
    /// Comma-separated regressors.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "coverage,error,vol,baa,ln_volume,ln_size,ff,qtobin"
    )]
    pub regressors: Vec<String>,
    /// Restrict to one wave.
    #[arg(long)]
    pub wave: Option<String>,
    /// Also write the fit as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    log::info!("iai {} seed={} {:?}", io::VERSION, cli.seed, cli.command);
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("iai: error: {msg}");
            ExitCode::from(1)
        }
    }
}
