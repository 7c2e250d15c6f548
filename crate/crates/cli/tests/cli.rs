use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};

use iai_core::elo::read_ranking_csv;
use iai_core::proxy::{read_panel_csv, write_panel_csv};
use iai_core::synthetic::{elimination_fixture, latent_order_log, LatentLogSpec};
use iai_core::validation::{predict_iai, IaiInputs, LinearModel};
use iai_core::votes::write_votes;
use iai_core::{replay, snapshot_ranking, EloConfig};

fn iai(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iai"))
        .args(args)
        .env("IAI_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = iai(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Fixture { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let path = self.path(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    /// 12 firms, 3000 votes one minute apart from 2016-09-01.
    fn votes(&self) -> PathBuf {
        let log = latent_order_log(&LatentLogSpec::new(12, 3000, 0.05, 42));
        let path = self.path("votes.csv");
        write_votes(std::fs::File::create(&path).unwrap(), &log).unwrap();
        path
    }

    fn universe(&self) -> PathBuf {
        let mut text = String::from("firm_id,ticker,name,active_from,active_to\n");
        for i in 0..12 {
            text.push_str(&format!("F{i:03},T{i:03}3,Firm {i} SA,,\n"));
        }
        self.write("firms.csv", &text)
    }

    fn waves(&self) -> PathBuf {
        self.write(
            "waves.csv",
            "name,cutoff\nw1,2016-09-01T12:30:00Z\nw2,2016-09-02T01:00:00Z\nw3,2016-09-05\n",
        )
    }
}

#[test]
fn replay_is_deterministic_and_matches_core() {
    let f = Fixture::new();
    let votes = f.votes();
    let (a, b) = (f.path("a.csv"), f.path("b.csv"));
    ok(&["replay", "--votes", p(&votes), "--k", "24", "--out", p(&a)]);
    ok(&["replay", "--votes", p(&votes), "--k", "24", "--out", p(&b)]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("# iai 0.1.0 replay k=24"), "{text}");
    assert_eq!(text.lines().nth(1), Some("rank,firm_id,ticker,rating"));

    let log = iai_core::votes::read_votes(std::fs::File::open(&votes).unwrap()).unwrap();
    let oracle = snapshot_ranking(&replay(&log, &EloConfig::default(), None).unwrap());
    let got = read_ranking_csv(text.as_bytes()).unwrap();
    assert_eq!(got.len(), oracle.len());
    for (g, o) in got.iter().zip(&oracle) {
        assert_eq!((&g.firm_id, g.rank), (&o.firm_id, o.rank));
        assert!((g.rating - o.rating).abs() <= 5e-5);
    }
}

#[test]
fn replay_with_universe_and_cutoff() {
    let f = Fixture::new();
    let (votes, universe) = (f.votes(), f.universe());
    let out = ok(&[
        "replay",
        "--votes",
        p(&votes),
        "--universe",
        p(&universe),
        "--cutoff",
        "2016-08-31",
    ]);
    // Cutoff precedes the first vote: every firm at 1500 with its ticker.
    let rows: Vec<&str> = out.lines().skip(2).collect();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0], "1,F000,T0003,1500.0000");
    assert!(out.lines().next().unwrap().contains("applied_through_seq=0"));
}

#[test]
fn snapshot_writes_one_ranking_per_wave() {
    let f = Fixture::new();
    let (votes, waves) = (f.votes(), f.waves());
    let out_dir = f.path("snaps");
    let stdout = ok(&[
        "snapshot",
        "--votes",
        p(&votes),
        "--cutoffs",
        p(&waves),
        "--out-dir",
        p(&out_dir),
    ]);
    assert_eq!(stdout.lines().count(), 3);
    for w in ["w1", "w2", "w3"] {
        let text = std::fs::read_to_string(out_dir.join(format!("ranking_{w}.csv"))).unwrap();
        assert!(text.contains(&format!("wave={w}")));
        assert_eq!(read_ranking_csv(text.as_bytes()).unwrap().len(), 12);
    }
    // w3 covers the whole log (3000 minutes from 2016-09-01T00:00).
    assert!(stdout.lines().last().unwrap().starts_with("w3\t3000\t"));
}

#[test]
fn sweep_k_reports_the_default_grid() {
    let f = Fixture::new();
    let (votes, waves) = (f.votes(), f.waves());
    let json = f.path("sweep.json");
    let out = ok(&[
        "sweep-k",
        "--votes",
        p(&votes),
        "--k",
        "16,24,36,64,80",
        "--cutoffs",
        p(&waves),
        "--out",
        p(&json),
    ]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "k\tw1-w2\tw2-w3\tmean");
    assert_eq!(lines.len(), 7);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(
        doc["sweep"]["k_values"],
        serde_json::json!([16.0, 24.0, 36.0, 64.0, 80.0])
    );
    assert!(doc["generator"].as_str().unwrap().starts_with("iai 0.1.0 sweep-k"));
}

#[test]
fn spearman_of_rankings() {
    let f = Fixture::new();
    let a = f.write(
        "a.csv",
        "# x\nrank,firm_id,ticker,rating\n1,A,,4\n2,B,,3\n3,C,,2\n4,D,,1\n",
    );
    let b = f.write("b.csv", "rank,firm_id,ticker,rating\n1,B,,4\n2,A,,3\n3,D,,2\n4,C,,1\n");
    let r = f.write("r.csv", "rank,firm_id,ticker,rating\n1,D,,4\n2,C,,3\n3,B,,2\n4,A,,1\n");
    assert_eq!(ok(&["spearman", p(&a), p(&a)]).trim(), "rho\t1.000000\tn\t4");
    assert_eq!(ok(&["spearman", p(&a), p(&r)]).trim(), "rho\t-1.000000\tn\t4");
    assert_eq!(ok(&["spearman", p(&a), p(&b)]).trim(), "rho\t0.600000\tn\t4");
}

#[test]
fn pin_simulate_then_estimate() {
    let f = Fixture::new();
    let trades = f.path("trades.csv");
    ok(&[
        "pin-simulate",
        "--mu",
        "60",
        "--eps-b",
        "40",
        "--eps-s",
        "40",
        "--alpha",
        "0.4",
        "--delta",
        "0.5",
        "--days",
        "250",
        "--firm",
        "F001",
        "--out",
        p(&trades),
    ]);
    let text = std::fs::read_to_string(&trades).unwrap();
    assert!(text.starts_with("# iai 0.1.0 pin-simulate mu=60"));
    assert_eq!(text.lines().count(), 252);

    let fits = f.path("fits.json");
    ok(&[
        "pin-estimate",
        "--trades",
        p(&trades),
        "--window",
        "250",
        "--out",
        p(&fits),
    ]);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fits).unwrap()).unwrap();
    let fit = &doc["fits"][0];
    for key in [
        "firm_id",
        "mu",
        "eps_b",
        "eps_s",
        "alpha",
        "delta",
        "pin",
        "loglik",
        "converged",
        "starts_tried",
    ] {
        assert!(fit.get(key).is_some(), "missing {key}");
    }
    assert_eq!(fit["firm_id"], "F001");
    assert_eq!(fit["days"], 250);
    assert!((fit["pin"].as_f64().unwrap() - 0.2308).abs() < 0.05);

    // Same seed, same bytes.
    let again = f.path("fits2.json");
    ok(&[
        "pin-estimate",
        "--trades",
        p(&trades),
        "--window",
        "250",
        "--out",
        p(&again),
    ]);
    assert_eq!(std::fs::read(&fits).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn pin_estimate_windows_end_at_wave_cutoffs() {
    let f = Fixture::new();
    let trades = f.path("trades.csv");
    ok(&[
        "pin-simulate",
        "--mu",
        "30",
        "--eps-b",
        "20",
        "--eps-s",
        "25",
        "--alpha",
        "0.3",
        "--delta",
        "0.6",
        "--days",
        "200",
        "--out",
        p(&trades),
    ]);
    // Simulated days run daily from 2000-01-03.
    let waves = f.write("pw.csv", "name,cutoff\na,2000-02-01\nb,2000-05-01\n");
    let out = ok(&["pin-estimate", "--trades", p(&trades), "--cutoffs", p(&waves)]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    let fits = doc["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 2);
    assert_eq!(
        (fits[0]["wave"].as_str(), fits[0]["days"].as_u64()),
        (Some("a"), Some(30))
    );
    assert_eq!(
        (fits[1]["wave"].as_str(), fits[1]["days"].as_u64()),
        (Some("b"), Some(60))
    );
    assert_eq!(fits[1]["window_end"], "2000-05-01");
}

/// Market files for the 12-firm universe with 400 daily rows from 2016-01-01.
fn market_files(f: &Fixture) -> Vec<String> {
    let start = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
    let mut prices = String::from("firm_id,date,close,bid,ask,volume\n");
    let mut index = String::from("date,close\n");
    let mut level: f64 = 1000.0;
    let mut closes = [10.0f64; 12];
    for t in 0..400i64 {
        let r = 0.01 * (((t * 7919) % 13) as f64 - 6.0) / 6.0;
        let day = start + Duration::days(t);
        if t > 0 {
            level *= r.exp();
        }
        index.push_str(&format!("{day},{level}\n"));
        for (i, c) in closes.iter_mut().enumerate() {
            if t > 0 {
                let idio = 0.004 * (((t * 31 + i as i64 * 17) % 9) as f64 - 4.0) / 4.0;
                *c *= ((1.0 + i as f64 / 10.0) * r + idio).exp();
            }
            prices.push_str(&format!(
                "F{i:03},{day},{c},{},{},{}\n",
                *c * 0.998,
                *c * 1.002,
                1000 * (i + 1)
            ));
        }
    }
    let mut fundamentals = String::from("firm_id,wave,market_cap,total_liabilities,total_assets,free_float_pct\n");
    let mut coverage = String::from("firm_id,wave,analyst_count\n");
    let mut earnings = String::from("firm_id,announce_date,actual_eps,median_forecast_eps\n");
    for i in 0..12 {
        for w in ["w1", "w2", "w3"] {
            fundamentals.push_str(&format!("F{i:03},{w},{},{},{},{}\n", 100 + i, 50, 200 + 10 * i, 40 + i));
            coverage.push_str(&format!("F{i:03},{w},{}\n", i % 5));
        }
        let forecast = if i == 3 { String::new() } else { "1.1".into() };
        earnings.push_str(&format!("F{i:03},2016-08-15,1.3,{forecast}\n"));
    }
    vec![
        p(&f.write("prices.csv", &prices)).to_owned(),
        p(&f.write("index.csv", &index)).to_owned(),
        p(&f.write("fundamentals.csv", &fundamentals)).to_owned(),
        p(&f.write("coverage.csv", &coverage)).to_owned(),
        p(&f.write("earnings.csv", &earnings)).to_owned(),
    ]
}

#[test]
fn panel_joins_ratings_and_proxies() {
    let f = Fixture::new();
    let (votes, waves, universe) = (f.votes(), f.waves(), f.universe());
    let m = market_files(&f);
    let out = f.path("panel.csv");
    ok(&[
        "panel",
        "--votes",
        p(&votes),
        "--cutoffs",
        p(&waves),
        "--universe",
        p(&universe),
        "--prices",
        &m[0],
        "--index",
        &m[1],
        "--fundamentals",
        &m[2],
        "--coverage",
        &m[3],
        "--earnings",
        &m[4],
        "--window",
        "200",
        "--out",
        p(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# iai 0.1.0 panel k=24"));
    let rows = read_panel_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 36);
    assert_eq!(rows.iter().filter(|r| r.error.is_none()).count(), 3);
    let f0 = rows.iter().find(|r| r.firm_id == "F000").unwrap();
    assert!((f0.qtobin.unwrap() - 0.75).abs() < 1e-12);
    assert!((f0.ln_size.unwrap() - 200f64.ln()).abs() < 1e-12);
    assert!(rows
        .iter()
        .all(|r| r.vol.is_some() && r.baa.is_some() && r.pin.is_none()));

    // Missing --universe is a domain error.
    let bad = iai(&[
        "panel",
        "--votes",
        p(&votes),
        "--cutoffs",
        p(&waves),
        "--prices",
        &m[0],
        "--index",
        &m[1],
        "--fundamentals",
        &m[2],
        "--coverage",
        &m[3],
        "--earnings",
        &m[4],
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn regress_and_eliminate_on_the_fixture() {
    let f = Fixture::new();
    let fixture = elimination_fixture(42).unwrap();
    let panel = f.path("panel.csv");
    write_panel_csv(std::fs::File::create(&panel).unwrap(), &fixture.rows).unwrap();

    let table = ok(&["regress", "--panel", p(&panel)]);
    assert!(table.contains("Number of obs") && table.contains("173"), "{table}");

    let fit_json = f.path("fit.json");
    let out = ok(&["eliminate", "--panel", p(&panel), "--json", p(&fit_json)]);
    assert!(
        out.starts_with("dropped: baa, ff, error, ln_volume\nkept: coverage, vol, ln_size, qtobin\n"),
        "{out}"
    );
    // Predicting from the refit uses its coefficients.
    let pred = ok(&[
        "predict",
        "--coverage",
        "10.55263",
        "--vol",
        "40.67281",
        "--lnsize",
        "23.26457",
        "--qtobin",
        "1.572493",
        "--model",
        p(&fit_json),
    ]);
    let fit: iai_core::RegressionFit = serde_json::from_str(&std::fs::read_to_string(&fit_json).unwrap()).unwrap();
    let inputs = IaiInputs {
        coverage: 10.55263,
        vol: 40.67281,
        ln_size: 23.26457,
        qtobin: 1.572493,
    };
    let expected = predict_iai(&inputs, &LinearModel::from_fit(&fit));
    assert_eq!(pred.trim(), format!("{expected:.2}"));
}

#[test]
fn predict_uses_published_coefficients() {
    let out = ok(&[
        "predict",
        "--coverage",
        "10.55263",
        "--vol",
        "40.67281",
        "--lnsize",
        "23.26457",
        "--qtobin",
        "1.572493",
    ]);
    assert_eq!(out.trim(), "1504.56");
}

#[test]
fn exit_codes() {
    let bad_flag = iai(&["replay", "--nope"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_flag.stderr).contains("Usage"));
    assert_eq!(iai(&["frobnicate"]).status.code(), Some(2));

    let f = Fixture::new();
    let gapped = f.write(
        "gap.csv",
        "seq,timestamp_iso8601,session_id,analyst_id,firm_a,firm_b,winner\n\
         1,2016-10-06T00:00:00Z,s,a,X,Y,X\n\
         3,2016-10-06T00:01:00Z,s,a,X,Y,Y\n",
    );
    let out = iai(&["replay", "--votes", p(&gapped)]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.contains("expected seq 2, found 3"));

    assert_eq!(
        iai(&["replay", "--votes", p(&gapped), "--k", "0"]).status.code(),
        Some(1)
    );
    assert!(iai(&["--help"]).status.success());
}

#[test]
fn certified_filter_reads_the_analyst_registry() {
    let f = Fixture::new();
    let votes = f.write(
        "v.csv",
        "seq,timestamp_iso8601,session_id,analyst_id,firm_a,firm_b,winner\n\
         1,2016-10-06T00:00:00Z,s1,cert,X,Y,X\n\
         2,2016-10-06T00:01:00Z,s2,plain,X,Y,Y\n",
    );
    let analysts = f.write(
        "analysts.jsonl",
        "{\"analyst_id\":\"cert\",\"certified\":true,\"state_of_residence\":\"SP\",\"created_at\":\"2016-10-01T00:00:00Z\"}\n\
         {\"analyst_id\":\"plain\",\"certified\":false,\"state_of_residence\":\"\",\"created_at\":\"2016-10-01T00:00:00Z\"}\n",
    );
    let all = ok(&["replay", "--votes", p(&votes), "--k", "100"]);
    assert!(all.contains("1,X,,1500.0000") || all.contains("1,Y,"), "{all}");
    let cert = ok(&[
        "replay",
        "--votes",
        p(&votes),
        "--k",
        "100",
        "--certified-only",
        "--analysts",
        p(&analysts),
    ]);
    assert!(cert.contains("1,X,,1550.0000"), "{cert}");
    assert!(cert.contains("2,Y,,1450.0000"), "{cert}");
    assert!(iai(&["replay", "--votes", p(&votes), "--certified-only"]).status.code() == Some(2));
}
