use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use curvecast::abc::read_chain;
use curvecast::dataset::DatedSeries;
use curvecast::rng::substream;
use curvecast_cli::artifacts::{read_dir, Payload};
use curvecast_cli::commands::{evaluate, MetricRow, Truth};
use curvecast_cli::service::AppState;
use curvecast::market::{endpoints, BidTable};
use curvecast::{Bid, Side, TieRule};
use rand::Rng;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvecast"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

const FIT: &str = r#"
[fit]
iterations = 60
seed = 2
n = 60
thresholds = { fractions = [10.0, 10.0, 10.0] }
proposal = { step_sd = [3.0, 0.1, 0.5, 0.5] }

[fit.prior]
theta = { family = "gamma", shape = 2.0, rate = 0.04 }
p = { family = "uniform", lo = 0.0, hi = 1.0 }
alpha = { family = "gamma", shape = 2.0, rate = 0.25 }
beta = { family = "gamma", shape = 2.0, rate = 0.25 }
"#;

fn read_metrics(path: &Path) -> Vec<MetricRow> {
    csv::Reader::from_path(path).unwrap().deserialize().map(|r| r.unwrap()).collect()
}

#[test]
fn curve_series_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let config = format!(
        "{FIT}\n[simulate]\nmodel = \"wellspecified\"\ntheta = 5.0\np = 0.3\nalpha = 2.0\nbeta = 3.0\nn = 60\nhorizon = 24\nseed = 1\n\n\
         [forecast]\nhorizons = [1, 3]\nmembers = 40\nseed = 3\n"
    );
    fs::write(dir.join("run.toml"), config).unwrap();
    ok(dir, &["-c", "run.toml", "simulate", "--out", "series.json"]);
    assert!(dir.join("series.manifest.json").exists());
    assert!(dir.join("series.config.toml").exists());
    let full = DatedSeries::read(fs::File::open(dir.join("series.json")).unwrap()).unwrap();
    assert_eq!(full.series.len(), 25);

    // Train on the first 21 curves and keep the rest as truth.
    let train = DatedSeries::undated(full.series.prefix(21).unwrap());
    train.write(fs::File::create(dir.join("train.json")).unwrap()).unwrap();
    ok(dir, &["-c", "run.toml", "fit", "--data", "train.json", "--out", "chain.ndjson"]);
    let chain = read_chain(std::io::BufReader::new(fs::File::open(dir.join("chain.ndjson")).unwrap())).unwrap();
    assert_eq!(chain.record.samples.len(), 60);
    let d = chain.record.diagnostics;
    assert_eq!(d.accepted + d.rejected_ratio + d.rejected_gates.iter().sum::<usize>(), 59);
    assert!(chain.header.config.is_some());

    ok(
        dir,
        &["-c", "run.toml", "forecast", "--fit", "chain.ndjson", "--data", "train.json", "--out", "fc"],
    );
    let artifacts = read_dir(&dir.join("fc")).unwrap();
    assert_eq!(artifacts.keys().copied().collect::<Vec<_>>(), vec![1, 3]);
    assert!(dir.join("fc/resolved-config.toml").exists());

    ok(dir, &["-c", "run.toml", "evaluate", "--forecasts", "fc", "--data", "series.json", "--out", "metrics.csv"]);
    let rows = read_metrics(&dir.join("metrics.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.value > 0.0 && r.value < 1.0 && r.count == 1));

    // A different truth no longer lines up with the forecast origin.
    fs::write(
        dir.join("other.toml"),
        "[simulate]\nmodel = \"misspecified\"\nhorizon = 24\nseed = 9\n",
    )
    .unwrap();
    ok(dir, &["-c", "other.toml", "simulate", "--out", "other.json"]);
    let out = run(dir, &["evaluate", "--forecasts", "fc", "--data", "other.json", "--out", "bad.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("misalignment"));
}

#[test]
fn single_iteration_and_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    // A frozen series has no variation, so its thresholds must be absolute.
    let config = FIT
        .replace("iterations = 60", "iterations = 1")
        .replace("{ fractions = [10.0, 10.0, 10.0] }", "{ absolute = [100.0, 1.0, 1.0] }")
        + "\n[simulate]\nmodel = \"wellspecified\"\ntheta = 5.0\np = 0.0\nalpha = 2.0\nbeta = 3.0\nn = 30\nhorizon = 6\nseed = 4\n";
    fs::write(dir.join("run.toml"), config).unwrap();
    ok(dir, &["-c", "run.toml", "simulate", "--out", "s.json"]);
    let s = DatedSeries::read(fs::File::open(dir.join("s.json")).unwrap()).unwrap();
    assert!(s.series.curves().iter().all(|c| c == &s.series.curves()[0]));

    ok(dir, &["-c", "run.toml", "fit", "--data", "s.json", "--out", "c.ndjson"]);
    let text = fs::read_to_string(dir.join("c.ndjson")).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("\"record\":\"sample\"")).count(), 1);

    fs::write(dir.join("h0.toml"), "[forecast]\nhorizons = [0, 2]\nseed = 1\n").unwrap();
    let out = run(dir, &["-c", "h0.toml", "forecast", "--fit", "c.ndjson", "--data", "s.json", "--out", "x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizons"));

    fs::write(dir.join("typo.toml"), "[forecast]\nhorizon = [1]\nseed = 1\n").unwrap();
    let out = run(dir, &["-c", "typo.toml", "simulate", "--out", "y.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}

/// Random but always-clearing daily bids.
fn write_bids(path: &Path, days: usize, seed: u64) {
    let mut rng = substream(seed, 0);
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(["date", "side", "price_eur_gj", "quantity_gj"]).unwrap();
    let start = chrono::NaiveDate::from_ymd_opt(2012, 3, 1).unwrap();
    for d in 0..days {
        let date = (start + chrono::Days::new(d as u64)).to_string();
        let mut row = |side: &str, price: f64, q: f64| {
            w.write_record([date.as_str(), side, &format!("{price:.2}"), &format!("{q:.1}")]).unwrap();
        };
        // Price-taking bids sit on the base level, so the first jump comes after them.
        row("demand", 23.0, rng.random_range(3.0..6.0));
        row("supply", 0.0, rng.random_range(3.0..6.0));
        for _ in 0..6 {
            row("demand", rng.random_range(8.0..23.0), rng.random_range(1.0..5.0));
            row("supply", rng.random_range(2.0..14.0), rng.random_range(1.0..5.0));
        }
        row("demand", 1.0, 40.0 + rng.random_range(0.0..10.0));
        row("supply", 22.0, 60.0 + rng.random_range(0.0..10.0));
    }
    w.flush().unwrap();
}

#[test]
fn market_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_bids(&dir.join("all.csv"), 14, 11);
    // Training days are the first 12.
    let text = fs::read_to_string(dir.join("all.csv")).unwrap();
    let train: Vec<&str> = text
        .lines()
        .filter(|l| !(l.starts_with("2012-03-13") || l.starts_with("2012-03-14")))
        .collect();
    fs::write(dir.join("train.csv"), train.join("\n") + "\n").unwrap();
    let config = format!(
        "{FIT}\n[forecast]\nhorizons = [1, 2]\nmembers = 30\nseed = 5\nreconstruction = \"quantile\"\n\n\
         [market]\nar = {{ seed = 6, chain_length = 600, burn_in = 100 }}\n"
    );
    fs::write(dir.join("run.toml"), config).unwrap();
    ok(dir, &["-c", "run.toml", "fit", "--bids", "train.csv", "--out", "fit"]);
    for f in ["chain_demand.ndjson", "chain_supply.ndjson", "ar_last_jump_demand.json", "ar_price.json"] {
        assert!(dir.join("fit").join(f).exists(), "{f}");
    }

    let out = run(dir, &["-c", "run.toml", "forecast", "--fit", "fit", "--bids", "train.csv", "--out", "fc"]);
    assert!(!out.status.success(), "first jumps are required");

    // First jumps are known ahead; take them from the held-out days.
    let days = BidTable::read_path(&dir.join("all.csv")).unwrap().build_all().unwrap();
    let mut first = String::from("horizon,side,first_jump\n");
    for h in [1, 2] {
        for side in [Side::Demand, Side::Supply] {
            let l = endpoints(days[11 + h].side(side)).unwrap().first;
            assert!(l > 0.0);
            first += &format!("{h},{side},{l}\n");
        }
    }
    fs::write(dir.join("first.csv"), first).unwrap();
    ok(
        dir,
        &["-c", "run.toml", "forecast", "--fit", "fit", "--bids", "train.csv", "--first-jumps", "first.csv", "--out", "fc"],
    );
    let artifacts = read_dir(&dir.join("fc")).unwrap();
    let a1 = &artifacts[&1];
    let Payload::Market { demand, supply, .. } = &a1.payload else { panic!("market artifact expected") };
    assert_eq!(demand.ensemble.members.len(), 30);
    assert!(supply.last_jumps.iter().all(|&r| r > supply.first_jump));
    assert_eq!(a1.origin.date, chrono::NaiveDate::from_ymd_opt(2012, 3, 12));

    ok(dir, &["-c", "run.toml", "evaluate", "--forecasts", "fc", "--bids", "all.csv", "--out", "m.csv"]);
    let rows = read_metrics(&dir.join("m.csv"));
    let metrics: Vec<&str> = rows.iter().filter(|r| r.horizon == 1).map(|r| r.metric.as_str()).collect();
    assert_eq!(metrics.iter().filter(|m| **m == "l2_normalized").count(), 2);
    assert!(metrics.contains(&"price_rmse_intersection") && metrics.contains(&"price_rmse_ar"));
    assert!(rows.iter().all(|r| r.value.is_finite() && r.value >= 0.0));

    // Truth that stops at the origin cannot score a one-day-ahead forecast.
    let out = run(dir, &["evaluate", "--forecasts", "fc", "--bids", "train.csv", "--out", "m2.csv"]);
    assert!(!out.status.success());

    let state = AppState::new(artifacts, TieRule::Midpoint, 23).unwrap();
    let up = state.whatif(Some(2), Side::Demand, Bid::new(20.0, 10.0)).unwrap();
    assert_eq!(up.summary.n_members, 30);
    assert!(up.summary.mean.unwrap() >= up.baseline.mean.unwrap());
}

#[test]
fn truth_against_itself_scores_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("s.toml"),
        "[simulate]\nmodel = \"misspecified\"\nhorizon = 8\nseed = 2\n",
    )
    .unwrap();
    ok(dir, &["-c", "s.toml", "simulate", "--out", "s.json"]);
    let series = DatedSeries::read(fs::File::open(dir.join("s.json")).unwrap()).unwrap();
    let curves = series.series.curves();
    let origin = 5;
    let artifacts: Vec<_> = [1, 3]
        .into_iter()
        .map(|h| curvecast_cli::artifacts::ForecastArtifact {
            schema_version: 1,
            horizon: h,
            origin: curvecast_cli::artifacts::Origin { index: origin, date: None },
            payload: Payload::Curve {
                ensemble: curvecast::forecast::ForecastEnsemble::from_members(h, vec![curves[origin + h].clone(); 3], 500, 0.9)
                    .unwrap(),
                last_observed: curves[origin].clone(),
            },
        })
        .collect();
    let rows = evaluate(&artifacts, &Truth::Curves(series), TieRule::Midpoint).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.value == 0.0));
}
