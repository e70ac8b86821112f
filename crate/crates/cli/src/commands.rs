//! The batch subcommands: simulate, fit, forecast and evaluate.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use curvecast::abc::{self, read_chain, write_chain, FitSpec, FittedChain};
use curvecast::ar::{fit_levels, forecast_levels, forecast_mean, ARFit, Transform};
use curvecast::dataset::DatedSeries;
use curvecast::engine::EngineConfig;
use curvecast::forecast::{forecast, ForecastSpec};
use curvecast::market::{
    clearing_prices, denormalize_forecast, normalize, normalize_days, summarize_prices, BidTable, MarketDay,
};
use curvecast::rng::substream;
use curvecast::stepcurve::grid_l2;
use curvecast::synthetic::{generate_misspecified, generate_wellspecified};
use curvecast::{AuctionCurve, CurveSeries, ParamVector, Side, TieRule};
use serde::{Deserialize, Serialize};

use crate::artifacts::{ForecastArtifact, Origin, Payload, SideForecast, ARTIFACT_SCHEMA_VERSION};
use crate::config::{RunConfig, SimulateConfig};

pub const SIDES: [Side; 2] = [Side::Demand, Side::Supply];

/// Seed offset separating the last-jump and price draws from member paths.
const AUX_SEED: u64 = 0x5eed_0000_0001;

/// `series.json` -> `series.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(create(path)?, value)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_series(path: &Path) -> Result<DatedSeries> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    DatedSeries::read(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

pub fn read_chain_file(path: &Path) -> Result<FittedChain> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_chain(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub generator: String,
    pub curves: usize,
    pub simulate: SimulateConfig,
}

pub fn simulate(config: &RunConfig, out: &Path) -> Result<()> {
    let sim = config.simulate.as_ref().context("configuration has no [simulate] section")?;
    let series = match sim {
        SimulateConfig::Wellspecified { params, n, horizon, seed } => {
            generate_wellspecified(params, &EngineConfig::new(*n, *horizon, *seed)?)?
        }
        SimulateConfig::Misspecified { config } => generate_misspecified(config)?,
    };
    DatedSeries::undated(series.clone()).write(create(out)?)?;
    let manifest = Manifest {
        schema_version: 1,
        generator: format!("curvecast {}", env!("CARGO_PKG_VERSION")),
        curves: series.len(),
        simulate: sim.clone(),
    };
    write_json(&sibling(out, "manifest.json"), &manifest)?;
    config.write_snapshot(&sibling(out, "config.toml"))?;
    Ok(())
}

fn fit_with_config(data: &CurveSeries, spec: &FitSpec, config: &RunConfig) -> Result<FittedChain> {
    let mut fitted = abc::fit(data, spec)?;
    fitted.header.config = Some(serde_json::to_value(config)?);
    Ok(fitted)
}

fn report_chain(label: &str, chain: &FittedChain) {
    let d = &chain.record.diagnostics;
    eprintln!(
        "{label}: n = {}, eps = {:?}, acceptance {:.3} ({} accepted, {} ratio rejections, gate rejections {:?}, {} bootstrap attempts)",
        chain.header.n,
        chain.header.thresholds.eps,
        d.acceptance_rate(),
        d.accepted,
        d.rejected_ratio,
        d.rejected_gates,
        d.bootstrap_attempts
    );
}

/// Fits a chain to a curve series and writes it as NDJSON.
pub fn fit_curves(config: &RunConfig, data: &Path, out: &Path) -> Result<FittedChain> {
    let spec = config.fit_spec()?;
    let series = read_series(data)?;
    let chain = fit_with_config(&series.series, spec, config)?;
    write_chain(create(out)?, &chain)?;
    config.write_snapshot(&sibling(out, "config.toml"))?;
    report_chain("fit", &chain);
    Ok(chain)
}

pub fn chain_file(dir: &Path, side: Side) -> PathBuf {
    dir.join(format!("chain_{side}.ndjson"))
}

pub fn last_jump_file(dir: &Path, side: Side) -> PathBuf {
    dir.join(format!("ar_last_jump_{side}.json"))
}

pub fn price_file(dir: &Path) -> PathBuf {
    dir.join("ar_price.json")
}

fn read_days(bids: &Path) -> Result<Vec<MarketDay>> {
    let table = BidTable::read_path(bids).with_context(|| format!("reading bids from {}", bids.display()))?;
    ensure!(!table.is_empty(), "no bids in {}", bids.display());
    Ok(table.build_all()?)
}

fn daily_prices(days: &[MarketDay], rule: TieRule) -> Result<Vec<f64>> {
    days.iter()
        .map(|d| {
            d.clearing(rule)
                .map(|c| c.price)
                .with_context(|| format!("clearing {}", d.date))
        })
        .collect()
}

/// Fits one chain per side to the normalised curves, plus AR models for the
/// last-jump locations and the clearing price, into `out`.
pub fn fit_market(config: &RunConfig, bids: &Path, out: &Path) -> Result<()> {
    let spec = config.fit_spec()?;
    let market = config.market()?;
    let days = read_days(bids)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (k, side) in SIDES.into_iter().enumerate() {
        let normalized = normalize_days(&days, side)?;
        let series = CurveSeries::new(normalized.curves)?;
        let side_spec = FitSpec {
            seed: spec.seed.wrapping_add(k as u64),
            ..spec.clone()
        };
        let chain = fit_with_config(&series, &side_spec, config).with_context(|| format!("fitting {side} curves"))?;
        write_chain(create(&chain_file(out, side))?, &chain)?;
        report_chain(&format!("fit {side}"), &chain);
        let last: Vec<f64> = normalized.endpoints.iter().map(|e| e.last).collect();
        let ar = fit_levels(&last, Transform::LogDiff, &market.ar).with_context(|| format!("{side} last-jump model"))?;
        write_json(&last_jump_file(out, side), &ar)?;
    }
    let prices = daily_prices(&days, market.tie_rule)?;
    let ar = fit_levels(&prices, Transform::Diff, &market.ar).context("price model")?;
    write_json(&price_file(out), &ar)?;
    config.write_snapshot(&out.join("resolved-config.toml"))?;
    Ok(())
}

fn origin_of(dates: Option<&Vec<chrono::NaiveDate>>, len: usize) -> Origin {
    Origin {
        index: len - 1,
        date: dates.and_then(|d| d.last().copied()),
    }
}

pub fn forecast_curves(config: &RunConfig, chain: &Path, data: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let spec = config.forecast_spec()?;
    let fitted = read_chain_file(chain)?;
    let series = read_series(data)?;
    let last = series.series.last();
    ensure!(
        last.domain() == (0.0, 1.0),
        "the last curve lives on {:?}; forecasts need curves on [0, 1]",
        last.domain()
    );
    let draws: Vec<ParamVector> = fitted.record.params().collect();
    let ensembles = forecast(last, &draws, fitted.header.n, spec)
        .with_context(|| format!("forecasting with n = {}", fitted.header.n))?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let origin = origin_of(series.dates.as_ref(), series.series.len());
    let mut paths = Vec::new();
    for ensemble in ensembles {
        let artifact = ForecastArtifact {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            horizon: ensemble.horizon,
            origin: origin.clone(),
            payload: Payload::Curve {
                ensemble,
                last_observed: last.clone(),
            },
        };
        paths.push(artifact.write(out)?);
    }
    config.write_snapshot(&out.join("resolved-config.toml"))?;
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstJumpRow {
    pub horizon: usize,
    pub side: Side,
    pub first_jump: f64,
}

/// Known first-jump locations keyed by `(horizon, side)`.
pub fn read_first_jumps(path: &Path) -> Result<BTreeMap<(usize, Side), f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (i, row) in reader.deserialize::<FirstJumpRow>().enumerate() {
        let row = row.with_context(|| format!("{} line {}", path.display(), i + 2))?;
        ensure!(
            row.first_jump.is_finite() && row.first_jump >= 0.0,
            "{} line {}: first jump must be a non-negative quantity",
            path.display(),
            i + 2
        );
        if out.insert((row.horizon, row.side), row.first_jump).is_some() {
            bail!("{}: repeated entry for horizon {} {}", path.display(), row.horizon, row.side);
        }
    }
    Ok(out)
}

pub fn forecast_market(
    config: &RunConfig,
    fit_dir: &Path,
    bids: &Path,
    first_jumps: &Path,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let spec = config.forecast_spec()?;
    let days = read_days(bids)?;
    let known = read_first_jumps(first_jumps)?;
    let last_day = days.last().expect("non-empty");
    let mut sides: Vec<BTreeMap<usize, SideForecast>> = Vec::new();
    for (k, side) in SIDES.into_iter().enumerate() {
        let chain = read_chain_file(&chain_file(fit_dir, side))?;
        let ar: ARFit = read_json(&last_jump_file(fit_dir, side))?;
        let (last, _) = normalize(last_day.side(side)).with_context(|| format!("{} {side} curve", last_day.date))?;
        let draws: Vec<ParamVector> = chain.record.params().collect();
        let side_spec = ForecastSpec {
            seed: spec.seed.wrapping_add(k as u64),
            ..spec.clone()
        };
        let ensembles = forecast(&last, &draws, chain.header.n, &side_spec)
            .with_context(|| format!("forecasting {side} curves"))?;
        let mut by_h = BTreeMap::new();
        for ensemble in ensembles {
            let h = ensemble.horizon;
            let first = *known
                .get(&(h, side))
                .with_context(|| format!("no known first jump for {side} at horizon {h}"))?;
            let mut rng = substream(spec.seed ^ AUX_SEED, (k * 1_000_000 + h) as u64);
            let r_draws: Vec<f64> = forecast_levels(&ar, h, ensemble.members.len(), &mut rng)?
                .into_iter()
                .map(|p| p[h - 1])
                .collect();
            let den = denormalize_forecast(&ensemble.members, side, first, &r_draws, &mut rng)
                .with_context(|| format!("{side} at horizon {h}"))?;
            if den.resampled > 0 {
                eprintln!("{side} h={h}: {} last-jump draws resampled", den.resampled);
            }
            by_h.insert(
                h,
                SideForecast {
                    ensemble,
                    last_observed: last.clone(),
                    first_jump: first,
                    last_jumps: den.last_jumps,
                    resampled: den.resampled,
                },
            );
        }
        sides.push(by_h);
    }
    let price_ar: ARFit = read_json(&price_file(fit_dir))?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let origin = Origin {
        index: days.len() - 1,
        date: Some(last_day.date),
    };
    let mut supply = sides.pop().expect("two sides");
    let mut demand = sides.pop().expect("two sides");
    let mut paths = Vec::new();
    for &h in &spec.horizons {
        let mut rng = substream(spec.seed ^ AUX_SEED, (2_000_000 + h) as u64);
        let price_benchmark = forecast_mean(&price_ar, h, spec.members, &mut rng)?[h - 1];
        let artifact = ForecastArtifact {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            horizon: h,
            origin: origin.clone(),
            payload: Payload::Market {
                demand: demand.remove(&h).context("missing demand ensemble")?,
                supply: supply.remove(&h).context("missing supply ensemble")?,
                price_benchmark,
            },
        };
        paths.push(artifact.write(out)?);
    }
    config.write_snapshot(&out.join("resolved-config.toml"))?;
    Ok(paths)
}

/// Ground truth for evaluation.
pub enum Truth {
    Curves(DatedSeries),
    Market(Vec<MarketDay>),
}

impl Truth {
    pub fn from_series(path: &Path) -> Result<Self> {
        Ok(Truth::Curves(read_series(path)?))
    }

    pub fn from_bids(path: &Path) -> Result<Self> {
        Ok(Truth::Market(read_days(path)?))
    }
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub horizon: usize,
    pub side: String,
    pub metric: String,
    pub value: f64,
    pub count: usize,
}

/// Position of the origin in the truth, with its alignment checked.
fn locate(origin: &Origin, dates: Option<&[chrono::NaiveDate]>, len: usize) -> Result<usize> {
    let idx = match (origin.date, dates) {
        (Some(d), Some(dates)) => dates
            .iter()
            .position(|x| *x == d)
            .with_context(|| format!("date misalignment: forecast origin {d} is not in the truth"))?,
        (Some(d), None) => bail!("date misalignment: forecast origin {d} but the truth has no dates"),
        (None, _) => origin.index,
    };
    ensure!(idx < len, "date misalignment: origin index {idx} beyond {len} truth curves");
    Ok(idx)
}

/// Price-scale L2 distance between two curves over `(0, total]` of `truth`.
fn price_l2(forecast: &AuctionCurve, truth: &AuctionCurve, grid: usize) -> Result<f64> {
    let total = truth.total_quantity();
    ensure!(total.is_finite(), "true curve has unbounded quantity");
    let mut sum = 0.0;
    for k in 0..grid {
        let q = total * (k as f64 + 0.5) / grid as f64;
        let t = truth.price_at(q).expect("inside the true curve");
        let f = forecast
            .price_at(q)
            .unwrap_or_else(|| forecast.bids().last().expect("non-empty").price);
        sum += (f - t) * (f - t);
    }
    Ok((sum / grid as f64).sqrt())
}

#[derive(Default)]
struct Acc {
    sum: f64,
    count: usize,
}

impl Acc {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }
}

/// Compares forecast artifacts with the truth. L2 distances are averaged
/// over origins; price errors are reported as root mean squares.
pub fn evaluate(artifacts: &[ForecastArtifact], truth: &Truth, rule: TieRule) -> Result<Vec<MetricRow>> {
    let mut acc: BTreeMap<(usize, String, &'static str), Acc> = BTreeMap::new();
    for a in artifacts {
        let h = a.horizon;
        match (&a.payload, truth) {
            (Payload::Curve { ensemble, last_observed }, Truth::Curves(t)) => {
                let curves = t.series.curves();
                let idx = locate(&a.origin, t.dates.as_deref(), curves.len())?;
                ensure!(
                    &curves[idx] == last_observed,
                    "date misalignment: truth curve at the origin differs from the forecast's last observation"
                );
                let target = curves
                    .get(idx + h)
                    .with_context(|| format!("truth ends before origin {idx} + horizon {h}"))?;
                let g = ensemble.grid_size;
                let d = grid_l2(&ensemble.point_estimate.to_grid(g)?, &target.to_grid(g)?);
                acc.entry((h, "curve".into(), "l2_normalized")).or_default().push(d);
                acc.entry((h, "curve".into(), "l2_original")).or_default().push(d);
            }
            (Payload::Market { demand, supply, price_benchmark }, Truth::Market(days)) => {
                let dates: Vec<_> = days.iter().map(|d| d.date).collect();
                let idx = locate(&a.origin, Some(&dates), days.len())?;
                let target = days
                    .get(idx + h)
                    .with_context(|| format!("truth ends before {} + {h} days", dates[idx]))?;
                let mut pairs_parts = Vec::new();
                for (side, f) in [(Side::Demand, demand), (Side::Supply, supply)] {
                    let (norm, _) = normalize(target.side(side))?;
                    let g = f.ensemble.grid_size;
                    let d = grid_l2(&f.ensemble.point_estimate.to_grid(g)?, &norm.to_grid(g)?);
                    acc.entry((h, side.to_string(), "l2_normalized")).or_default().push(d);
                    let curves = f.auction_curves(side)?;
                    let d = price_l2(&curves[f.ensemble.point_index], target.side(side), g)?;
                    acc.entry((h, side.to_string(), "l2_original")).or_default().push(d);
                    pairs_parts.push(curves);
                }
                let supply_curves = pairs_parts.pop().expect("two sides");
                let demand_curves = pairs_parts.pop().expect("two sides");
                let pairs: Vec<_> = demand_curves.into_iter().zip(supply_curves).collect();
                let summary = summarize_prices(&clearing_prices(&pairs, None, rule)?, 1);
                let truth_price = target.clearing(rule).with_context(|| format!("clearing {}", target.date))?.price;
                let predicted = summary
                    .mean
                    .with_context(|| format!("no forecast member pair clears at horizon {h}"))?;
                acc.entry((h, "price".into(), "price_rmse_intersection"))
                    .or_default()
                    .push((predicted - truth_price).powi(2));
                acc.entry((h, "price".into(), "price_rmse_ar"))
                    .or_default()
                    .push((price_benchmark - truth_price).powi(2));
            }
            (Payload::Curve { .. }, Truth::Market(_)) => bail!("curve forecasts need a curve series as truth"),
            (Payload::Market { .. }, Truth::Curves(_)) => bail!("market forecasts need bids as truth"),
        }
    }
    Ok(acc
        .into_iter()
        .map(|((horizon, side, metric), a)| {
            let mean = a.sum / a.count as f64;
            MetricRow {
                horizon,
                side,
                metric: metric.to_string(),
                value: if metric.starts_with("price_rmse") { mean.sqrt() } else { mean },
                count: a.count,
            }
        })
        .collect())
}

pub fn write_metrics(rows: &[MetricRow], out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(out)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Tie rule from `[market]`, else `[serve]`, else the default.
pub fn tie_rule(config: &RunConfig) -> TieRule {
    config
        .market
        .as_ref()
        .map(|m| m.tie_rule)
        .or(config.serve.as_ref().map(|s| s.tie_rule))
        .unwrap_or_default()
}

/// Point estimate of a side as an auction curve.
pub fn point_curve(f: &SideForecast, side: Side) -> Result<AuctionCurve> {
    let i = f.ensemble.point_index;
    let r = *f.last_jumps.get(i).context("missing last jump")?;
    Ok(curvecast::market::denormalize(&f.ensemble.members[i], side, f.first_jump, r)?)
}

