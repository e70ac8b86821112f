use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use curvecast_cli::artifacts::{read_dir, ForecastArtifact};
use curvecast_cli::commands::{self, Truth};
use curvecast_cli::config::{resolve, RunConfig};
use curvecast_cli::service::{self, AppState};

#[derive(Parser)]
#[command(name = "curvecast", version, about = "Fit, forecast and query time series of step curves")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic curve series.
    Simulate {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the particle model to a curve series, or to both sides of a bid table.
    Fit {
        #[arg(long, conflicts_with = "bids")]
        data: Option<PathBuf>,
        #[arg(long)]
        bids: Option<PathBuf>,
        /// Chain file for a series, directory for bids.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one forecast artifact per configured horizon.
    Forecast {
        /// Chain file for a series, fit directory for bids.
        #[arg(long)]
        fit: Option<PathBuf>,
        #[arg(long, conflicts_with = "bids")]
        data: Option<PathBuf>,
        #[arg(long)]
        bids: Option<PathBuf>,
        /// CSV `horizon,side,first_jump`; required with bids.
        #[arg(long)]
        first_jumps: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score forecast artifacts against observed curves.
    Evaluate {
        /// Directories of forecast artifacts; may be repeated.
        #[arg(long = "forecasts", num_args = 1..)]
        forecasts: Vec<PathBuf>,
        #[arg(long, conflicts_with = "bids")]
        data: Option<PathBuf>,
        #[arg(long)]
        bids: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve forecast artifacts over HTTP.
    Serve {
        #[arg(long)]
        forecasts: Option<PathBuf>,
        #[arg(long)]
        addr: Option<String>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut paths = config.paths.clone();
    match cli.command {
        Command::Simulate { out } => {
            let out = resolve(out, &mut paths.output, "output")?;
            config.paths = paths;
            commands::simulate(&config, &out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Fit { data, bids, out } => {
            let out = resolve(out, &mut paths.output, "output")?;
            if bids.is_some() || (data.is_none() && paths.data.is_none() && paths.bids.is_some()) {
                let bids = resolve(bids, &mut paths.bids, "bids")?;
                config.paths = paths;
                commands::fit_market(&config, &bids, &out)?;
            } else {
                let data = resolve(data, &mut paths.data, "data")?;
                config.paths = paths;
                commands::fit_curves(&config, &data, &out)?;
            }
            eprintln!("wrote {}", out.display());
        }
        Command::Forecast {
            fit,
            data,
            bids,
            first_jumps,
            out,
        } => {
            let out = resolve(out, &mut paths.output, "output")?;
            let fit = resolve(fit, &mut paths.fit, "fit")?;
            let written = if bids.is_some() || (data.is_none() && paths.data.is_none() && paths.bids.is_some()) {
                let bids = resolve(bids, &mut paths.bids, "bids")?;
                let first = resolve(first_jumps, &mut paths.first_jumps, "first_jumps")?;
                config.paths = paths;
                commands::forecast_market(&config, &fit, &bids, &first, &out)?
            } else {
                let data = resolve(data, &mut paths.data, "data")?;
                config.paths = paths;
                commands::forecast_curves(&config, &fit, &data, &out)?
            };
            for p in written {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Evaluate {
            forecasts,
            data,
            bids,
            out,
        } => {
            let dirs = if forecasts.is_empty() {
                vec![paths.forecasts.clone().context("no forecasts directory given")?]
            } else {
                forecasts
            };
            let out = resolve(out, &mut paths.output, "output")?;
            let truth = if let Some(b) = bids.or(if data.is_none() { paths.bids.clone() } else { None }) {
                Truth::from_bids(&b)?
            } else {
                Truth::from_series(&resolve(data, &mut paths.data, "data")?)?
            };
            let mut artifacts: Vec<ForecastArtifact> = Vec::new();
            for d in &dirs {
                let found = read_dir(d)?;
                if found.is_empty() {
                    bail!("no forecast artifacts in {}", d.display());
                }
                artifacts.extend(found.into_values());
            }
            let rows = commands::evaluate(&artifacts, &truth, commands::tie_rule(&config))?;
            commands::write_metrics(&rows, &out)?;
            config.paths = paths;
            config.write_snapshot(&commands::sibling(&out, "config.toml"))?;
            eprintln!("wrote {}", out.display());
        }
        Command::Serve { forecasts, addr } => {
            let dir = resolve(forecasts, &mut paths.forecasts, "forecasts")?;
            let mut serve = config.serve.clone().unwrap_or_default();
            if let Some(a) = addr {
                serve.addr = a;
            }
            let artifacts = if dir.is_dir() {
                read_dir(&dir)?
            } else {
                eprintln!("{} does not exist; serving without artifacts", dir.display());
                Default::default()
            };
            let rule = config.market.as_ref().map_or(serve.tie_rule, |m| m.tie_rule);
            let state = AppState::new(artifacts, rule, serve.histogram_bins)?;
            eprintln!("loaded horizons {:?}", state.horizons());
            tokio::runtime::Runtime::new()?.block_on(service::serve(state, &serve.addr))?;
        }
    }
    Ok(())
}
