//! Forecast artifacts on disk, one JSON file per horizon.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use chrono::NaiveDate;
use curvecast::forecast::{point_estimate, ForecastEnsemble};
use curvecast::market::denormalize;
use curvecast::stepcurve::grid_l2;
use curvecast::{AuctionCurve, Side, StepCurve};
use serde::{Deserialize, Serialize};

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

/// Where a forecast was made from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    /// Index of the last observed curve in the input series.
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideForecast {
    /// Forecast of the normalised curve.
    pub ensemble: ForecastEnsemble,
    pub last_observed: StepCurve,
    /// Known first-jump location on the target day.
    pub first_jump: f64,
    /// Last-jump location paired with each member.
    pub last_jumps: Vec<f64>,
    /// Draws of the last jump that were replaced for not exceeding the first.
    pub resampled: usize,
}

impl SideForecast {
    /// Members mapped back to price and quantity.
    pub fn auction_curves(&self, side: Side) -> Result<Vec<AuctionCurve>> {
        ensure!(
            self.last_jumps.len() == self.ensemble.members.len(),
            "{} last-jump values for {} members",
            self.last_jumps.len(),
            self.ensemble.members.len()
        );
        self.ensemble
            .members
            .iter()
            .zip(&self.last_jumps)
            .map(|(m, &r)| Ok(denormalize(m, side, self.first_jump, r)?))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Curve {
        ensemble: ForecastEnsemble,
        last_observed: StepCurve,
    },
    Market {
        demand: SideForecast,
        supply: SideForecast,
        /// Univariate AR forecast of the clearing price.
        price_benchmark: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastArtifact {
    pub schema_version: u32,
    pub horizon: usize,
    pub origin: Origin,
    #[serde(flatten)]
    pub payload: Payload,
}

impl ForecastArtifact {
    pub fn file_name(horizon: usize) -> String {
        format!("forecast_h{horizon}.json")
    }

    pub fn ensembles(&self) -> Vec<&ForecastEnsemble> {
        match &self.payload {
            Payload::Curve { ensemble, .. } => vec![ensemble],
            Payload::Market { demand, supply, .. } => vec![&demand.ensemble, &supply.ensemble],
        }
    }

    /// Checks the version, the horizon and that each stored point estimate
    /// is the member closest to the mean.
    pub fn verify(&self) -> Result<()> {
        ensure!(
            self.schema_version == ARTIFACT_SCHEMA_VERSION,
            "unsupported artifact schema version {}",
            self.schema_version
        );
        for e in self.ensembles() {
            ensure!(e.horizon == self.horizon, "ensemble horizon {} in a horizon {} artifact", e.horizon, self.horizon);
            ensure!(!e.members.is_empty(), "artifact has no ensemble members");
            let grids = e
                .members
                .iter()
                .map(|m| m.to_grid(e.grid_size))
                .collect::<curvecast::Result<Vec<_>>>()?;
            let idx = point_estimate(&grids, &e.mean_grid);
            ensure!(
                idx == e.point_index && e.members[idx] == e.point_estimate,
                "stored point estimate {} is not the closest member to the mean ({idx}, distance {})",
                e.point_index,
                grid_l2(&grids[idx], &e.mean_grid)
            );
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(Self::file_name(self.horizon));
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let artifact: ForecastArtifact = serde_json::from_reader(std::io::BufReader::new(file))
            .with_context(|| format!("parsing {}", path.display()))?;
        artifact.verify().with_context(|| format!("checking {}", path.display()))?;
        Ok(artifact)
    }
}

/// Every `forecast_h*.json` in `dir`, keyed by horizon.
pub fn read_dir(dir: &Path) -> Result<BTreeMap<usize, ForecastArtifact>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if !(name.starts_with("forecast_h") && name.ends_with(".json")) {
            continue;
        }
        let a = ForecastArtifact::read(&path)?;
        if out.insert(a.horizon, a).is_some() {
            bail!("two artifacts for the same horizon in {}", dir.display());
        }
    }
    Ok(out)
}
