//! Run configuration, read from TOML.
//!
//! ```toml
//! [paths]
//! data = "series.json"
//!
//! [simulate]
//! model = "wellspecified"
//! theta = 10.0
//! p = 0.7
//! alpha = 0.25
//! beta = 0.3
//! n = 500
//! horizon = 110
//! seed = 1
//!
//! [fit]
//! iterations = 5000
//! seed = 2
//! thresholds = { fractions = [0.35, 0.5, 0.02] }
//! prior = { theta = { family = "gamma", shape = 2.0, rate = 0.04 }, ... }
//! proposal = { step_sd = [3.0, 0.15, 0.15, 0.15] }
//!
//! [forecast]
//! horizons = [1, 3, 8, 10]
//! members = 1000
//! seed = 3
//! ```
//!
//! Unknown keys are rejected. Paths given on the command line take
//! precedence over `[paths]`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use curvecast::abc::FitSpec;
use curvecast::ar::ARModelSpec;
use curvecast::forecast::ForecastSpec;
use curvecast::synthetic::MisspecConfig;
use curvecast::{ParamVector, TieRule};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub paths: Paths,
    pub simulate: Option<SimulateConfig>,
    pub fit: Option<FitSpec>,
    pub forecast: Option<ForecastSpec>,
    pub market: Option<MarketConfig>,
    pub serve: Option<ServeConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Curve series JSON.
    pub data: Option<PathBuf>,
    /// Bid CSV file or directory of CSV files.
    pub bids: Option<PathBuf>,
    /// CSV of known first-jump locations: `horizon,side,first_jump`.
    pub first_jumps: Option<PathBuf>,
    /// Chain file, or directory of fitted market artifacts.
    pub fit: Option<PathBuf>,
    /// Directory of forecast artifacts.
    pub forecasts: Option<PathBuf>,
    /// Output file or directory.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimulateConfig {
    Wellspecified {
        #[serde(flatten)]
        params: ParamVector,
        n: usize,
        horizon: usize,
        seed: u64,
    },
    Misspecified {
        #[serde(flatten)]
        config: MisspecConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    #[serde(default)]
    pub tie_rule: TieRule,
    /// Gibbs settings shared by the last-jump and price models.
    pub ar: ARModelSpec,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

fn default_bins() -> usize {
    46
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default = "default_addr")]
    pub addr: String,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default)]
    pub tie_rule: TieRule,
}

fn default_addr() -> String {
    "127.0.0.1:8080".into()
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            addr: default_addr(),
            histogram_bins: default_bins(),
            tie_rule: TieRule::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(SimulateConfig::Misspecified { config }) = &self.simulate {
            config.validate().context("[simulate]")?;
        }
        if let Some(SimulateConfig::Wellspecified { n, horizon, .. }) = &self.simulate {
            if *n == 0 || *horizon == 0 {
                bail!("[simulate]: n and horizon must be at least 1");
            }
        }
        if let Some(fit) = &self.fit {
            fit.prior.validate().context("[fit] prior")?;
            if fit.iterations == 0 {
                bail!("[fit]: iterations must be at least 1");
            }
        }
        if let Some(f) = &self.forecast {
            f.validate().context("[forecast]")?;
        }
        if let Some(m) = &self.market {
            m.ar.validate().context("[market] ar")?;
            if m.histogram_bins == 0 {
                bail!("[market]: histogram_bins must be at least 1");
            }
        }
        Ok(())
    }

    pub fn fit_spec(&self) -> Result<&FitSpec> {
        self.fit.as_ref().context("configuration has no [fit] section")
    }

    pub fn forecast_spec(&self) -> Result<&ForecastSpec> {
        self.forecast.as_ref().context("configuration has no [forecast] section")
    }

    pub fn market(&self) -> Result<&MarketConfig> {
        self.market.as_ref().context("configuration has no [market] section")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serialising configuration")
    }

    /// Writes the configuration as actually used next to an output.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))
    }
}

/// Path from the command line, else from `[paths]`.
pub fn resolve(flag: Option<PathBuf>, configured: &mut Option<PathBuf>, name: &str) -> Result<PathBuf> {
    if let Some(p) = flag {
        *configured = Some(p);
    }
    configured
        .clone()
        .with_context(|| format!("no {name} path given (flag or [paths].{name})"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
        [paths]
        data = "series.json"

        [simulate]
        model = "wellspecified"
        theta = 10.0
        p = 0.7
        alpha = 0.25
        beta = 0.3
        n = 500
        horizon = 110
        seed = 1

        [fit]
        iterations = 100
        seed = 2
        thresholds = { fractions = [0.35, 0.5, 0.02] }
        proposal = { step_sd = [3.0, 0.15, 0.15, 0.15] }

        [fit.prior]
        theta = { family = "gamma", shape = 2.0, rate = 0.04 }
        p = { family = "uniform", lo = 0.0, hi = 1.0 }
        alpha = { family = "uniform", lo = 0.0, hi = 1.0 }
        beta = { family = "uniform", lo = 0.0, hi = 1.0 }

        [forecast]
        horizons = [1, 3, 8, 10]
        members = 50
        seed = 3

        [market]
        tie_rule = "demand-side"
        ar = { seed = 4 }
    "#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::parse(FULL).unwrap();
        assert!(matches!(c.simulate, Some(SimulateConfig::Wellspecified { n: 500, .. })));
        assert_eq!(c.fit.as_ref().unwrap().max_attempts, 10_000);
        assert_eq!(c.market.as_ref().unwrap().tie_rule, TieRule::DemandSide);
        assert_eq!(c.market.as_ref().unwrap().ar.chain_length, 11_000);
        let again = RunConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn misspecified_defaults() {
        let c = RunConfig::parse("[simulate]\nmodel = \"misspecified\"\nhorizon = 20\nseed = 5\n").unwrap();
        match c.simulate {
            Some(SimulateConfig::Misspecified { config }) => {
                assert_eq!(config.a, 0.9);
                assert_eq!(config.noise_sample_size, 20);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let unknown = RunConfig::parse("[paths]\ndata = \"x\"\ncolour = 1\n").unwrap_err();
        assert!(format!("{unknown:#}").contains("colour"), "{unknown:#}");
        assert!(RunConfig::parse("[forecast]\nhorizons = [0, 1]\nseed = 1\n").is_err());
        assert!(RunConfig::parse("[simulate]\nmodel = \"misspecified\"\na = 1.5\nhorizon = 3\nseed = 1\n").is_err());
        let typo = "[simulate]\nmodel = \"wellspecified\"\ntheta = 1.0\np = 0.5\nalpha = 1.0\nbeta = 1.0\nn = 5\nhorizon = 3\nseed = 1\nsead = 2\n";
        assert!(RunConfig::parse(typo).is_err());
        assert!(RunConfig::parse("[simulate]\nmodel = \"misspecified\"\nhorizon = 3\nseed = 1\nweight = 0.5\n").is_err());
        assert!(RunConfig::parse("[simulate]\nmodel = \"wellspecified\"\ntheta = -1.0\np = 0.5\nalpha = 1.0\nbeta = 1.0\nn = 5\nhorizon = 3\nseed = 1\n").is_err());
    }

    #[test]
    fn flag_overrides_config() {
        let mut configured = Some(PathBuf::from("a"));
        assert_eq!(resolve(None, &mut configured, "data").unwrap(), PathBuf::from("a"));
        assert_eq!(resolve(Some("b".into()), &mut configured, "data").unwrap(), PathBuf::from("b"));
        assert_eq!(configured, Some(PathBuf::from("b")));
        assert!(resolve(None, &mut None, "data").is_err());
    }
}
