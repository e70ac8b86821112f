//! Likelihood-free posterior sampling.
//!
//! A first parameter is drawn from the prior until its simulated series
//! passes the three distance gates. Each later iteration proposes from a
//! truncated normal random walk and moves only when the Metropolis-Hastings
//! test and the gates both pass.

pub mod chain;
pub mod io;
pub mod prior;
pub mod proposal;

pub use chain::{
    bootstrap_first_accept, mh_step, run_chain, run_chain_with, run_chains, Bootstrap, ChainDiagnostics,
    ChainRecord, ChainSample, ChainSettings, FnSchedule, LinearDecay, Outcome, ParticleSimulator, Simulator,
    Step, ThresholdSchedule,
};
pub use io::{read_chain, write_chain, ChainHeader, FittedChain, CHAIN_SCHEMA_VERSION};
pub use prior::{Marginal, PriorSpec};
pub use proposal::{KernelMode, ProposalSpec};

use serde::{Deserialize, Serialize};

use crate::engine::calibrate_n;
use crate::error::{Error, Result};
use crate::stepcurve::{CurveSeries, DEFAULT_GRID_SIZE};
use crate::summaries::{calibrate_thresholds, summarize, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdSpec {
    /// Fixed `(eps1, eps2, eps3)`.
    Absolute([f64; 3]),
    /// Fractions `(c1, c2, c3)` of the data summaries.
    Fractions([f64; 3]),
}

/// Thresholds start at `start_factor` times their target and shrink
/// linearly to it over `iterations` iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    pub start_factor: f64,
    pub iterations: usize,
}

/// Everything needed to fit a chain to an observed series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub iterations: usize,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: usize,
    pub seed: u64,
    /// Particle count; calibrated from the data when absent.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    pub thresholds: ThresholdSpec,
    #[serde(default)]
    pub decay: Option<DecaySpec>,
    pub prior: PriorSpec,
    pub proposal: ProposalSpec,
}

fn default_max_attempts() -> usize {
    10_000
}

fn default_tol() -> f64 {
    1e-3
}

fn default_grid() -> usize {
    DEFAULT_GRID_SIZE
}

/// Summarises `data`, resolves `n` and the thresholds, and runs the chain.
pub fn fit(data: &CurveSeries, spec: &FitSpec) -> Result<FittedChain> {
    if data.len() < 2 {
        return Err(Error::arg("fitting needs at least two curves"));
    }
    spec.prior.validate()?;
    let n = match spec.n {
        Some(0) => return Err(Error::arg("particle count must be at least 1")),
        Some(n) => n,
        None => calibrate_n(data, spec.tol)?,
    };
    let summary = summarize(data, spec.grid_size)?;
    let thresholds = match spec.thresholds {
        ThresholdSpec::Absolute(eps) => Thresholds::new(eps)?,
        ThresholdSpec::Fractions(c) => calibrate_thresholds(&summary, c)?,
    };
    let simulator = ParticleSimulator {
        n,
        horizon: data.horizon(),
        grid_size: spec.grid_size,
    };
    let settings = ChainSettings {
        iterations: spec.iterations,
        max_attempts: spec.max_attempts,
        seed: spec.seed,
    };
    let record = match spec.decay {
        None => run_chain(&settings, &spec.prior, &spec.proposal, &simulator, &summary, &thresholds)?,
        Some(d) => {
            if !(d.start_factor >= 1.0) {
                return Err(Error::arg("decay start factor must be at least 1"));
            }
            let start = Thresholds {
                eps: thresholds.eps.map(|e| e * d.start_factor),
                fractions: None,
            };
            let schedule = LinearDecay {
                start,
                end: thresholds,
                iterations: d.iterations,
            };
            run_chain(&settings, &spec.prior, &spec.proposal, &simulator, &summary, &schedule)?
        }
    };
    Ok(FittedChain {
        header: ChainHeader {
            schema_version: CHAIN_SCHEMA_VERSION,
            n,
            horizon: data.horizon(),
            grid_size: spec.grid_size,
            thresholds,
            spec: spec.clone(),
            config: None,
        },
        record,
    })
}
