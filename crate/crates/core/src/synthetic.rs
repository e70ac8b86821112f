//! Synthetic curve series.
//!
//! The well-specified generator runs the particle model from its stationary
//! law. The misspecified one is a functional autoregression: starting from
//! the empirical cdf `F_e` of a small Beta sample, each curve is
//! `a * F_{t-1} + (1 - a) * F_e` with a fresh `F_e` every step.

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::engine::{simulate, EngineConfig, Initial, ParamVector, PARTICLE_DOMAIN};
use crate::error::{Error, Result};
use crate::rng::{substream, SimRng};
use crate::stepcurve::{CurveSeries, StepCurve};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisspecConfig {
    /// Weight of the previous curve, strictly inside `(0, 1)`.
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_noise_size")]
    pub noise_sample_size: usize,
    #[serde(default = "default_noise_beta")]
    pub noise_beta: (f64, f64),
    /// Number of steps; the series has `horizon + 1` curves.
    pub horizon: usize,
    pub seed: u64,
}

fn default_a() -> f64 {
    0.9
}

fn default_noise_size() -> usize {
    20
}

fn default_noise_beta() -> (f64, f64) {
    (5.0, 3.0)
}

impl MisspecConfig {
    pub fn new(horizon: usize, seed: u64) -> Self {
        MisspecConfig {
            a: default_a(),
            noise_sample_size: default_noise_size(),
            noise_beta: default_noise_beta(),
            horizon,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::arg(format!("mixing weight must lie in (0, 1), got {}", self.a)));
        }
        if self.noise_sample_size == 0 {
            return Err(Error::arg("noise sample size must be at least 1"));
        }
        let (a, b) = self.noise_beta;
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::arg("noise Beta parameters must be positive"));
        }
        Ok(())
    }
}

/// Lazily generated misspecified series, `F_0` first. Jump counts grow by
/// about `noise_sample_size` per step, so long runs are best consumed as a
/// stream.
pub struct Misspecified {
    config: MisspecConfig,
    noise: Beta<f64>,
    rng: SimRng,
    sample: Vec<f64>,
    current: Option<StepCurve>,
    emitted: usize,
}

impl Misspecified {
    pub fn new(config: MisspecConfig) -> Result<Self> {
        config.validate()?;
        let noise = Beta::new(config.noise_beta.0, config.noise_beta.1)
            .map_err(|e| Error::arg(format!("noise law: {e}")))?;
        Ok(Misspecified {
            config,
            noise,
            rng: substream(config.seed, 0),
            sample: vec![0.0; config.noise_sample_size],
            current: None,
            emitted: 0,
        })
    }

    fn noise_curve(&mut self) -> StepCurve {
        for v in self.sample.iter_mut() {
            *v = self.noise.sample(&mut self.rng);
        }
        StepCurve::from_particles(&self.sample, PARTICLE_DOMAIN).expect("Beta draws lie in [0, 1]")
    }
}

impl Iterator for Misspecified {
    type Item = StepCurve;

    fn next(&mut self) -> Option<StepCurve> {
        if self.emitted > self.config.horizon {
            return None;
        }
        let noise = self.noise_curve();
        let next = match &self.current {
            None => noise,
            Some(prev) => prev
                .convex_combination(&noise, self.config.a)
                .expect("shared domain and valid weight"),
        };
        self.current = Some(next.clone());
        self.emitted += 1;
        Some(next)
    }
}

pub fn generate_misspecified(config: &MisspecConfig) -> Result<CurveSeries> {
    CurveSeries::new(Misspecified::new(*config)?.collect())
}

/// Particle-model series from the stationary law.
pub fn generate_wellspecified(params: &ParamVector, config: &EngineConfig) -> Result<CurveSeries> {
    simulate(&Initial::Stationary, params, config)
}
