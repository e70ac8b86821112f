use rand::Rng;
use serde::{Deserialize, Serialize};

use super::prior::PriorSpec;
use super::proposal::ProposalSpec;
use crate::engine::{run_sorted, Initial, ParamVector, PARTICLE_DOMAIN};
use crate::error::{Error, Result};
use crate::rng::{substream, SimRng};
use crate::summaries::{accept, GateOutcome, SeriesSummary, SummaryBuilder, Thresholds};

/// Produces the summaries of one synthetic series for a parameter value.
pub trait Simulator: Sync {
    fn summarize(&self, params: &ParamVector, rng: &mut SimRng) -> Result<SeriesSummary>;
}

impl<F> Simulator for F
where
    F: Fn(&ParamVector, &mut SimRng) -> Result<SeriesSummary> + Sync,
{
    fn summarize(&self, params: &ParamVector, rng: &mut SimRng) -> Result<SeriesSummary> {
        self(params, rng)
    }
}

/// Stationary particle trajectories of `horizon + 1` curves, summarised
/// on the fly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticleSimulator {
    pub n: usize,
    pub horizon: usize,
    pub grid_size: usize,
}

impl Simulator for ParticleSimulator {
    fn summarize(&self, params: &ParamVector, rng: &mut SimRng) -> Result<SeriesSummary> {
        let mut builder = SummaryBuilder::new(self.grid_size);
        run_sorted(&Initial::Stationary, params, self.n, self.horizon, rng, |_, sorted| {
            builder.push_sorted_particles(sorted, PARTICLE_DOMAIN)
        })?;
        builder.finish()
    }
}

/// Thresholds in force at each iteration; iteration 0 is the bootstrap.
pub trait ThresholdSchedule: Sync {
    fn at(&self, iteration: usize) -> Thresholds;
}

impl ThresholdSchedule for Thresholds {
    fn at(&self, _iteration: usize) -> Thresholds {
        *self
    }
}

/// Wraps a closure as a schedule.
pub struct FnSchedule<F>(pub F);

impl<F: Fn(usize) -> Thresholds + Sync> ThresholdSchedule for FnSchedule<F> {
    fn at(&self, iteration: usize) -> Thresholds {
        (self.0)(iteration)
    }
}

/// Linear interpolation from `start` to `end` over the first `iterations`
/// iterations, constant at `end` afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDecay {
    pub start: Thresholds,
    pub end: Thresholds,
    pub iterations: usize,
}

impl ThresholdSchedule for LinearDecay {
    fn at(&self, iteration: usize) -> Thresholds {
        if iteration >= self.iterations {
            return self.end;
        }
        let w = iteration as f64 / self.iterations as f64;
        let eps = [0, 1, 2].map(|j| {
            let (s, e) = (self.start.eps[j], self.end.eps[j]);
            if s.is_infinite() {
                s
            } else {
                s + w * (e - s)
            }
        });
        Thresholds {
            eps,
            fractions: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// First element, drawn from the prior.
    Bootstrap,
    Accepted,
    /// Failed the Metropolis-Hastings test; no series was simulated.
    RejectedRatio,
    /// Failed the jump-count gate.
    RejectedJumps,
    /// Failed the mean-curve gate.
    RejectedMean,
    /// Failed the consecutive-distance gate.
    RejectedVariation,
}

impl Outcome {
    fn from_gate(g: usize) -> Self {
        match g {
            0 => Outcome::RejectedJumps,
            1 => Outcome::RejectedMean,
            _ => Outcome::RejectedVariation,
        }
    }
}

/// One chain element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSample {
    pub iteration: usize,
    /// The chain state after this iteration.
    pub params: ParamVector,
    pub accepted: bool,
    pub outcome: Outcome,
    /// The proposal evaluated at this iteration.
    pub proposal: ParamVector,
    /// Distances of the proposal's series, absent when it was not simulated.
    pub distances: Option<[f64; 3]>,
    /// `ln` of the prior-times-kernel ratio, absent for the bootstrap.
    pub ln_mh_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub bootstrap_attempts: usize,
    pub accepted: usize,
    pub rejected_ratio: usize,
    /// Rejections attributed to the first failing gate.
    pub rejected_gates: [usize; 3],
}

impl ChainDiagnostics {
    /// Number of Metropolis-Hastings iterations after the bootstrap.
    pub fn steps(&self) -> usize {
        self.accepted + self.rejected_ratio + self.rejected_gates.iter().sum::<usize>()
    }

    pub fn acceptance_rate(&self) -> f64 {
        match self.steps() {
            0 => f64::NAN,
            s => self.accepted as f64 / s as f64,
        }
    }

    fn record(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Bootstrap => {}
            Outcome::Accepted => self.accepted += 1,
            Outcome::RejectedRatio => self.rejected_ratio += 1,
            Outcome::RejectedJumps => self.rejected_gates[0] += 1,
            Outcome::RejectedMean => self.rejected_gates[1] += 1,
            Outcome::RejectedVariation => self.rejected_gates[2] += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSettings {
    /// Chain length including the bootstrap element.
    pub iterations: usize,
    pub max_attempts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub samples: Vec<ChainSample>,
    pub diagnostics: ChainDiagnostics,
}

impl ChainRecord {
    pub fn params(&self) -> impl ExactSizeIterator<Item = ParamVector> + '_ {
        self.samples.iter().map(|s| s.params)
    }

    /// Chain states after dropping `burn_in` elements and keeping every
    /// `thin`-th one.
    pub fn thinned(&self, burn_in: usize, thin: usize) -> Vec<ParamVector> {
        self.samples
            .iter()
            .skip(burn_in)
            .step_by(thin.max(1))
            .map(|s| s.params)
            .collect()
    }
}

/// First accepted prior draw.
pub struct Bootstrap {
    pub params: ParamVector,
    pub gates: GateOutcome,
    pub attempts: usize,
}

/// Draws from the prior until a simulated series passes all three gates.
pub fn bootstrap_first_accept<S: Simulator + ?Sized>(
    prior: &PriorSpec,
    simulator: &S,
    data: &SeriesSummary,
    thresholds: &Thresholds,
    max_attempts: usize,
    rng: &mut SimRng,
) -> Result<Bootstrap> {
    if max_attempts == 0 {
        return Err(Error::arg("max_attempts must be at least 1"));
    }
    let mut best = [f64::INFINITY; 3];
    let mut best_score = f64::INFINITY;
    for attempt in 1..=max_attempts {
        let eta = prior.sample(rng);
        let sim = simulator.summarize(&eta, rng)?;
        let gates = accept(&sim, data, thresholds);
        if gates.accepted() {
            return Ok(Bootstrap {
                params: eta,
                gates,
                attempts: attempt,
            });
        }
        // Closest in the sense of the largest distance-to-threshold ratio.
        let score = (0..3)
            .map(|j| gates.distances[j] / thresholds.eps[j].max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        if score < best_score {
            best_score = score;
            best = gates.distances;
        }
    }
    Err(Error::BootstrapFailure {
        attempts: max_attempts,
        best_distances: best,
    })
}

/// Result of one Metropolis-Hastings step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: ParamVector,
    pub proposal: ParamVector,
    pub outcome: Outcome,
    pub distances: Option<[f64; 3]>,
    pub ln_ratio: f64,
}

/// Proposes from the truncated random walk and accepts when both the
/// Metropolis-Hastings test and the distance gates pass. The ratio test
/// runs first so that rejected proposals are never simulated.
pub fn mh_step<S: Simulator + ?Sized>(
    current: &ParamVector,
    prior: &PriorSpec,
    proposal: &ProposalSpec,
    simulator: &S,
    data: &SeriesSummary,
    thresholds: &Thresholds,
    rng: &mut SimRng,
) -> Result<Step> {
    let cand = proposal.propose(current, prior, rng);
    let ln_ratio = prior.ln_density(&cand) - prior.ln_density(current)
        + proposal.ln_correction(current, &cand, prior);
    let u: f64 = rng.random();
    if !(u.ln() <= ln_ratio) {
        return Ok(Step {
            next: *current,
            proposal: cand,
            outcome: Outcome::RejectedRatio,
            distances: None,
            ln_ratio,
        });
    }
    let sim = simulator.summarize(&cand, rng)?;
    let gates = accept(&sim, data, thresholds);
    let (next, outcome) = match gates.first_failure() {
        None => (cand, Outcome::Accepted),
        Some(g) => (*current, Outcome::from_gate(g)),
    };
    Ok(Step {
        next,
        proposal: cand,
        outcome,
        distances: Some(gates.distances),
        ln_ratio,
    })
}

/// Runs the bootstrap followed by `iterations - 1` Metropolis-Hastings
/// steps on substream 0 of `settings.seed`.
pub fn run_chain<S, T>(
    settings: &ChainSettings,
    prior: &PriorSpec,
    proposal: &ProposalSpec,
    simulator: &S,
    data: &SeriesSummary,
    schedule: &T,
) -> Result<ChainRecord>
where
    S: Simulator + ?Sized,
    T: ThresholdSchedule + ?Sized,
{
    run_chain_with(settings, prior, proposal, simulator, data, schedule, &mut substream(settings.seed, 0))
}

pub fn run_chain_with<S, T>(
    settings: &ChainSettings,
    prior: &PriorSpec,
    proposal: &ProposalSpec,
    simulator: &S,
    data: &SeriesSummary,
    schedule: &T,
    rng: &mut SimRng,
) -> Result<ChainRecord>
where
    S: Simulator + ?Sized,
    T: ThresholdSchedule + ?Sized,
{
    if settings.iterations == 0 {
        return Err(Error::arg("chain length must be at least 1"));
    }
    let boot = bootstrap_first_accept(prior, simulator, data, &schedule.at(0), settings.max_attempts, rng)?;
    let mut diagnostics = ChainDiagnostics {
        bootstrap_attempts: boot.attempts,
        ..Default::default()
    };
    let mut samples = Vec::with_capacity(settings.iterations);
    samples.push(ChainSample {
        iteration: 0,
        params: boot.params,
        accepted: true,
        outcome: Outcome::Bootstrap,
        proposal: boot.params,
        distances: Some(boot.gates.distances),
        ln_mh_ratio: None,
    });
    let mut current = boot.params;
    for i in 1..settings.iterations {
        let step = mh_step(&current, prior, proposal, simulator, data, &schedule.at(i), rng)?;
        diagnostics.record(step.outcome);
        current = step.next;
        samples.push(ChainSample {
            iteration: i,
            params: current,
            accepted: step.outcome == Outcome::Accepted,
            outcome: step.outcome,
            proposal: step.proposal,
            distances: step.distances,
            ln_mh_ratio: Some(step.ln_ratio),
        });
    }
    Ok(ChainRecord { samples, diagnostics })
}

/// Independent chains on substreams `0..count` of `settings.seed`, run in
/// parallel.
pub fn run_chains<S, T>(
    count: usize,
    settings: &ChainSettings,
    prior: &PriorSpec,
    proposal: &ProposalSpec,
    simulator: &S,
    data: &SeriesSummary,
    schedule: &T,
) -> Result<Vec<ChainRecord>>
where
    S: Simulator + ?Sized,
    T: ThresholdSchedule + ?Sized,
{
    use rayon::prelude::*;
    (0..count)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(settings.seed, c as u64);
            run_chain_with(settings, prior, proposal, simulator, data, schedule, &mut rng)
        })
        .collect()
}
