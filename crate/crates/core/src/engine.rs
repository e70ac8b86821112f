//! Latent interacting particle system.
//!
//! At every step a `Binomial(n, p)` number `m` of particles, chosen
//! uniformly without replacement, is replaced by a sequential Blackwell-
//! MacQueen Pólya urn sample conditioned on the surviving particles. The
//! h-th replacement is a fresh draw from the `Beta(alpha, beta)` base measure
//! with probability `theta / (theta + n - m + h - 1)` and otherwise a copy of
//! a uniformly chosen particle among the survivors and the replacements
//! drawn so far. The curve at each time is the empirical cdf of the
//! particles.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, SimRng};
use crate::stepcurve::{CurveSeries, StepCurve};

/// Particles live on the unit interval.
pub const PARTICLE_DOMAIN: (f64, f64) = (0.0, 1.0);

/// Model parameters `(theta, p, alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ParamVector {
    theta: f64,
    p: f64,
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    theta: f64,
    p: f64,
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawParams> for ParamVector {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ParamVector::new(r.theta, r.p, r.alpha, r.beta)
    }
}

impl From<ParamVector> for RawParams {
    fn from(v: ParamVector) -> Self {
        RawParams {
            theta: v.theta,
            p: v.p,
            alpha: v.alpha,
            beta: v.beta,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ParamVector {
    pub fn new(theta: f64, p: f64, alpha: f64, beta: f64) -> Result<Self> {
        positive("theta", theta)?;
        positive("alpha", alpha)?;
        positive("beta", beta)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::arg(format!("renewal probability {p} outside [0, 1]")));
        }
        Ok(ParamVector {
            theta,
            p,
            alpha,
            beta,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Coordinates in the order `(theta, p, alpha, beta)`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.theta, self.p, self.alpha, self.beta]
    }

    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub particles: Vec<f64>,
    pub time_index: usize,
}

impl ParticleState {
    pub fn new(particles: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::arg("particle state needs at least one particle"));
        }
        if let Some(&x) = particles.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain {
                value: x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(ParticleState {
            particles,
            time_index: 0,
        })
    }

    pub fn curve(&self) -> StepCurve {
        let mut sorted = self.particles.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        StepCurve::from_sorted_particles(&sorted, PARTICLE_DOMAIN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Number of particles.
    pub n: usize,
    /// Number of transitions; a simulated series has `horizon + 1` curves.
    pub horizon: usize,
    pub seed: u64,
}

impl EngineConfig {
    pub fn new(n: usize, horizon: usize, seed: u64) -> Result<Self> {
        if n == 0 || horizon == 0 {
            return Err(Error::arg("particle count and horizon must be at least 1"));
        }
        Ok(EngineConfig { n, horizon, seed })
    }
}

/// Starting state of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// One `n`-sized Pólya urn sample, the stationary law of the dynamics.
    Stationary,
    Particles(Vec<f64>),
}

/// Counts reported by one transition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub replaced: usize,
    pub fresh: usize,
}

/// Transition kernel for fixed parameters and particle count, with the
/// scratch index permutation reused across steps.
#[derive(Debug, Clone)]
pub struct Transition {
    theta: f64,
    base: Beta<f64>,
    renewals: Binomial,
    order: Vec<usize>,
}

impl Transition {
    pub fn new(params: &ParamVector, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("particle count must be at least 1"));
        }
        let base = Beta::new(params.alpha, params.beta)
            .map_err(|e| Error::arg(format!("base measure: {e}")))?;
        let renewals = Binomial::new(n as u64, params.p)
            .map_err(|e| Error::arg(format!("renewal law: {e}")))?;
        Ok(Transition {
            theta: params.theta,
            base,
            renewals,
            order: (0..n).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// Applies one transition in place.
    pub fn step<R: Rng + ?Sized>(&mut self, particles: &mut [f64], rng: &mut R) -> StepStats {
        let n = self.order.len();
        debug_assert_eq!(particles.len(), n);
        let m = self.renewals.sample(rng) as usize;
        // Partial Fisher-Yates: the last m slots of `order` become a uniform
        // sample of m distinct indices, the first n - m are the survivors.
        for h in 0..m {
            let last = n - 1 - h;
            let j = rng.random_range(0..=last);
            self.order.swap(j, last);
        }
        let mut fresh = 0;
        for k in (n - m)..n {
            let value = if k == 0 || rng.random::<f64>() * (self.theta + k as f64) < self.theta {
                fresh += 1;
                self.base.sample(rng)
            } else {
                particles[self.order[rng.random_range(0..k)]]
            };
            particles[self.order[k]] = value;
        }
        StepStats { replaced: m, fresh }
    }
}

/// One transition of `state`.
pub fn transition<R: Rng + ?Sized>(
    state: &ParticleState,
    params: &ParamVector,
    rng: &mut R,
) -> Result<ParticleState> {
    let mut kernel = Transition::new(params, state.particles.len())?;
    let mut particles = state.particles.clone();
    kernel.step(&mut particles, rng);
    Ok(ParticleState {
        particles,
        time_index: state.time_index + 1,
    })
}

/// `n`-sized sample from a Pólya urn with total mass `theta` and the given
/// base measure.
pub fn polya_urn_sample<R: Rng + ?Sized>(
    n: usize,
    theta: f64,
    base: &Beta<f64>,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let v = if k == 0 || rng.random::<f64>() * (theta + k as f64) < theta {
            base.sample(rng)
        } else {
            out[rng.random_range(0..k)]
        };
        out.push(v);
    }
    out
}

/// Exact expected number of distinct values in an `n`-sized Pólya urn
/// sample with continuous base measure.
pub fn expected_distinct(theta: f64, n: usize) -> f64 {
    (0..n).map(|i| theta / (theta + i as f64)).sum()
}

fn initial_particles<R: Rng + ?Sized>(
    initial: &Initial,
    params: &ParamVector,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    match initial {
        Initial::Stationary => {
            let base = Beta::new(params.alpha, params.beta)
                .map_err(|e| Error::arg(format!("base measure: {e}")))?;
            Ok(polya_urn_sample(n, params.theta, &base, rng))
        }
        Initial::Particles(v) => {
            if v.len() != n {
                return Err(Error::arg(format!(
                    "initial state has {} particles, config expects {n}",
                    v.len()
                )));
            }
            Ok(ParticleState::new(v.clone())?.particles)
        }
    }
}

/// Runs `visit` on the sorted particle vector at every time `0..=horizon`.
pub fn run_sorted<R, F>(
    initial: &Initial,
    params: &ParamVector,
    n: usize,
    horizon: usize,
    rng: &mut R,
    mut visit: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &[f64]),
{
    let mut particles = initial_particles(initial, params, n, rng)?;
    let mut kernel = Transition::new(params, n)?;
    let mut sorted = particles.clone();
    for t in 0..=horizon {
        if t > 0 {
            kernel.step(&mut particles, rng);
            sorted.copy_from_slice(&particles);
        }
        sorted.sort_unstable_by(f64::total_cmp);
        visit(t, &sorted);
    }
    Ok(())
}

/// Simulates `F_0, ..., F_T` with the trajectory's own random stream.
pub fn simulate(initial: &Initial, params: &ParamVector, config: &EngineConfig) -> Result<CurveSeries> {
    let mut rng = substream(config.seed, 0);
    simulate_with(initial, params, config.n, config.horizon, &mut rng)
}

pub fn simulate_with<R: Rng + ?Sized>(
    initial: &Initial,
    params: &ParamVector,
    n: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<CurveSeries> {
    let mut curves = Vec::with_capacity(horizon + 1);
    run_sorted(initial, params, n, horizon, rng, |_, sorted| {
        curves.push(StepCurve::from_sorted_particles(sorted, PARTICLE_DOMAIN));
    })?;
    CurveSeries::new(curves)
}

/// Simulates `count` independent stationary trajectories in parallel, each
/// on substream `i` of `config.seed`.
pub fn simulate_many(params: &ParamVector, config: &EngineConfig, count: usize) -> Result<Vec<CurveSeries>> {
    use rayon::prelude::*;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng: SimRng = substream(config.seed, i as u64);
            simulate_with(&Initial::Stationary, params, config.n, config.horizon, &mut rng)
        })
        .collect()
}

/// Particle count `floor(1 / max(smallest observed jump, tol))`.
pub fn calibrate_n(series: &CurveSeries, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::arg(format!("tolerance must be positive, got {tol}")));
    }
    let smallest = series
        .curves()
        .iter()
        .filter_map(StepCurve::min_jump_size)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::arg("series has no jumps"))?;
    let inv = 1.0 / smallest.max(tol);
    // Jump sizes such as 1/500 are not exact in binary; snap near-integers.
    let n = if (inv - inv.round()).abs() < 1e-6 {
        inv.round()
    } else {
        inv.floor()
    };
    Ok((n as usize).max(1))
}
