//! Predictive ensembles conditional on the last observed curve.
//!
//! Each member draws a parameter from the posterior sample, rebuilds a
//! particle vector from `F_T`, runs the dynamics forward and records the
//! curve at every requested horizon. Ensembles are reduced on a grid to a
//! pointwise mean, pointwise bands and a point estimate: the member closest
//! in L2 to the mean, which keeps the step shape the mean itself loses.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_sorted, Initial, ParamVector, PARTICLE_DOMAIN};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::stepcurve::{grid_l2, StepCurve, DEFAULT_GRID_SIZE};

/// How a particle vector is rebuilt from an observed curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// A jump of size `k / n` gives `k` particles at its location; other
    /// jump sizes are an error.
    #[default]
    Exact,
    /// Particle `i` is the `(i - 1/2) / n` quantile of the curve; mass
    /// missing below level 1 is placed at the upper domain end.
    Quantile,
}

const SIZE_TOL: f64 = 1e-6;

/// Particles on `[0, 1]` whose empirical cdf is `curve` (exactly or
/// approximately, depending on `mode`).
pub fn reconstruct_particles(curve: &StepCurve, n: usize, mode: Reconstruction) -> Result<Vec<f64>> {
    if curve.domain() != PARTICLE_DOMAIN {
        return Err(Error::arg(format!(
            "particles live on [0, 1], curve domain is {:?}",
            curve.domain()
        )));
    }
    if n == 0 {
        return Err(Error::arg("particle count must be at least 1"));
    }
    match mode {
        Reconstruction::Exact => exact(curve, n),
        Reconstruction::Quantile => Ok(quantiles(curve, n)),
    }
}

fn exact(curve: &StepCurve, n: usize) -> Result<Vec<f64>> {
    let nf = n as f64;
    let check = |location: f64, size: f64| -> Result<usize> {
        let k = size * nf;
        if (k - k.round()).abs() > SIZE_TOL * nf.max(1.0) || k.round() < 0.0 {
            return Err(Error::Reconstruction { location, size, n });
        }
        Ok(k.round() as usize)
    };
    let (lo, hi) = curve.domain();
    if check(lo, curve.base_level())? != 0 {
        return Err(Error::Reconstruction {
            location: lo,
            size: curve.base_level(),
            n,
        });
    }
    let mut out = Vec::with_capacity(n);
    for (&x, size) in curve.jumps().iter().zip(curve.jump_sizes()) {
        let k = check(x, size)?;
        if k == 0 {
            return Err(Error::Reconstruction { location: x, size, n });
        }
        out.extend(std::iter::repeat_n(x, k));
    }
    if out.len() != n {
        return Err(Error::Reconstruction {
            location: hi,
            size: 1.0 - curve.top_level(),
            n,
        });
    }
    Ok(out)
}

fn quantiles(curve: &StepCurve, n: usize) -> Vec<f64> {
    let (lo, hi) = curve.domain();
    let (jumps, levels) = (curve.jumps(), curve.levels());
    let mut k = 0;
    (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) / n as f64;
            if curve.base_level() >= u {
                return lo;
            }
            while k < levels.len() && levels[k] < u {
                k += 1;
            }
            jumps.get(k).copied().unwrap_or(hi)
        })
        .collect()
}

/// Grid reductions of a set of member curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEnsemble {
    pub horizon: usize,
    pub coverage: f64,
    pub grid_size: usize,
    pub mean_grid: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub point_index: usize,
    pub point_estimate: StepCurve,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<StepCurve>,
}

impl ForecastEnsemble {
    pub fn from_members(horizon: usize, members: Vec<StepCurve>, grid_size: usize, coverage: f64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::arg("ensemble without members"));
        }
        let grids = members
            .iter()
            .map(|m| m.to_grid(grid_size))
            .collect::<Result<Vec<_>>>()?;
        let mean_grid = grid_mean(&grids);
        let (mut lower, mut upper) = credible_bands(&grids, coverage)?;
        // Nearest-rank bands can miss the mean on skewed margins.
        for k in 0..grid_size {
            lower[k] = lower[k].min(mean_grid[k]);
            upper[k] = upper[k].max(mean_grid[k]);
        }
        let point_index = point_estimate(&grids, &mean_grid);
        Ok(ForecastEnsemble {
            horizon,
            coverage,
            grid_size,
            point_estimate: members[point_index].clone(),
            mean_grid,
            lower,
            upper,
            point_index,
            members,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The reductions alone.
    pub fn without_members(&self) -> ForecastEnsemble {
        ForecastEnsemble {
            members: Vec::new(),
            ..self.clone()
        }
    }

    pub fn mean_band_width(&self) -> f64 {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).sum::<f64>() / self.grid_size as f64
    }
}

pub fn grid_mean(grids: &[Vec<f64>]) -> Vec<f64> {
    let mut mean = vec![0.0; grids[0].len()];
    for g in grids {
        for (m, v) in mean.iter_mut().zip(g) {
            *m += v;
        }
    }
    let n = grids.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Index of the member grid closest in L2 to `mean`; the lowest index wins
/// ties.
pub fn point_estimate(grids: &[Vec<f64>], mean: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, g) in grids.iter().enumerate() {
        let d = grid_l2(g, mean);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Nearest-rank quantile of sorted values.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Pointwise `(1 - coverage) / 2` and `(1 + coverage) / 2` nearest-rank
/// quantiles of the member grids.
pub fn credible_bands(grids: &[Vec<f64>], coverage: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::arg(format!("coverage must lie in (0, 1), got {coverage}")));
    }
    if grids.is_empty() {
        return Err(Error::arg("bands need at least one member"));
    }
    let size = grids[0].len();
    let (ql, qu) = ((1.0 - coverage) / 2.0, (1.0 + coverage) / 2.0);
    let mut col = vec![0.0; grids.len()];
    let mut lower = Vec::with_capacity(size);
    let mut upper = Vec::with_capacity(size);
    for k in 0..size {
        for (c, g) in col.iter_mut().zip(grids) {
            *c = g[k];
        }
        col.sort_unstable_by(f64::total_cmp);
        lower.push(nearest_rank(&col, ql));
        upper.push(nearest_rank(&col, qu));
    }
    Ok((lower, upper))
}

/// Fraction of grid points where `truth` lies inside the bands.
pub fn band_coverage(truth: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let inside = truth
        .iter()
        .zip(lower.iter().zip(upper))
        .filter(|(t, (l, u))| *l <= *t && *t <= *u)
        .count();
    inside as f64 / truth.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastSpec {
    pub horizons: Vec<usize>,
    #[serde(default = "default_members")]
    pub members: usize,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default)]
    pub reconstruction: Reconstruction,
    pub seed: u64,
}

fn default_members() -> usize {
    1000
}

fn default_coverage() -> f64 {
    0.95
}

fn default_grid() -> usize {
    DEFAULT_GRID_SIZE
}

impl ForecastSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::arg("horizons must be a non-empty list of positive integers"));
        }
        if self.members == 0 {
            return Err(Error::arg("at least one forecast member is required"));
        }
        if !(self.coverage > 0.0 && self.coverage < 1.0) {
            return Err(Error::arg(format!("coverage must lie in (0, 1), got {}", self.coverage)));
        }
        if self.grid_size < 2 {
            return Err(Error::arg("grid size must be at least 2"));
        }
        Ok(())
    }
}

/// Simulated member paths: `paths[i][j]` is member `i` at `horizons[j]`.
pub fn simulate_members(
    last: &StepCurve,
    draws: &[ParamVector],
    n: usize,
    spec: &ForecastSpec,
) -> Result<Vec<Vec<StepCurve>>> {
    spec.validate()?;
    if draws.is_empty() {
        return Err(Error::arg("no posterior draws to forecast from"));
    }
    let start = reconstruct_particles(last, n, spec.reconstruction)?;
    let max_h = *spec.horizons.iter().max().expect("validated non-empty");
    (0..spec.members)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(spec.seed, i as u64);
            let eta = draws[rng.random_range(0..draws.len())];
            let mut out: Vec<Option<StepCurve>> = vec![None; spec.horizons.len()];
            run_sorted(&Initial::Particles(start.clone()), &eta, n, max_h, &mut rng, |t, sorted| {
                for (slot, &h) in out.iter_mut().zip(&spec.horizons) {
                    if h == t {
                        *slot = Some(StepCurve::from_sorted_particles(sorted, PARTICLE_DOMAIN));
                    }
                }
            })?;
            Ok(out.into_iter().map(|c| c.expect("every horizon visited")).collect())
        })
        .collect()
}

/// One ensemble per requested horizon, in the order of `spec.horizons`.
pub fn forecast(last: &StepCurve, draws: &[ParamVector], n: usize, spec: &ForecastSpec) -> Result<Vec<ForecastEnsemble>> {
    let paths = simulate_members(last, draws, n, spec)?;
    spec.horizons
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            let members = paths.iter().map(|p| p[j].clone()).collect();
            ForecastEnsemble::from_members(h, members, spec.grid_size, spec.coverage)
        })
        .collect()
}
