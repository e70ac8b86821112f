use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::prior::PriorSpec;
use crate::engine::ParamVector;
use crate::error::{Error, Result};

/// How the Metropolis-Hastings ratio treats the truncated kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// Kernels treated as symmetric: the ratio is the prior ratio.
    #[default]
    Symmetric,
    /// Full ratio including the truncation normalisers.
    Exact,
}

/// Independent normal random walks on each coordinate, truncated to the
/// prior support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalSpec {
    /// Step standard deviations for `(theta, p, alpha, beta)`.
    pub step_sd: [f64; 4],
    #[serde(default)]
    pub mode: KernelMode,
}

impl ProposalSpec {
    pub fn new(step_sd: [f64; 4], mode: KernelMode) -> Result<Self> {
        if step_sd.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::arg(format!("proposal steps must be positive, got {step_sd:?}")));
        }
        Ok(ProposalSpec { step_sd, mode })
    }

    pub fn propose<R: Rng + ?Sized>(&self, current: &ParamVector, prior: &PriorSpec, rng: &mut R) -> ParamVector {
        let cur = current.to_array();
        let marg = prior.marginals();
        let next = [0, 1, 2, 3].map(|j| truncated_normal(cur[j], self.step_sd[j], marg[j].support(), rng));
        ParamVector::from_array(next).expect("proposal stays inside the prior support")
    }

    /// `ln q(current | proposed) - ln q(proposed | current)`.
    pub fn ln_correction(&self, current: &ParamVector, proposed: &ParamVector, prior: &PriorSpec) -> f64 {
        match self.mode {
            KernelMode::Symmetric => 0.0,
            KernelMode::Exact => {
                let (c, x) = (current.to_array(), proposed.to_array());
                let marg = prior.marginals();
                (0..4)
                    .map(|j| {
                        let s = marg[j].support();
                        ln_mass(c[j], self.step_sd[j], s) - ln_mass(x[j], self.step_sd[j], s)
                    })
                    .sum()
            }
        }
    }
}

/// `ln P(a < N(center, sd^2) < b)`.
pub fn ln_mass(center: f64, sd: f64, (a, b): (f64, f64)) -> f64 {
    let std = Normal::standard();
    let upper = if b.is_finite() { std.cdf((b - center) / sd) } else { 1.0 };
    let lower = if a.is_finite() { std.cdf((a - center) / sd) } else { 0.0 };
    (upper - lower).ln()
}

/// Normal draw conditioned on the open interval `(a, b)`.
pub fn truncated_normal<R: Rng + ?Sized>(center: f64, sd: f64, (a, b): (f64, f64), rng: &mut R) -> f64 {
    for _ in 0..64 {
        let z: f64 = StandardNormal.sample(rng);
        let x = center + sd * z;
        if x > a && x < b {
            return x;
        }
    }
    // Far in a tail: invert the cdf instead.
    let std = Normal::standard();
    let lo = if a.is_finite() { std.cdf((a - center) / sd) } else { 0.0 };
    let hi = if b.is_finite() { std.cdf((b - center) / sd) } else { 1.0 };
    for _ in 0..64 {
        let u = lo + (hi - lo) * rng.random::<f64>();
        let x = center + sd * std.inverse_cdf(u);
        if x > a && x < b {
            return x;
        }
    }
    // Numerically empty mass: nearest interior point.
    let pad = 1e-12 * (1.0 + a.abs().min(b.abs()));
    if center <= a {
        a + pad
    } else {
        b - pad
    }
}
