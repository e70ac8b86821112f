use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::engine::ParamVector;
use crate::error::{Error, Result};

/// Prior law of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Gamma { shape: f64, rate: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Marginal {
    pub fn gamma(shape: f64, rate: f64) -> Self {
        Marginal::Gamma { shape, rate }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        Marginal::Uniform { lo, hi }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            Marginal::Gamma { shape, rate } => {
                shape.is_finite() && rate.is_finite() && shape > 0.0 && rate > 0.0
            }
            Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!("invalid prior for {name}: {self:?}")))
        }
    }

    /// Open support interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Marginal::Gamma { .. } => (0.0, f64::INFINITY),
            Marginal::Uniform { lo, hi } => (lo, hi),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        x > lo && x < hi
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return f64::NEG_INFINITY;
        }
        match *self {
            Marginal::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Marginal::Uniform { lo, hi } => -(hi - lo).ln(),
        }
    }

    /// Draws strictly inside the support.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = match *self {
                Marginal::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate)
                    .expect("validated gamma parameters")
                    .sample(rng),
                Marginal::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            };
            if self.contains(x) {
                return x;
            }
        }
    }
}

/// Independent priors on `(theta, p, alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub theta: Marginal,
    pub p: Marginal,
    pub alpha: Marginal,
    pub beta: Marginal,
}

impl PriorSpec {
    pub fn new(theta: Marginal, p: Marginal, alpha: Marginal, beta: Marginal) -> Result<Self> {
        let spec = PriorSpec { theta, p, alpha, beta };
        spec.validate()?;
        Ok(spec)
    }

    /// Gamma(2, 0.04) on theta, uniform on the unit interval elsewhere.
    pub fn uniform_shape() -> Self {
        PriorSpec {
            theta: Marginal::gamma(2.0, 0.04),
            p: Marginal::uniform(0.0, 1.0),
            alpha: Marginal::uniform(0.0, 1.0),
            beta: Marginal::uniform(0.0, 1.0),
        }
    }

    /// Gamma(2, 0.04) on theta, Gamma(2, 0.25) on the base measure
    /// parameters, uniform on p.
    pub fn gamma_shape() -> Self {
        PriorSpec {
            theta: Marginal::gamma(2.0, 0.04),
            p: Marginal::uniform(0.0, 1.0),
            alpha: Marginal::gamma(2.0, 0.25),
            beta: Marginal::gamma(2.0, 0.25),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in self.named() {
            m.validate(name)?;
        }
        let (lo, hi) = self.p.support();
        if lo < 0.0 || hi > 1.0 {
            return Err(Error::arg("prior on p must lie within [0, 1]"));
        }
        for (name, m) in [("theta", self.theta), ("alpha", self.alpha), ("beta", self.beta)] {
            if m.support().0 < 0.0 {
                return Err(Error::arg(format!("prior on {name} must have positive support")));
            }
        }
        Ok(())
    }

    pub fn marginals(&self) -> [Marginal; 4] {
        [self.theta, self.p, self.alpha, self.beta]
    }

    fn named(&self) -> [(&'static str, Marginal); 4] {
        [
            ("theta", self.theta),
            ("p", self.p),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ]
    }

    pub fn contains(&self, eta: &ParamVector) -> bool {
        self.marginals()
            .iter()
            .zip(eta.to_array())
            .all(|(m, x)| m.contains(x))
    }

    pub fn ln_density(&self, eta: &ParamVector) -> f64 {
        self.marginals()
            .iter()
            .zip(eta.to_array())
            .map(|(m, x)| m.ln_density(x))
            .sum()
    }

    /// True when every coordinate is uniform, so prior ratios are 1 inside
    /// the support.
    pub fn is_flat(&self) -> bool {
        self.marginals()
            .iter()
            .all(|m| matches!(m, Marginal::Uniform { .. }))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let v = self.marginals().map(|m| m.sample(rng));
        ParamVector::from_array(v).expect("prior support lies inside the parameter space")
    }
}
