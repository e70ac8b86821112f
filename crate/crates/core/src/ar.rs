//! Zero-mean Gaussian AR(1) fitted by Gibbs sampling.
//!
//! `x_t = rho x_{t-1} + e_t`, `e_t ~ N(0, sigma^2)`, with a normal prior on
//! `rho` and an inverse-gamma prior on `sigma^2`. Both full conditionals are
//! conjugate and depend on the data only through three sums, so each sweep
//! costs O(1) after a single pass over the series.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

/// Stationarising transform of a level series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// `log s_{t+1} - log s_t`; inverts to strictly positive levels.
    LogDiff,
    /// `s_{t+1} - s_t`.
    Diff,
}

pub fn transform(series: &[f64], mode: Transform) -> Result<Vec<f64>> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("series contains non-finite values"));
    }
    match mode {
        Transform::LogDiff => {
            if let Some(v) = series.iter().find(|v| **v <= 0.0) {
                return Err(Error::arg(format!("log differences need positive values, got {v}")));
            }
            Ok(series.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
        }
        Transform::Diff => Ok(series.windows(2).map(|w| w[1] - w[0]).collect()),
    }
}

/// Levels following `last_level` given future increments.
pub fn invert(last_level: f64, increments: &[f64], mode: Transform) -> Vec<f64> {
    match mode {
        Transform::LogDiff => {
            let mut log = last_level.ln();
            increments
                .iter()
                .map(|r| {
                    log += r;
                    log.exp()
                })
                .collect()
        }
        Transform::Diff => {
            let mut level = last_level;
            increments
                .iter()
                .map(|d| {
                    level += d;
                    level
                })
                .collect()
        }
    }
}

/// Spread of the normal prior on the coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalScale {
    Variance(f64),
    Precision(f64),
}

impl NormalScale {
    pub fn precision(self) -> f64 {
        match self {
            NormalScale::Variance(v) => 1.0 / v,
            NormalScale::Precision(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ARModelSpec {
    #[serde(default = "default_coef_prior")]
    pub coef_prior: NormalScale,
    #[serde(default = "default_ig")]
    pub var_shape: f64,
    #[serde(default = "default_ig")]
    pub var_scale: f64,
    #[serde(default = "default_chain")]
    pub chain_length: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
}

fn default_coef_prior() -> NormalScale {
    NormalScale::Variance(1000.0)
}

fn default_ig() -> f64 {
    0.01
}

fn default_chain() -> usize {
    11_000
}

fn default_burn_in() -> usize {
    1000
}

impl ARModelSpec {
    /// N(0, variance 1000) and IG(0.01, 0.01) priors, 11000 sweeps of which
    /// the first 1000 are discarded.
    pub fn with_seed(seed: u64) -> Self {
        ARModelSpec {
            coef_prior: default_coef_prior(),
            var_shape: default_ig(),
            var_scale: default_ig(),
            chain_length: default_chain(),
            burn_in: default_burn_in(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prec = self.coef_prior.precision();
        if !(prec.is_finite() && prec > 0.0) {
            return Err(Error::arg("coefficient prior spread must be positive and finite"));
        }
        if !(self.var_shape > 0.0 && self.var_scale > 0.0) {
            return Err(Error::arg("inverse-gamma parameters must be positive"));
        }
        if self.chain_length == 0 || self.burn_in >= self.chain_length {
            return Err(Error::arg("burn-in must be shorter than the chain"));
        }
        Ok(())
    }
}

/// Sufficient statistics of the lag-one regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagSums {
    /// `sum x_{t-1}^2`
    pub xx: f64,
    /// `sum x_{t-1} x_t`
    pub xy: f64,
    /// `sum x_t^2`
    pub yy: f64,
    /// Number of lag pairs.
    pub pairs: usize,
}

impl LagSums {
    pub fn new(x: &[f64]) -> Self {
        let mut s = LagSums {
            xx: 0.0,
            xy: 0.0,
            yy: 0.0,
            pairs: x.len().saturating_sub(1),
        };
        for w in x.windows(2) {
            s.xx += w[0] * w[0];
            s.xy += w[0] * w[1];
            s.yy += w[1] * w[1];
        }
        s
    }

    pub fn ssr(&self, rho: f64) -> f64 {
        (self.yy - 2.0 * rho * self.xy + rho * rho * self.xx).max(0.0)
    }
}

/// Mean and variance of `rho` given `sigma2`.
pub fn coef_conditional(sums: &LagSums, sigma2: f64, prior_precision: f64) -> (f64, f64) {
    let precision = prior_precision + sums.xx / sigma2;
    ((sums.xy / sigma2) / precision, 1.0 / precision)
}

/// Shape and scale of `sigma2` given `rho`.
pub fn var_conditional(sums: &LagSums, rho: f64, shape0: f64, scale0: f64) -> (f64, f64) {
    (shape0 + sums.pairs as f64 / 2.0, scale0 + sums.ssr(rho) / 2.0)
}

/// Inverse-gamma draw as `scale / Gamma(shape, 1)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
    scale / g.max(f64::MIN_POSITIVE)
}

/// Posterior draws after burn-in, plus what is needed to forecast levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ARFit {
    pub coef: Vec<f64>,
    pub var: Vec<f64>,
    pub transform: Option<Transform>,
    /// Last value of the fitted (transformed) series.
    pub last_value: f64,
    /// Last untransformed level, when a transform was applied.
    pub last_level: Option<f64>,
}

impl ARFit {
    pub fn coef_mean(&self) -> f64 {
        self.coef.iter().sum::<f64>() / self.coef.len() as f64
    }

    /// Equal-tailed interval from the empirical quantiles of `rho`.
    pub fn coef_interval(&self, level: f64) -> (f64, f64) {
        let mut v = self.coef.clone();
        v.sort_unstable_by(f64::total_cmp);
        let q = |p: f64| {
            let rank = (p * v.len() as f64).ceil() as usize;
            v[rank.clamp(1, v.len()) - 1]
        };
        (q((1.0 - level) / 2.0), q((1.0 + level) / 2.0))
    }
}

/// Gibbs sampler on an already stationary series.
pub fn gibbs_fit(x: &[f64], spec: &ARModelSpec) -> Result<ARFit> {
    spec.validate()?;
    if x.len() < 3 {
        return Err(Error::arg("AR(1) fit needs at least three observations"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("series contains non-finite values"));
    }
    let sums = LagSums::new(x);
    let prior_prec = spec.coef_prior.precision();
    let mut rng = substream(spec.seed, 0);
    let mean_sq = sums.yy / sums.pairs as f64;
    let mut sigma2 = if mean_sq > 0.0 { mean_sq } else { 1.0 };
    let keep = spec.chain_length - spec.burn_in;
    let mut coef = Vec::with_capacity(keep);
    let mut var = Vec::with_capacity(keep);
    for it in 0..spec.chain_length {
        let (m, v) = coef_conditional(&sums, sigma2, prior_prec);
        let z: f64 = StandardNormal.sample(&mut rng);
        let rho = m + v.sqrt() * z;
        let (a, b) = var_conditional(&sums, rho, spec.var_shape, spec.var_scale);
        sigma2 = sample_inverse_gamma(a, b, &mut rng);
        if it >= spec.burn_in {
            coef.push(rho);
            var.push(sigma2);
        }
    }
    Ok(ARFit {
        coef,
        var,
        transform: None,
        last_value: x[x.len() - 1],
        last_level: None,
    })
}

/// Transforms a level series and fits it.
pub fn fit_levels(levels: &[f64], mode: Transform, spec: &ARModelSpec) -> Result<ARFit> {
    let x = transform(levels, mode)?;
    let mut fit = gibbs_fit(&x, spec)?;
    fit.transform = Some(mode);
    fit.last_level = levels.last().copied();
    Ok(fit)
}

/// `n_draws` simulated paths of length `h`, on the level scale when the
/// fit carries a transform.
pub fn forecast_levels<R: Rng + ?Sized>(fit: &ARFit, h: usize, n_draws: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if fit.coef.is_empty() || fit.coef.len() != fit.var.len() {
        return Err(Error::arg("fit has no posterior draws"));
    }
    let mut out = Vec::with_capacity(n_draws);
    let mut path = vec![0.0; h];
    for _ in 0..n_draws {
        let j = rng.random_range(0..fit.coef.len());
        let (rho, sd) = (fit.coef[j], fit.var[j].sqrt());
        let mut prev = fit.last_value;
        for slot in path.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            prev = rho * prev + sd * z;
            *slot = prev;
        }
        out.push(match (fit.transform, fit.last_level) {
            (Some(mode), Some(level)) => invert(level, &path, mode),
            _ => path.clone(),
        });
    }
    Ok(out)
}

/// Monte Carlo predictive mean at each step `1..=h`.
pub fn forecast_mean<R: Rng + ?Sized>(fit: &ARFit, h: usize, n_draws: usize, rng: &mut R) -> Result<Vec<f64>> {
    let paths = forecast_levels(fit, h, n_draws, rng)?;
    let mut mean = vec![0.0; h];
    for p in &paths {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= paths.len() as f64);
    Ok(mean)
}

/// Simulates `len` values of a stationary AR(1) started from its stationary
/// law (`|rho| < 1`).
pub fn simulate_ar1<R: Rng + ?Sized>(rho: f64, sigma: f64, len: usize, rng: &mut R) -> Vec<f64> {
    let sd0 = sigma / (1.0 - rho * rho).sqrt();
    let mut x = Vec::with_capacity(len);
    let z: f64 = StandardNormal.sample(rng);
    let mut prev = sd0 * z;
    for _ in 0..len {
        x.push(prev);
        let z: f64 = StandardNormal.sample(rng);
        prev = rho * prev + sigma * z;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transforms() {
        assert_eq!(transform(&[3.0, 3.0, 3.0], Transform::LogDiff).unwrap(), vec![0.0, 0.0]);
        let r = transform(&[1.0, 2.0, 4.0, 8.0], Transform::LogDiff).unwrap();
        assert!(r.iter().all(|v| (v - 2f64.ln()).abs() < 1e-15));
        assert_eq!(transform(&[1.0, 2.0, 4.0], Transform::Diff).unwrap(), vec![1.0, 2.0]);
        assert!(transform(&[1.0, 0.0], Transform::LogDiff).is_err());
    }

    #[test]
    fn inversion_round_trip() {
        let s = [2.0, 3.5, 1.25, 7.0];
        for mode in [Transform::LogDiff, Transform::Diff] {
            let back = invert(s[0], &transform(&s, mode).unwrap(), mode);
            for (a, b) in back.iter().zip(&s[1..]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conditional_matches_product_of_gaussians() {
        let x = [0.3, -0.1, 0.4, 0.2, -0.5, 0.05];
        let sums = LagSums::new(&x);
        let sigma2 = 0.04;
        let tau2 = 1000.0;
        // Likelihood in rho is N(xy/xx, sigma2/xx); combine with N(0, tau2).
        let (lm, lv) = (sums.xy / sums.xx, sigma2 / sums.xx);
        let v = 1.0 / (1.0 / lv + 1.0 / tau2);
        let m = v * lm / lv;
        let (cm, cv) = coef_conditional(&sums, sigma2, 1.0 / tau2);
        assert!(((cm - m) / m).abs() < 1e-12);
        assert!(((cv - v) / v).abs() < 1e-12);
    }

    #[test]
    fn zero_data_returns_prior() {
        let fit = gibbs_fit(&[0.0, 0.0, 0.0], &ARModelSpec::with_seed(1)).unwrap();
        let sd = (fit.coef.iter().map(|c| c * c).sum::<f64>() / fit.coef.len() as f64).sqrt();
        // Prior sd is sqrt(1000) ~ 31.6.
        assert!((sd - 1000f64.sqrt()).abs() < 2.0, "{sd}");
    }

    #[test]
    fn degenerate_fit_forecasts_flat() {
        let fit = ARFit {
            coef: vec![0.0],
            var: vec![0.0],
            transform: Some(Transform::LogDiff),
            last_value: 0.3,
            last_level: Some(5.0),
        };
        let mut rng = substream(1, 0);
        for p in forecast_levels(&fit, 4, 10, &mut rng).unwrap() {
            assert!(p.iter().all(|v| (v - 5.0).abs() < 1e-12), "{p:?}");
        }
    }

    #[test]
    fn exact_data_concentrates() {
        let exact: Vec<f64> = (0..60).map(|t| 0.9f64.powi(t)).collect();
        let fit = gibbs_fit(&exact, &ARModelSpec::with_seed(2)).unwrap();
        assert!((fit.coef_mean() - 0.9).abs() < 1e-3, "{}", fit.coef_mean());
    }

    #[test]
    fn recovers_coefficient() {
        let mut rng = substream(8, 0);
        let x = simulate_ar1(0.5, 0.1, 500, &mut rng);
        let fit = gibbs_fit(&x, &ARModelSpec::with_seed(3)).unwrap();
        assert_eq!(fit.coef.len(), 10_000);
        assert!((fit.coef_mean() - 0.5).abs() < 0.1);
        let (lo, hi) = fit.coef_interval(0.95);
        assert!(lo < 0.5 && 0.5 < hi);
        let s2 = fit.var.iter().sum::<f64>() / fit.var.len() as f64;
        assert!((s2.sqrt() - 0.1).abs() < 0.01);
    }

    #[test]
    fn log_forecasts_positive() {
        let mut rng = substream(5, 0);
        let levels: Vec<f64> = invert(1e6, &simulate_ar1(0.3, 0.2, 100, &mut rng), Transform::LogDiff);
        let fit = fit_levels(&levels, Transform::LogDiff, &ARModelSpec::with_seed(6)).unwrap();
        let paths = forecast_levels(&fit, 8, 100_000 / 8, &mut rng).unwrap();
        assert!(paths.iter().flatten().all(|v| *v > 0.0));
    }
}
