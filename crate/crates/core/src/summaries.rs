//! ABC summary statistics, distances and data-driven thresholds.
//!
//! Three summaries describe a curve series: the mean jump count, the
//! pointwise mean curve and the mean L2 distance between consecutive
//! curves. A candidate series is accepted when each summary is within its
//! threshold of the observed one. Thresholds can be calibrated as fractions
//! of the mean jump count, of the L2 width of the pointwise envelope and of
//! the mean consecutive distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stepcurve::{grid_l2, grid_point, CurveSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub mean_jump_count: f64,
    pub pointwise_mean_grid: Vec<f64>,
    pub mean_consecutive_l2: f64,
    pub envelope_l2: f64,
}

impl SeriesSummary {
    pub fn grid_size(&self) -> usize {
        self.pointwise_mean_grid.len()
    }
}

/// Streaming computation of a [`SeriesSummary`], one grid evaluation per
/// time step.
#[derive(Debug, Clone)]
pub struct SummaryBuilder {
    count: usize,
    jump_total: f64,
    sum: Vec<f64>,
    max: Vec<f64>,
    min: Vec<f64>,
    prev: Vec<f64>,
    scratch: Vec<f64>,
    consecutive_total: f64,
}

impl SummaryBuilder {
    pub fn new(grid_size: usize) -> Self {
        SummaryBuilder {
            count: 0,
            jump_total: 0.0,
            sum: vec![0.0; grid_size],
            max: vec![f64::NEG_INFINITY; grid_size],
            min: vec![f64::INFINITY; grid_size],
            prev: vec![0.0; grid_size],
            scratch: vec![0.0; grid_size],
            consecutive_total: 0.0,
        }
    }

    pub fn grid_size(&self) -> usize {
        self.sum.len()
    }

    pub fn push(&mut self, jump_count: usize, grid: &[f64]) {
        assert_eq!(grid.len(), self.sum.len(), "grid size mismatch");
        if self.count > 0 {
            self.consecutive_total += grid_l2(&self.prev, grid);
        }
        for (k, &v) in grid.iter().enumerate() {
            self.sum[k] += v;
            self.max[k] = self.max[k].max(v);
            self.min[k] = self.min[k].min(v);
        }
        self.prev.copy_from_slice(grid);
        self.jump_total += jump_count as f64;
        self.count += 1;
    }

    /// Pushes the empirical cdf of a sorted, non-empty particle vector
    /// without building the curve.
    pub fn push_sorted_particles(&mut self, sorted: &[f64], domain: (f64, f64)) {
        let n = sorted.len() as f64;
        let mut grid = std::mem::take(&mut self.scratch);
        let g = grid.len();
        let mut idx = 0;
        for (k, slot) in grid.iter_mut().enumerate() {
            let x = grid_point(domain.0, domain.1, k, g);
            while idx < sorted.len() && sorted[idx] <= x {
                idx += 1;
            }
            *slot = idx as f64 / n;
        }
        let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
        self.push(distinct, &grid);
        self.scratch = grid;
    }

    pub fn finish(self) -> Result<SeriesSummary> {
        if self.count < 2 {
            return Err(Error::arg("summaries need a series of at least two curves"));
        }
        let t = self.count as f64;
        Ok(SeriesSummary {
            mean_jump_count: self.jump_total / t,
            pointwise_mean_grid: self.sum.iter().map(|s| s / t).collect(),
            mean_consecutive_l2: self.consecutive_total / (t - 1.0),
            envelope_l2: grid_l2(&self.max, &self.min),
        })
    }
}

/// Summaries of an observed series on a `grid_size` grid.
pub fn summarize(series: &CurveSeries, grid_size: usize) -> Result<SeriesSummary> {
    if series.len() < 2 {
        return Err(Error::arg("summaries need a series of at least two curves"));
    }
    let mut builder = SummaryBuilder::new(grid_size);
    for c in series.curves() {
        let grid = c.to_grid(grid_size)?;
        builder.push(c.jump_count(), &grid);
    }
    builder.finish()
}

/// Acceptance thresholds `(eps1, eps2, eps3)`, with the fractions they were
/// calibrated from when applicable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub eps: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractions: Option<[f64; 3]>,
}

impl Thresholds {
    pub fn new(eps: [f64; 3]) -> Result<Self> {
        if eps.iter().any(|e| e.is_nan() || *e < 0.0) {
            return Err(Error::arg(format!("thresholds must be non-negative, got {eps:?}")));
        }
        Ok(Thresholds {
            eps,
            fractions: None,
        })
    }

    /// Thresholds that accept everything.
    pub fn unbounded() -> Self {
        Thresholds {
            eps: [f64::INFINITY; 3],
            fractions: None,
        }
    }
}

/// `eps1 = c1 * mean jump count`, `eps2 = c2 * envelope width`,
/// `eps3 = c3 * mean consecutive distance`.
pub fn calibrate_thresholds(data: &SeriesSummary, fractions: [f64; 3]) -> Result<Thresholds> {
    if fractions.iter().any(|c| c.is_nan() || *c < 0.0) {
        return Err(Error::arg(format!(
            "threshold fractions must be non-negative, got {fractions:?}"
        )));
    }
    Ok(Thresholds {
        eps: [
            fractions[0] * data.mean_jump_count,
            fractions[1] * data.envelope_l2,
            fractions[2] * data.mean_consecutive_l2,
        ],
        fractions: Some(fractions),
    })
}

/// The three summary distances between a candidate and the data.
pub fn distances(candidate: &SeriesSummary, data: &SeriesSummary) -> [f64; 3] {
    [
        (candidate.mean_jump_count - data.mean_jump_count).abs(),
        grid_l2(&candidate.pointwise_mean_grid, &data.pointwise_mean_grid),
        (candidate.mean_consecutive_l2 - data.mean_consecutive_l2).abs(),
    ]
}

/// Per-criterion outcome of the distance gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOutcome {
    pub distances: [f64; 3],
    pub passed: [bool; 3],
}

impl GateOutcome {
    pub fn from_distances(distances: [f64; 3], thresholds: &Thresholds) -> Self {
        let passed = [0, 1, 2].map(|j| distances[j] <= thresholds.eps[j]);
        GateOutcome { distances, passed }
    }

    pub fn accepted(&self) -> bool {
        self.passed.iter().all(|&p| p)
    }

    /// Index of the first failing gate.
    pub fn first_failure(&self) -> Option<usize> {
        self.passed.iter().position(|&p| !p)
    }
}

pub fn accept(candidate: &SeriesSummary, data: &SeriesSummary, thresholds: &Thresholds) -> GateOutcome {
    assert_eq!(
        candidate.grid_size(),
        data.grid_size(),
        "summaries computed on different grids"
    );
    GateOutcome::from_distances(distances(candidate, data), thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepcurve::StepCurve;
    use proptest::prelude::*;

    const UNIT: (f64, f64) = (0.0, 1.0);

    fn flat(level: f64) -> StepCurve {
        StepCurve::flat(UNIT, level).unwrap()
    }

    #[test]
    fn constant_series() {
        let c = StepCurve::new(UNIT, vec![0.3, 0.8], vec![0.4, 1.0], 0.0).unwrap();
        let s = CurveSeries::new(vec![c.clone(); 5]).unwrap();
        let sum = summarize(&s, 100).unwrap();
        assert_eq!(sum.mean_consecutive_l2, 0.0);
        assert_eq!(sum.envelope_l2, 0.0);
        assert_eq!(sum.mean_jump_count, 2.0);
        assert_eq!(sum.pointwise_mean_grid, c.to_grid(100).unwrap());
    }

    #[test]
    fn zero_and_one() {
        // Flat curves modelled as single jumps at the domain edge.
        let zero = StepCurve::new(UNIT, vec![1.0], vec![1.0], 0.0).unwrap();
        let one = StepCurve::new(UNIT, vec![0.0], vec![1.0], 0.0).unwrap();
        let sum = summarize(&CurveSeries::new(vec![zero, one]).unwrap(), 500).unwrap();
        assert_eq!(sum.mean_jump_count, 1.0);
        let expect = (499.0f64 / 500.0).sqrt();
        assert!((sum.mean_consecutive_l2 - expect).abs() < 1e-15);
        assert!((sum.envelope_l2 - expect).abs() < 1e-15);

        let sum = summarize(&CurveSeries::new(vec![flat(0.0), flat(1.0)]).unwrap(), 50).unwrap();
        assert_eq!(sum.mean_jump_count, 0.0);
        assert_eq!(sum.mean_consecutive_l2, 1.0);
        assert_eq!(sum.envelope_l2, 1.0);
    }

    #[test]
    fn single_curve_rejected() {
        let s = CurveSeries::new(vec![flat(0.2)]).unwrap();
        assert!(summarize(&s, 10).is_err());
    }

    #[test]
    fn streaming_particles_match_curves() {
        let ps = [0.1, 0.1, 0.35, 0.9, 1.0];
        let mut sorted = ps.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut b = SummaryBuilder::new(64);
        b.push_sorted_particles(&sorted, UNIT);
        b.push_sorted_particles(&[0.5, 0.5, 0.5, 0.5, 0.5], UNIT);
        let streamed = b.finish().unwrap();
        let s = CurveSeries::new(vec![
            StepCurve::from_particles(&ps, UNIT).unwrap(),
            StepCurve::from_particles(&[0.5; 5], UNIT).unwrap(),
        ])
        .unwrap();
        assert_eq!(streamed, summarize(&s, 64).unwrap());
    }

    #[test]
    fn calibration_products() {
        let sum = SeriesSummary {
            mean_jump_count: 40.0,
            pointwise_mean_grid: vec![0.0, 1.0],
            mean_consecutive_l2: 0.02,
            envelope_l2: 0.3,
        };
        let t = calibrate_thresholds(&sum, [0.35, 0.5, 0.02]).unwrap();
        assert_eq!(t.eps, [0.35 * 40.0, 0.5 * 0.3, 0.02 * 0.02]);
        assert_eq!(calibrate_thresholds(&sum, [0.0; 3]).unwrap().eps, [0.0; 3]);
        assert!(calibrate_thresholds(&sum, [1.5, 2.0, 3.0]).is_ok());
        assert!(calibrate_thresholds(&sum, [-0.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn gates() {
        let a = SeriesSummary {
            mean_jump_count: 10.0,
            pointwise_mean_grid: vec![0.2, 0.6, 1.0],
            mean_consecutive_l2: 0.05,
            envelope_l2: 0.3,
        };
        assert!(accept(&a, &a, &Thresholds::new([0.0; 3]).unwrap()).accepted());
        let mut b = a.clone();
        b.mean_consecutive_l2 = 0.06;
        let out = accept(&b, &a, &Thresholds::new([0.0; 3]).unwrap());
        assert!(!out.accepted());
        assert_eq!(out.passed, [true, true, false]);
        assert_eq!(out.first_failure(), Some(2));
    }

    fn arb_series() -> impl Strategy<Value = CurveSeries> {
        prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 1..12), 2..8).prop_map(|sets| {
            CurveSeries::new(
                sets.iter()
                    .map(|ps| StepCurve::from_particles(ps, UNIT).unwrap())
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn self_acceptance_and_monotone_thresholds(
            s in arb_series(), other in arb_series(),
            eps in prop::array::uniform3(0.0f64..0.5), extra in prop::array::uniform3(0.0f64..0.5),
        ) {
            let a = summarize(&s, 40).unwrap();
            let b = summarize(&other, 40).unwrap();
            let t = Thresholds::new(eps).unwrap();
            prop_assert!(accept(&a, &a, &t).accepted());
            let wider = Thresholds::new([eps[0] + extra[0], eps[1] + extra[1], eps[2] + extra[2]]).unwrap();
            if accept(&b, &a, &t).accepted() {
                prop_assert!(accept(&b, &a, &wider).accepted());
            }
            let out = accept(&b, &a, &t);
            let out_w = accept(&b, &a, &wider);
            for j in 0..3 {
                prop_assert!(!out.passed[j] || out_w.passed[j]);
            }
        }

        #[test]
        fn time_permutation(s in arb_series()) {
            let a = summarize(&s, 40).unwrap();
            let mut rev = s.curves().to_vec();
            rev.reverse();
            let r = summarize(&CurveSeries::new(rev).unwrap(), 40).unwrap();
            prop_assert!((a.mean_jump_count - r.mean_jump_count).abs() < 1e-12);
            for (x, y) in a.pointwise_mean_grid.iter().zip(&r.pointwise_mean_grid) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((a.envelope_l2 - r.envelope_l2).abs() < 1e-12);
            // Reversal keeps the set of consecutive pairs.
            prop_assert!((a.mean_consecutive_l2 - r.mean_consecutive_l2).abs() < 1e-12);
        }
    }

    #[test]
    fn consecutive_distance_depends_on_order() {
        let curves = vec![flat(0.0), flat(1.0), flat(0.0), flat(1.0)];
        let sorted = vec![flat(0.0), flat(0.0), flat(1.0), flat(1.0)];
        let a = summarize(&CurveSeries::new(curves).unwrap(), 20).unwrap();
        let b = summarize(&CurveSeries::new(sorted).unwrap(), 20).unwrap();
        assert_eq!(a.mean_jump_count, b.mean_jump_count);
        assert_eq!(a.pointwise_mean_grid, b.pointwise_mean_grid);
        assert_eq!(a.mean_consecutive_l2, 1.0);
        assert!((b.mean_consecutive_l2 - 1.0 / 3.0).abs() < 1e-15);
    }
}
