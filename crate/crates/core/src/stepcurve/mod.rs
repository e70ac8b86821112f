//! Right-continuous, non-decreasing step functions with values in `[0, 1]`.
//!
//! A [`StepCurve`] is the observable data type of the model: an empirical
//! cdf of latent particles, or a normalised market curve. All distances are
//! discrete root-mean-square distances over an equally spaced grid that
//! includes both domain endpoints.

pub mod auction;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid length used for every curve distance unless configured otherwise.
pub const DEFAULT_GRID_SIZE: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepCurve", into = "RawStepCurve")]
pub struct StepCurve {
    lo: f64,
    hi: f64,
    jumps: Vec<f64>,
    levels: Vec<f64>,
    base_level: f64,
}

#[derive(Serialize, Deserialize)]
struct RawStepCurve {
    domain: [f64; 2],
    jumps: Vec<f64>,
    levels: Vec<f64>,
    base_level: f64,
}

impl TryFrom<RawStepCurve> for StepCurve {
    type Error = Error;

    fn try_from(raw: RawStepCurve) -> Result<Self> {
        StepCurve::new(
            (raw.domain[0], raw.domain[1]),
            raw.jumps,
            raw.levels,
            raw.base_level,
        )
    }
}

impl From<StepCurve> for RawStepCurve {
    fn from(c: StepCurve) -> Self {
        RawStepCurve {
            domain: [c.lo, c.hi],
            jumps: c.jumps,
            levels: c.levels,
            base_level: c.base_level,
        }
    }
}

fn check_domain(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::arg(format!("invalid domain [{lo}, {hi}]")));
    }
    Ok(())
}

fn check_level(level: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::arg(format!("level {level} outside [0, 1]")));
    }
    Ok(())
}

impl StepCurve {
    /// Builds a curve from jump locations and the level reached at each jump.
    ///
    /// Locations must be non-decreasing; repeated locations are merged and
    /// keep the last level. Breakpoints that leave the level unchanged are
    /// dropped, so every stored jump has positive size.
    pub fn new(
        domain: (f64, f64),
        jumps: Vec<f64>,
        levels: Vec<f64>,
        base_level: f64,
    ) -> Result<Self> {
        let (lo, hi) = domain;
        check_domain(lo, hi)?;
        check_level(base_level)?;
        if jumps.len() != levels.len() {
            return Err(Error::arg(format!(
                "{} jump locations but {} levels",
                jumps.len(),
                levels.len()
            )));
        }

        let mut out_jumps: Vec<f64> = Vec::with_capacity(jumps.len());
        let mut out_levels: Vec<f64> = Vec::with_capacity(levels.len());
        let mut prev_x = f64::NEG_INFINITY;
        let mut prev_level = base_level;
        for (&x, &level) in jumps.iter().zip(&levels) {
            if !(lo..=hi).contains(&x) {
                return Err(Error::Domain { value: x, lo, hi });
            }
            check_level(level)?;
            if x < prev_x {
                return Err(Error::arg("jump locations must be non-decreasing"));
            }
            if level < prev_level {
                return Err(Error::arg("levels must be non-decreasing"));
            }
            if out_jumps.last() == Some(&x) {
                out_levels.pop();
                out_jumps.pop();
            }
            let before = out_levels.last().copied().unwrap_or(base_level);
            if level > before {
                out_jumps.push(x);
                out_levels.push(level);
            }
            prev_x = x;
            prev_level = level;
        }

        Ok(StepCurve {
            lo,
            hi,
            jumps: out_jumps,
            levels: out_levels,
            base_level,
        })
    }

    /// Curve that stays at `level` over the whole domain.
    pub fn flat(domain: (f64, f64), level: f64) -> Result<Self> {
        Self::new(domain, Vec::new(), Vec::new(), level)
    }

    /// Empirical cdf `F(x) = #{i : X_i <= x} / n` of a particle vector.
    pub fn from_particles(particles: &[f64], domain: (f64, f64)) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::arg("empirical cdf of an empty particle vector"));
        }
        let (lo, hi) = domain;
        check_domain(lo, hi)?;
        if let Some(&bad) = particles.iter().find(|x| !(lo..=hi).contains(*x)) {
            return Err(Error::Domain { value: bad, lo, hi });
        }
        let mut sorted = particles.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(Self::from_sorted_particles(&sorted, domain))
    }

    /// Same as [`StepCurve::from_particles`] for an already sorted, in-domain,
    /// non-empty slice.
    pub(crate) fn from_sorted_particles(sorted: &[f64], domain: (f64, f64)) -> Self {
        let n = sorted.len() as f64;
        let mut jumps = Vec::new();
        let mut levels = Vec::new();
        for (i, &x) in sorted.iter().enumerate() {
            if sorted.get(i + 1) != Some(&x) {
                jumps.push(x);
                levels.push((i + 1) as f64 / n);
            }
        }
        StepCurve {
            lo: domain.0,
            hi: domain.1,
            jumps,
            levels,
            base_level: 0.0,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn base_level(&self) -> f64 {
        self.base_level
    }

    /// Number of jumps `K`.
    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    /// Level reached at the right end of the domain.
    pub fn top_level(&self) -> f64 {
        self.levels.last().copied().unwrap_or(self.base_level)
    }

    /// Sizes of the successive jumps.
    pub fn jump_sizes(&self) -> impl Iterator<Item = f64> + '_ {
        let befores = std::iter::once(self.base_level).chain(self.levels.iter().copied());
        self.levels.iter().zip(befores).map(|(after, before)| after - before)
    }

    pub fn min_jump_size(&self) -> Option<f64> {
        self.jump_sizes().min_by(f64::total_cmp)
    }

    /// Right-continuous evaluation.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(self.lo..=self.hi).contains(&x) {
            return Err(Error::Domain {
                value: x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(self.value_at(x))
    }

    fn value_at(&self, x: f64) -> f64 {
        let idx = self.jumps.partition_point(|&j| j <= x);
        if idx == 0 {
            self.base_level
        } else {
            self.levels[idx - 1]
        }
    }

    /// Values at `grid_size` equally spaced points spanning the domain,
    /// endpoints included.
    pub fn to_grid(&self, grid_size: usize) -> Result<Vec<f64>> {
        check_grid(grid_size)?;
        let mut out = vec![0.0; grid_size];
        self.fill_grid(&mut out);
        Ok(out)
    }

    /// Writes the grid evaluation into `out`; its length sets the grid size.
    pub(crate) fn fill_grid(&self, out: &mut [f64]) {
        let mut idx = 0;
        let mut level = self.base_level;
        let size = out.len();
        for (k, slot) in out.iter_mut().enumerate() {
            let x = grid_point(self.lo, self.hi, k, size);
            while idx < self.jumps.len() && self.jumps[idx] <= x {
                level = self.levels[idx];
                idx += 1;
            }
            *slot = level;
        }
    }

    /// Discrete L2 distance over a grid of `grid_size` points.
    pub fn l2_distance(&self, other: &StepCurve, grid_size: usize) -> Result<f64> {
        self.check_same_domain(other)?;
        let a = self.to_grid(grid_size)?;
        let b = other.to_grid(grid_size)?;
        Ok(grid_l2(&a, &b))
    }

    pub(crate) fn check_same_domain(&self, other: &StepCurve) -> Result<()> {
        if self.domain() != other.domain() {
            return Err(Error::arg(format!(
                "domain mismatch: {:?} vs {:?}",
                self.domain(),
                other.domain()
            )));
        }
        Ok(())
    }

    /// Pointwise `weight * self + (1 - weight) * other`.
    pub fn convex_combination(&self, other: &StepCurve, weight: f64) -> Result<StepCurve> {
        self.check_same_domain(other)?;
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::arg(format!("mixing weight {weight} outside [0, 1]")));
        }
        let mix = |a: f64, b: f64| (weight * a + (1.0 - weight) * b).min(1.0);
        let mut jumps = Vec::with_capacity(self.jumps.len() + other.jumps.len());
        let mut levels = Vec::with_capacity(jumps.capacity());
        let (mut i, mut j) = (0, 0);
        let (mut la, mut lb) = (self.base_level, other.base_level);
        while i < self.jumps.len() || j < other.jumps.len() {
            let xa = self.jumps.get(i).copied().unwrap_or(f64::INFINITY);
            let xb = other.jumps.get(j).copied().unwrap_or(f64::INFINITY);
            let x = xa.min(xb);
            if xa == x {
                la = self.levels[i];
                i += 1;
            }
            if xb == x {
                lb = other.levels[j];
                j += 1;
            }
            jumps.push(x);
            levels.push(mix(la, lb));
        }
        StepCurve::new(
            self.domain(),
            jumps,
            levels,
            mix(self.base_level, other.base_level),
        )
    }

    /// Moves the curve onto a new domain through the increasing affine map
    /// sending `lo` to `new_lo` and `hi` to `new_hi`.
    pub fn rescale_domain(&self, new_lo: f64, new_hi: f64) -> Result<StepCurve> {
        check_domain(new_lo, new_hi)?;
        let scale = (new_hi - new_lo) / (self.hi - self.lo);
        let jumps = self
            .jumps
            .iter()
            .map(|&x| (new_lo + (x - self.lo) * scale).clamp(new_lo, new_hi))
            .collect();
        StepCurve::new(
            (new_lo, new_hi),
            jumps,
            self.levels.clone(),
            self.base_level,
        )
    }
}

fn check_grid(grid_size: usize) -> Result<()> {
    if grid_size < 2 {
        return Err(Error::arg(format!("grid size {grid_size} below 2")));
    }
    Ok(())
}

/// `k`-th of `size` equally spaced points on `[lo, hi]`.
#[inline]
pub fn grid_point(lo: f64, hi: f64, k: usize, size: usize) -> f64 {
    if k + 1 == size {
        hi
    } else {
        lo + (hi - lo) * (k as f64 / (size - 1) as f64)
    }
}

/// Root-mean-square difference of two grid evaluations.
pub fn grid_l2(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

/// Time-ordered curves sharing one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<StepCurve>", into = "Vec<StepCurve>")]
pub struct CurveSeries {
    curves: Vec<StepCurve>,
}

impl TryFrom<Vec<StepCurve>> for CurveSeries {
    type Error = Error;

    fn try_from(curves: Vec<StepCurve>) -> Result<Self> {
        CurveSeries::new(curves)
    }
}

impl From<CurveSeries> for Vec<StepCurve> {
    fn from(s: CurveSeries) -> Self {
        s.curves
    }
}

impl CurveSeries {
    pub fn new(curves: Vec<StepCurve>) -> Result<Self> {
        let first = curves
            .first()
            .ok_or_else(|| Error::arg("a curve series needs at least one curve"))?;
        for c in &curves[1..] {
            first.check_same_domain(c)?;
        }
        Ok(CurveSeries { curves })
    }

    pub fn curves(&self) -> &[StepCurve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.curves[0].domain()
    }

    pub fn last(&self) -> &StepCurve {
        self.curves.last().expect("series is non-empty")
    }

    /// Index of the last curve, i.e. the horizon `T` of a series `F_0..F_T`.
    pub fn horizon(&self) -> usize {
        self.curves.len() - 1
    }

    /// First `len` curves.
    pub fn prefix(&self, len: usize) -> Result<CurveSeries> {
        if len == 0 || len > self.len() {
            return Err(Error::arg(format!(
                "prefix length {len} not in 1..={}",
                self.len()
            )));
        }
        Ok(CurveSeries {
            curves: self.curves[..len].to_vec(),
        })
    }

    pub fn into_curves(self) -> Vec<StepCurve> {
        self.curves
    }
}

/// Arithmetic mean of the grid evaluations across time.
pub fn pointwise_mean(series: &CurveSeries, grid_size: usize) -> Result<Vec<f64>> {
    check_grid(grid_size)?;
    let mut sum = vec![0.0; grid_size];
    let mut buf = vec![0.0; grid_size];
    for c in series.curves() {
        c.fill_grid(&mut buf);
        for (s, v) in sum.iter_mut().zip(&buf) {
            *s += v;
        }
    }
    let t = series.len() as f64;
    Ok(sum.into_iter().map(|s| s / t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const UNIT: (f64, f64) = (0.0, 1.0);

    fn single_jump(at: f64) -> StepCurve {
        StepCurve::new(UNIT, vec![at], vec![1.0], 0.0).unwrap()
    }

    #[test]
    fn right_continuous_at_jump() {
        let c = single_jump(0.5);
        assert_eq!(c.evaluate(0.5).unwrap(), 1.0);
        assert_eq!(c.evaluate(0.499).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_outside_domain_is_an_error() {
        let c = single_jump(0.5);
        assert!(matches!(c.evaluate(1.5), Err(Error::Domain { .. })));
        assert!(matches!(c.evaluate(f64::NAN), Err(Error::Domain { .. })));
    }

    #[test]
    fn empirical_cdf_counts() {
        let c = StepCurve::from_particles(&[0.2, 0.2, 0.8], UNIT).unwrap();
        assert_eq!(c.evaluate(0.5).unwrap(), 2.0 / 3.0);

        let c = StepCurve::from_particles(&[0.3, 0.3, 0.7, 0.9], UNIT).unwrap();
        assert_eq!(c.jumps(), &[0.3, 0.7, 0.9]);
        assert_eq!(c.levels(), &[0.5, 0.75, 1.0]);

        let c = StepCurve::from_particles(&[0.4; 7], UNIT).unwrap();
        assert_eq!(c.jumps(), &[0.4]);
        assert_eq!(c.levels(), &[1.0]);

        let distinct: Vec<f64> = (0..500).map(|i| (i as f64 + 0.5) / 500.0).collect();
        let c = StepCurve::from_particles(&distinct, UNIT).unwrap();
        assert_eq!(c.jump_count(), 500);
        for s in c.jump_sizes() {
            assert!((s - 0.002).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_particles_rejected() {
        assert!(matches!(
            StepCurve::from_particles(&[], UNIT),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn duplicate_locations_keep_last_level() {
        let c = StepCurve::new(UNIT, vec![0.2, 0.2, 0.6], vec![0.1, 0.4, 0.9], 0.0).unwrap();
        assert_eq!(c.jumps(), &[0.2, 0.6]);
        assert_eq!(c.levels(), &[0.4, 0.9]);
    }

    #[test]
    fn zero_size_breakpoints_dropped() {
        let c = StepCurve::new(UNIT, vec![0.1, 0.2, 0.3], vec![0.0, 0.5, 0.5], 0.0).unwrap();
        assert_eq!(c.jumps(), &[0.2]);
    }

    #[test]
    fn invalid_construction() {
        assert!(StepCurve::new(UNIT, vec![0.5, 0.2], vec![0.1, 0.2], 0.0).is_err());
        assert!(StepCurve::new(UNIT, vec![0.2, 0.5], vec![0.3, 0.2], 0.0).is_err());
        assert!(StepCurve::new(UNIT, vec![0.2], vec![1.2], 0.0).is_err());
        assert!(StepCurve::new(UNIT, vec![1.2], vec![1.0], 0.0).is_err());
        assert!(StepCurve::new((1.0, 0.0), vec![], vec![], 0.0).is_err());
    }

    #[test]
    fn grid_examples() {
        let c = single_jump(0.5);
        assert_eq!(c.to_grid(5).unwrap(), vec![0.0, 0.0, 1.0, 1.0, 1.0]);
        let dense: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
        let c = StepCurve::from_particles(&dense, UNIT).unwrap();
        assert_eq!(c.to_grid(2).unwrap(), vec![0.001, 1.0]);
        assert!(c.to_grid(1).is_err());
    }

    #[test]
    fn l2_examples() {
        let c = single_jump(0.3);
        assert_eq!(c.l2_distance(&c, 500).unwrap(), 0.0);

        // Flat zero until a jump at the right end versus a jump at the left end:
        // the curves differ everywhere except the final grid point.
        let a = single_jump(1.0);
        let b = single_jump(0.0);
        let brute = {
            let diffs = (0..500)
                .map(|k| {
                    let x = grid_point(0.0, 1.0, k, 500);
                    let va = if x >= 1.0 { 1.0 } else { 0.0 };
                    let vb = 1.0;
                    (va - vb) * (va - vb)
                })
                .sum::<f64>();
            (diffs / 500.0).sqrt()
        };
        assert_eq!(a.l2_distance(&b, 500).unwrap(), brute);
        assert!((brute - (499.0f64 / 500.0).sqrt()).abs() < 1e-15);

        let lo = StepCurve::new(UNIT, vec![0.5], vec![0.6], 0.1).unwrap();
        let hi = StepCurve::new(UNIT, vec![0.5], vec![0.7], 0.2).unwrap();
        assert!((lo.l2_distance(&hi, 500).unwrap() - 0.1).abs() < 1e-12);

        let other = StepCurve::flat((0.0, 2.0), 0.0).unwrap();
        assert!(lo.l2_distance(&other, 500).is_err());
    }

    #[test]
    fn pointwise_mean_examples() {
        let c = single_jump(0.4);
        let s = CurveSeries::new(vec![c.clone(), c.clone(), c.clone()]).unwrap();
        assert_eq!(pointwise_mean(&s, 50).unwrap(), c.to_grid(50).unwrap());

        let s = CurveSeries::new(vec![
            StepCurve::flat(UNIT, 0.0).unwrap(),
            StepCurve::flat(UNIT, 1.0).unwrap(),
        ])
        .unwrap();
        assert!(pointwise_mean(&s, 10).unwrap().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn series_requires_shared_domain() {
        assert!(CurveSeries::new(vec![]).is_err());
        assert!(CurveSeries::new(vec![
            StepCurve::flat(UNIT, 0.0).unwrap(),
            StepCurve::flat((0.0, 2.0), 0.0).unwrap(),
        ])
        .is_err());
    }

    #[test]
    fn json_shape() {
        let c = StepCurve::new(UNIT, vec![0.25, 0.5], vec![0.5, 1.0], 0.0).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"domain":[0.0,1.0],"jumps":[0.25,0.5],"levels":[0.5,1.0],"base_level":0.0})
        );
        let bad = serde_json::json!({"domain":[0.0,1.0],"jumps":[0.5],"levels":[2.0],"base_level":0.0});
        assert!(serde_json::from_value::<StepCurve>(bad).is_err());
    }

    #[test]
    fn convex_combination_of_flats() {
        let zero = StepCurve::flat(UNIT, 0.0).unwrap();
        let one = StepCurve::flat(UNIT, 1.0).unwrap();
        let mid = zero.convex_combination(&one, 0.5).unwrap();
        assert_eq!(mid.base_level(), 0.5);
        assert_eq!(mid.jump_count(), 0);
    }

    fn naive_eval(jumps: &[f64], levels: &[f64], base: f64, x: f64) -> f64 {
        let mut v = base;
        for (j, l) in jumps.iter().zip(levels) {
            if *j <= x {
                v = *l;
            }
        }
        v
    }

    fn arb_curve() -> impl Strategy<Value = StepCurve> {
        prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..20).prop_map(|pairs| {
            let mut xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let mut ls: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            xs.sort_by(f64::total_cmp);
            ls.sort_by(f64::total_cmp);
            StepCurve::new(UNIT, xs, ls, 0.0).unwrap()
        })
    }

    proptest! {
        #[test]
        fn evaluation_matches_naive_scan(c in arb_curve(), xs in prop::collection::vec(0.0f64..=1.0, 1..30)) {
            for w in c.levels().windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            for x in xs {
                prop_assert_eq!(c.evaluate(x).unwrap(), naive_eval(c.jumps(), c.levels(), c.base_level(), x));
            }
            let g = c.to_grid(37).unwrap();
            for (k, v) in g.iter().enumerate() {
                prop_assert_eq!(*v, naive_eval(c.jumps(), c.levels(), c.base_level(), grid_point(0.0, 1.0, k, 37)));
            }
        }

        #[test]
        fn particles_to_grid_matches_direct_count(
            ps in prop::collection::vec(prop_oneof![prop::sample::select(vec![0.0, 0.1, 0.25, 0.3, 0.5, 0.77, 0.9, 1.0]), 0.0f64..=1.0], 1..=50),
            grid in 2usize..80,
        ) {
            let c = StepCurve::from_particles(&ps, UNIT).unwrap();
            let n = ps.len() as f64;
            let g = c.to_grid(grid).unwrap();
            for (k, v) in g.iter().enumerate() {
                let x = grid_point(0.0, 1.0, k, grid);
                let count = ps.iter().filter(|&&p| p <= x).count();
                prop_assert_eq!(*v, count as f64 / n);
            }
            let mut distinct = ps.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            prop_assert_eq!(c.jump_count(), distinct.len());
        }

        #[test]
        fn l2_is_a_metric_on_grids(a in arb_curve(), b in arb_curve(), c in arb_curve()) {
            let ab = a.l2_distance(&b, 100).unwrap();
            let ba = b.l2_distance(&a, 100).unwrap();
            let bc = b.l2_distance(&c, 100).unwrap();
            let ac = a.l2_distance(&c, 100).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= ab + bc + 1e-12);
            prop_assert_eq!(ab == 0.0, a.to_grid(100).unwrap() == b.to_grid(100).unwrap());
        }

        #[test]
        fn combination_stays_a_valid_curve(a in arb_curve(), b in arb_curve(), w in 0.0f64..=1.0) {
            let m = a.convex_combination(&b, w).unwrap();
            for x in [0.0, 0.13, 0.5, 0.71, 1.0] {
                let expect = w * a.evaluate(x).unwrap() + (1.0 - w) * b.evaluate(x).unwrap();
                prop_assert!((m.evaluate(x).unwrap() - expect).abs() < 1e-12);
            }
        }
    }
}
