use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_bid, PRICE_CAP};
use crate::error::Result;
use crate::forecast::nearest_rank;
use crate::stepcurve::auction::{intersect, AuctionCurve, Bid, Side, TieRule};

/// Equal-width bins over `[lo, hi]`; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| lo + width * k as f64).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            if v < lo || v > hi {
                continue;
            }
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { edges, counts }
    }
}

/// Distribution of clearing prices over an ensemble of curve pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSummary {
    pub n_members: usize,
    /// Members whose curves did not cross.
    pub n_failed: usize,
    pub mean: Option<f64>,
    pub q025: Option<f64>,
    pub q50: Option<f64>,
    pub q975: Option<f64>,
    pub histogram: Histogram,
}

/// Clearing price of every pair, after merging `bid` when given. Pairs
/// without a crossing yield `None`.
pub fn clearing_prices(
    pairs: &[(AuctionCurve, AuctionCurve)],
    bid: Option<(Side, Bid)>,
    rule: TieRule,
) -> Result<Vec<Option<f64>>> {
    if let Some((_, b)) = &bid {
        check_bid(b)?;
    }
    pairs
        .par_iter()
        .map(|(d, s)| {
            let cleared = match bid {
                None => intersect(d, s, rule),
                Some((Side::Demand, b)) => intersect(&d.with_bid(b)?, s, rule),
                Some((Side::Supply, b)) => intersect(d, &s.with_bid(b)?, rule),
            };
            Ok(cleared.ok().map(|c| c.price))
        })
        .collect()
}

pub fn summarize_prices(prices: &[Option<f64>], bins: usize) -> PriceSummary {
    let mut ok: Vec<f64> = prices.iter().flatten().copied().collect();
    ok.sort_unstable_by(f64::total_cmp);
    let (mean, q025, q50, q975) = if ok.is_empty() {
        (None, None, None, None)
    } else {
        (
            Some(ok.iter().sum::<f64>() / ok.len() as f64),
            Some(nearest_rank(&ok, 0.025)),
            Some(nearest_rank(&ok, 0.5)),
            Some(nearest_rank(&ok, 0.975)),
        )
    };
    PriceSummary {
        n_members: prices.len(),
        n_failed: prices.len() - ok.len(),
        mean,
        q025,
        q50,
        q975,
        histogram: Histogram::new(&ok, 0.0, PRICE_CAP, bins),
    }
}
