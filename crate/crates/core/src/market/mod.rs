//! Demand and supply curves of a daily gas auction.
//!
//! Each side is an [`AuctionCurve`] in the quantity/price plane. For
//! modelling, a side is read as a right-continuous step function of
//! cumulative quantity whose jumps sit where a new price segment starts and
//! whose levels are prices divided by the cap (one minus that for demand,
//! so both sides are non-decreasing). `L` and `R` are the first and last
//! jump locations; mapping `[L, R]` onto `[0, 1]` gives the normalised curve
//! the particle model works with. Going back, the final segment is open
//! ended because a normalised curve says nothing about where it stops.

pub mod bids;
pub mod whatif;

pub use bids::{BidRow, BidTable};
pub use whatif::{clearing_prices, summarize_prices, Histogram, PriceSummary};

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stepcurve::auction::{intersect, AuctionCurve, Bid, Clearing, Side, TieRule};
use crate::stepcurve::StepCurve;

/// Prices are bounded by `[0, PRICE_CAP]` EUR/GJ.
pub const PRICE_CAP: f64 = 23.0;

pub(crate) fn check_price(price: f64) -> Result<()> {
    if (0.0..=PRICE_CAP).contains(&price) {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "price {price} outside [0, {PRICE_CAP}] EUR/GJ"
        )))
    }
}

/// Validates a trader bid.
pub fn check_bid(bid: &Bid) -> Result<()> {
    check_price(bid.price)?;
    if !(bid.quantity.is_finite() && bid.quantity > 0.0) {
        return Err(Error::Validation(format!(
            "quantity must be positive and finite, got {}",
            bid.quantity
        )));
    }
    Ok(())
}

/// Level of a price on the normalised scale.
pub fn price_to_level(side: Side, price: f64) -> f64 {
    match side {
        Side::Supply => price / PRICE_CAP,
        Side::Demand => 1.0 - price / PRICE_CAP,
    }
}

pub fn level_to_price(side: Side, level: f64) -> f64 {
    match side {
        Side::Supply => level * PRICE_CAP,
        Side::Demand => (1.0 - level) * PRICE_CAP,
    }
}

/// First and last jump locations of a side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoints {
    pub first: f64,
    pub last: f64,
}

/// Step-function view of a finite auction curve on `[0, total quantity]`.
pub fn level_curve(curve: &AuctionCurve) -> Result<StepCurve> {
    let total = curve.total_quantity();
    if !total.is_finite() {
        return Err(Error::arg("level view needs a curve of finite total quantity"));
    }
    let side = curve.side();
    let mut jumps = Vec::with_capacity(curve.bids().len());
    let mut levels = Vec::with_capacity(curve.bids().len());
    let mut start = 0.0;
    for (bid, &end) in curve.bids().iter().zip(curve.cumulative()) {
        check_price(bid.price)?;
        jumps.push(start);
        levels.push(price_to_level(side, bid.price));
        start = end;
    }
    StepCurve::new((0.0, total), jumps, levels, 0.0)
}

pub fn endpoints(curve: &AuctionCurve) -> Result<Endpoints> {
    let c = level_curve(curve)?;
    match (c.jumps().first(), c.jumps().last()) {
        (Some(&first), Some(&last)) if first < last => Ok(Endpoints { first, last }),
        _ => Err(Error::Validation(format!(
            "{} curve needs two distinct jump locations to normalise",
            curve.side()
        ))),
    }
}

/// Maps `[L, R]` onto `[0, 1]`.
pub fn normalize(curve: &AuctionCurve) -> Result<(StepCurve, Endpoints)> {
    let ends = endpoints(curve)?;
    let c = level_curve(curve)?;
    let width = ends.last - ends.first;
    let jumps = c
        .jumps()
        .iter()
        .map(|q| ((q - ends.first) / width).clamp(0.0, 1.0))
        .collect();
    let curve = StepCurve::new((0.0, 1.0), jumps, c.levels().to_vec(), c.base_level())?;
    Ok((curve, ends))
}

/// Auction curve whose level view on `[L, R]` is `normalized`, with the
/// last segment open ended.
pub fn denormalize(normalized: &StepCurve, side: Side, first: f64, last: f64) -> Result<AuctionCurve> {
    if !(first.is_finite() && last.is_finite() && first < last) {
        return Err(Error::arg(format!("need L < R, got L = {first}, R = {last}")));
    }
    if normalized.domain() != (0.0, 1.0) {
        return Err(Error::arg("normalised curves live on [0, 1]"));
    }
    let width = last - first;
    let mut bids = Vec::with_capacity(normalized.jump_count() + 1);
    let mut level = normalized.base_level();
    let mut start = 0.0;
    for (&x, &next) in normalized.jumps().iter().zip(normalized.levels()) {
        let q = first + width * x;
        if q > start {
            bids.push(Bid::new(level_to_price(side, level), q - start));
            start = q;
        }
        level = next;
    }
    bids.push(Bid::new(level_to_price(side, level), f64::INFINITY));
    AuctionCurve::from_bids(side, bids)
}

/// Both sides of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketDay {
    pub date: NaiveDate,
    pub demand: AuctionCurve,
    pub supply: AuctionCurve,
}

impl MarketDay {
    pub fn from_bids(
        date: NaiveDate,
        demand: impl IntoIterator<Item = Bid>,
        supply: impl IntoIterator<Item = Bid>,
    ) -> Result<Self> {
        let build = |side: Side, bids: Vec<Bid>| -> Result<AuctionCurve> {
            if bids.is_empty() {
                return Err(Error::MissingSide {
                    side: side.to_string(),
                    day: date,
                });
            }
            for b in &bids {
                check_price(b.price)?;
            }
            AuctionCurve::from_bids(side, bids)
        };
        Ok(MarketDay {
            date,
            demand: build(Side::Demand, demand.into_iter().collect())?,
            supply: build(Side::Supply, supply.into_iter().collect())?,
        })
    }

    pub fn side(&self, side: Side) -> &AuctionCurve {
        match side {
            Side::Demand => &self.demand,
            Side::Supply => &self.supply,
        }
    }

    pub fn clearing(&self, rule: TieRule) -> Result<Clearing> {
        intersect(&self.demand, &self.supply, rule)
    }
}

/// Normalised curves and endpoints of one side over several days.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSide {
    pub curves: Vec<StepCurve>,
    pub endpoints: Vec<Endpoints>,
}

pub fn normalize_days(days: &[MarketDay], side: Side) -> Result<NormalizedSide> {
    let mut out = NormalizedSide {
        curves: Vec::with_capacity(days.len()),
        endpoints: Vec::with_capacity(days.len()),
    };
    for d in days {
        let (c, e) = normalize(d.side(side)).map_err(|e| match e {
            Error::Validation(msg) => Error::Validation(format!("{}: {msg}", d.date)),
            other => other,
        })?;
        out.curves.push(c);
        out.endpoints.push(e);
    }
    Ok(out)
}

/// Denormalised members and the number of `R` draws that had to be replaced
/// because they did not exceed `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Denormalized {
    pub curves: Vec<AuctionCurve>,
    /// Last-jump location used for each member.
    pub last_jumps: Vec<f64>,
    pub resampled: usize,
}

/// Pairs member `i` with `r_draws[i % len]`, replacing draws `<= first` by
/// uniformly chosen valid ones.
pub fn denormalize_forecast<R: Rng + ?Sized>(
    members: &[StepCurve],
    side: Side,
    first: f64,
    r_draws: &[f64],
    rng: &mut R,
) -> Result<Denormalized> {
    let valid: Vec<f64> = r_draws.iter().copied().filter(|r| *r > first && r.is_finite()).collect();
    if valid.is_empty() {
        return Err(Error::arg(format!("no draw of R exceeds L = {first}")));
    }
    let mut resampled = 0;
    let last_jumps: Vec<f64> = (0..members.len())
        .map(|i| {
            let r = r_draws[i % r_draws.len()];
            if r > first && r.is_finite() {
                r
            } else {
                resampled += 1;
                valid[rng.random_range(0..valid.len())]
            }
        })
        .collect();
    let curves = members
        .iter()
        .zip(&last_jumps)
        .map(|(m, &r)| denormalize(m, side, first, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(Denormalized {
        curves,
        last_jumps,
        resampled,
    })
}

pub fn clearing_price(demand: &AuctionCurve, supply: &AuctionCurve, rule: TieRule) -> Result<Clearing> {
    intersect(demand, supply, rule)
}

/// `(demand, supply)` with `bid` merged into its side.
pub fn inject_bid(
    demand: &AuctionCurve,
    supply: &AuctionCurve,
    side: Side,
    bid: Bid,
) -> Result<(AuctionCurve, AuctionCurve)> {
    check_bid(&bid)?;
    Ok(match side {
        Side::Demand => (demand.with_bid(bid)?, supply.clone()),
        Side::Supply => (demand.clone(), supply.with_bid(bid)?),
    })
}
