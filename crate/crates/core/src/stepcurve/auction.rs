//! Price-versus-cumulative-quantity step curves and their crossing point.
//!
//! A curve is an ordered list of bids. Bid `k` covers the quantity interval
//! `(q_{k-1}, q_k]`, where `q_k` is the cumulative quantity of the first
//! `k + 1` bids. Demand bids are sorted by decreasing price and supply offers
//! by increasing price, so demand curves are non-increasing and supply
//! curves non-decreasing. An unbounded bid (infinite quantity) extends the
//! curve indefinitely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Demand,
    Supply,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Demand => "demand",
            Side::Supply => "supply",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "demand" => Ok(Side::Demand),
            "supply" => Ok(Side::Supply),
            other => Err(Error::Validation(format!(
                "side must be \"demand\" or \"supply\", got {other:?}"
            ))),
        }
    }
}

/// A price/quantity pair. `quantity` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bid {
    pub price: f64,
    pub quantity: f64,
}

impl Bid {
    pub fn new(price: f64, quantity: f64) -> Self {
        Bid { price, quantity }
    }
}

impl Serialize for Bid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let q = self.quantity.is_finite().then_some(self.quantity);
        (self.price, q).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Bid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (price, q): (f64, Option<f64>) = Deserialize::deserialize(d)?;
        Ok(Bid {
            price,
            quantity: q.unwrap_or(f64::INFINITY),
        })
    }
}

/// How the clearing price is chosen inside the interval of prices at which
/// the two curves meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// Centre of the interval.
    #[default]
    Midpoint,
    /// Highest price in the interval, the most favourable to sellers that
    /// buyers still accept.
    DemandSide,
    /// Lowest price in the interval, the most favourable to buyers that
    /// sellers still accept.
    SupplySide,
}

impl TieRule {
    pub fn select(self, lo: f64, hi: f64) -> f64 {
        match self {
            TieRule::Midpoint => 0.5 * (lo + hi),
            TieRule::DemandSide => hi,
            TieRule::SupplySide => lo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAuctionCurve", into = "RawAuctionCurve")]
pub struct AuctionCurve {
    side: Side,
    bids: Vec<Bid>,
    ends: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawAuctionCurve {
    side: Side,
    bids: Vec<Bid>,
}

impl TryFrom<RawAuctionCurve> for AuctionCurve {
    type Error = Error;

    fn try_from(raw: RawAuctionCurve) -> Result<Self> {
        AuctionCurve::from_bids(raw.side, raw.bids)
    }
}

impl From<AuctionCurve> for RawAuctionCurve {
    fn from(c: AuctionCurve) -> Self {
        RawAuctionCurve {
            side: c.side,
            bids: c.bids,
        }
    }
}

impl AuctionCurve {
    /// Sorts bids into merit order, merges equal prices by summing their
    /// quantities and cumulates.
    pub fn from_bids(side: Side, bids: impl IntoIterator<Item = Bid>) -> Result<Self> {
        let mut bids: Vec<Bid> = bids.into_iter().collect();
        if bids.is_empty() {
            return Err(Error::arg(format!("{side} curve without bids")));
        }
        for b in &bids {
            if !b.price.is_finite() {
                return Err(Error::Validation(format!("non-finite bid price {}", b.price)));
            }
            if b.quantity.is_nan() || b.quantity <= 0.0 {
                return Err(Error::Validation(format!(
                    "bid quantity must be positive, got {}",
                    b.quantity
                )));
            }
        }
        match side {
            Side::Demand => bids.sort_by(|a, b| b.price.total_cmp(&a.price)),
            Side::Supply => bids.sort_by(|a, b| a.price.total_cmp(&b.price)),
        }
        let mut merged: Vec<Bid> = Vec::with_capacity(bids.len());
        for b in bids {
            match merged.last_mut() {
                Some(last) if last.price == b.price => last.quantity += b.quantity,
                _ => merged.push(b),
            }
        }
        let ends = merged
            .iter()
            .scan(0.0, |acc, b| {
                *acc += b.quantity;
                Some(*acc)
            })
            .collect();
        Ok(AuctionCurve {
            side,
            bids: merged,
            ends,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Bids in merit order, equal prices merged.
    pub fn bids(&self) -> &[Bid] {
        &self.bids
    }

    /// Cumulative quantity at the right end of each bid.
    pub fn cumulative(&self) -> &[f64] {
        &self.ends
    }

    pub fn total_quantity(&self) -> f64 {
        *self.ends.last().expect("curve has at least one bid")
    }

    /// Same curve with one more bid merged in; `self` is left untouched.
    pub fn with_bid(&self, bid: Bid) -> Result<AuctionCurve> {
        AuctionCurve::from_bids(self.side, self.bids.iter().copied().chain([bid]))
    }

    /// Price of the marginal unit at cumulative quantity `q`, or `None` when
    /// `q` is not in `(0, total]`.
    pub fn price_at(&self, q: f64) -> Option<f64> {
        if !(q > 0.0) {
            return None;
        }
        let k = self.ends.partition_point(|&e| e < q);
        self.bids.get(k).map(|b| b.price)
    }
}

/// Crossing point of a demand and a supply curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clearing {
    pub price: f64,
    pub quantity: f64,
    /// Prices at which both curves pass through `quantity`.
    pub price_interval: (f64, f64),
}

/// Finds the smallest quantity `q*` beyond which supply price is at least
/// demand price, and picks the clearing price from the interval where the
/// two graphs (vertical segments included) meet at `q*`.
pub fn intersect(demand: &AuctionCurve, supply: &AuctionCurve, rule: TieRule) -> Result<Clearing> {
    if demand.side != Side::Demand || supply.side != Side::Supply {
        return Err(Error::arg("intersect expects a demand curve and a supply curve"));
    }
    let (d, s) = (&demand.bids, &supply.bids);
    if s[0].price > d[0].price {
        return Err(Error::NoIntersection);
    }

    let (mut i, mut j) = (0, 0);
    let mut left: Option<(usize, usize)> = None;
    let mut q = 0.0;
    loop {
        if s[j].price >= d[i].price {
            break;
        }
        let (de, se) = (demand.ends[i], supply.ends[j]);
        let next = de.min(se);
        if next.is_infinite() {
            return Err(Error::NoIntersection);
        }
        left = Some((i, j));
        q = next;
        if de == next {
            i += 1;
        }
        if se == next {
            j += 1;
        }
        if i == d.len() || j == s.len() {
            return Err(Error::NoIntersection);
        }
    }

    let (demand_right, supply_right) = (d[i].price, s[j].price);
    let (lo, hi) = match left {
        None => (demand_right, supply_right),
        Some((pi, pj)) => (
            s[pj].price.max(demand_right),
            supply_right.min(d[pi].price),
        ),
    };
    Ok(Clearing {
        price: rule.select(lo, hi),
        quantity: q,
        price_interval: (lo, hi),
    })
}
