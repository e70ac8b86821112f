use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{check_price, MarketDay};
use crate::error::{Error, Result};
use crate::stepcurve::auction::{Bid, Side};

/// One awarded bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidRow {
    pub date: NaiveDate,
    pub side: Side,
    pub price_eur_gj: f64,
    pub quantity_gj: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
}

impl BidRow {
    pub fn bid(&self) -> Bid {
        Bid::new(self.price_eur_gj, self.quantity_gj)
    }

    fn validate(&self, line: usize) -> Result<()> {
        check_price(self.price_eur_gj).map_err(|e| Error::Validation(format!("line {line}: {e}")))?;
        if !(self.quantity_gj.is_finite() && self.quantity_gj > 0.0) {
            return Err(Error::Validation(format!(
                "line {line}: quantity must be positive, got {}",
                self.quantity_gj
            )));
        }
        Ok(())
    }
}

/// Awarded bids grouped by day.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BidTable {
    days: BTreeMap<NaiveDate, Vec<BidRow>>,
}

impl BidTable {
    pub fn from_rows(rows: impl IntoIterator<Item = BidRow>) -> Result<Self> {
        let mut table = BidTable::default();
        for (i, row) in rows.into_iter().enumerate() {
            row.validate(i + 2)?;
            table.days.entry(row.date).or_default().push(row);
        }
        Ok(table)
    }

    /// Reads `date,side,price_eur_gj,quantity_gj[,actor]` with a header.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers()?.clone();
        for required in ["date", "side", "price_eur_gj", "quantity_gj"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::Validation(format!("bid file lacks the {required:?} column")));
            }
        }
        let rows = reader.deserialize().collect::<std::result::Result<Vec<BidRow>, _>>()?;
        BidTable::from_rows(rows)
    }

    /// Reads one CSV file, or every `.csv` file of a directory in name
    /// order.
    pub fn read_path(path: &Path) -> Result<Self> {
        if path.is_dir() {
            let mut files: Vec<_> = std::fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            let mut rows = Vec::new();
            for f in files {
                let t = BidTable::read_csv(std::fs::File::open(&f)?)?;
                rows.extend(t.days.into_values().flatten());
            }
            BidTable::from_rows(rows)
        } else {
            BidTable::read_csv(std::fs::File::open(path)?)
        }
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.days.keys().copied()
    }

    pub fn rows(&self, date: NaiveDate) -> &[BidRow] {
        self.days.get(&date).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn build_day(&self, date: NaiveDate) -> Result<MarketDay> {
        let rows = self.rows(date);
        let side = |s: Side| rows.iter().filter(move |r| r.side == s).map(BidRow::bid);
        MarketDay::from_bids(date, side(Side::Demand), side(Side::Supply))
    }

    /// Every day in date order.
    pub fn build_all(&self) -> Result<Vec<MarketDay>> {
        self.dates().map(|d| self.build_day(d)).collect()
    }
}
