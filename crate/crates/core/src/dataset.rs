//! Curve series files: `{"schema_version": 1, "series": [{"date": ..., "curve": ...}]}`.
//! Dates are ISO-8601 and either present on every entry or on none.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stepcurve::{CurveSeries, StepCurve};

pub const SERIES_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DatedSeries {
    pub dates: Option<Vec<NaiveDate>>,
    pub series: CurveSeries,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    date: Option<NaiveDate>,
    curve: StepCurve,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesFile {
    schema_version: u32,
    series: Vec<Entry>,
}

impl DatedSeries {
    pub fn new(dates: Option<Vec<NaiveDate>>, series: CurveSeries) -> Result<Self> {
        if let Some(d) = &dates {
            if d.len() != series.len() {
                return Err(Error::Validation(format!(
                    "{} dates for {} curves",
                    d.len(),
                    series.len()
                )));
            }
            if d.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation("dates must be strictly increasing".into()));
            }
        }
        Ok(DatedSeries { dates, series })
    }

    pub fn undated(series: CurveSeries) -> Self {
        DatedSeries { dates: None, series }
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let file: SeriesFile = serde_json::from_reader(input)?;
        if file.schema_version != SERIES_SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported series schema version {}",
                file.schema_version
            )));
        }
        let dated = file.series.iter().filter(|e| e.date.is_some()).count();
        if dated != 0 && dated != file.series.len() {
            return Err(Error::Validation("either every curve or none carries a date".into()));
        }
        let dates = (dated > 0).then(|| file.series.iter().map(|e| e.date.expect("checked")).collect());
        let series = CurveSeries::new(file.series.into_iter().map(|e| e.curve).collect())?;
        DatedSeries::new(dates, series)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let file = SeriesFile {
            schema_version: SERIES_SCHEMA_VERSION,
            series: self
                .series
                .curves()
                .iter()
                .enumerate()
                .map(|(i, c)| Entry {
                    date: self.dates.as_ref().map(|d| d[i]),
                    curve: c.clone(),
                })
                .collect(),
        };
        serde_json::to_writer(out, &file)?;
        Ok(())
    }
}
