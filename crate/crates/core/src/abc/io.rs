//! Chains as newline-delimited JSON: a header line, one line per
//! iteration and a closing diagnostics line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::chain::{ChainDiagnostics, ChainRecord, ChainSample};
use super::FitSpec;
use crate::error::{Error, Result};
use crate::summaries::Thresholds;

pub const CHAIN_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub schema_version: u32,
    /// Particle count used for simulation and forecasting.
    pub n: usize,
    pub horizon: usize,
    pub grid_size: usize,
    /// Final thresholds.
    pub thresholds: Thresholds,
    pub spec: FitSpec,
    /// Free-form snapshot of the calling configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedChain {
    pub header: ChainHeader,
    pub record: ChainRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(Box<ChainHeader>),
    Sample(ChainSample),
    Diagnostics(ChainDiagnostics),
}

pub fn write_chain<W: Write>(mut out: W, chain: &FittedChain) -> Result<()> {
    let mut line = |l: &Line| -> Result<()> {
        serde_json::to_writer(&mut out, l)?;
        out.write_all(b"\n")?;
        Ok(())
    };
    line(&Line::Header(Box::new(chain.header.clone())))?;
    for s in &chain.record.samples {
        line(&Line::Sample(*s))?;
    }
    line(&Line::Diagnostics(chain.record.diagnostics))?;
    out.flush()?;
    Ok(())
}

pub fn read_chain<R: BufRead>(input: R) -> Result<FittedChain> {
    let mut header = None;
    let mut samples = Vec::new();
    let mut diagnostics = None;
    for (no, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line)
            .map_err(|e| Error::Validation(format!("chain line {}: {e}", no + 1)))?;
        match parsed {
            Line::Header(h) if header.is_none() && no == 0 => {
                if h.schema_version != CHAIN_SCHEMA_VERSION {
                    return Err(Error::Validation(format!(
                        "unsupported chain schema version {}",
                        h.schema_version
                    )));
                }
                header = Some(*h);
            }
            Line::Header(_) => return Err(Error::Validation("chain header must be the first line only".into())),
            Line::Sample(_) | Line::Diagnostics(_) if header.is_none() => {
                return Err(Error::Validation("chain file does not start with a header".into()))
            }
            Line::Sample(_) | Line::Diagnostics(_) if diagnostics.is_some() => {
                return Err(Error::Validation("records after the diagnostics line".into()))
            }
            Line::Sample(s) => samples.push(s),
            Line::Diagnostics(d) => diagnostics = Some(d),
        }
    }
    let header = header.ok_or_else(|| Error::Validation("empty chain file".into()))?;
    let diagnostics = diagnostics.ok_or_else(|| Error::Validation("chain file is truncated".into()))?;
    if samples.is_empty() {
        return Err(Error::Validation("chain file has no samples".into()));
    }
    Ok(FittedChain {
        header,
        record: ChainRecord { samples, diagnostics },
    })
}
