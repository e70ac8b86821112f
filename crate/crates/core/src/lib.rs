//! Modelling and forecasting of time series of monotone step curves.
//!
//! Curves are empirical cdfs of a latent particle system whose particles
//! are renewed at each step by a Pólya urn. Parameters are inferred without
//! a likelihood by an MCMC sampler that compares summary statistics of
//! simulated and observed series, and forecasts are ensembles of simulated
//! continuations. The [`market`] module applies this to daily auction
//! curves and evaluates bids by re-clearing forecast curve pairs.

pub mod abc;
pub mod ar;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod forecast;
pub mod market;
pub mod rng;
pub mod stepcurve;
pub mod summaries;
pub mod synthetic;

pub use engine::{EngineConfig, Initial, ParamVector};
pub use error::{Error, Result};
pub use stepcurve::auction::{AuctionCurve, Bid, Side, TieRule};
pub use stepcurve::{CurveSeries, StepCurve};
