//! Read-only HTTP service over loaded forecast artifacts.
//!
//! * `GET /health`
//! * `GET /ensemble?h=H`: summaries of the horizon-`H` forecast, without
//!   members.
//! * `POST /whatif` with `{"side", "price", "quantity", "h"?}`: clearing
//!   price distribution with the bid added to every member pair, next to the
//!   baseline distribution.

use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::Result;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use curvecast::market::{check_bid, clearing_prices, summarize_prices, PriceSummary};
use curvecast::{AuctionCurve, Bid, Side, TieRule};
use serde::{Deserialize, Serialize};

use crate::artifacts::{ForecastArtifact, Payload};
use crate::commands::point_curve;

pub const API_SCHEMA_VERSION: u32 = 1;

struct Horizon {
    /// Artifact with members stripped, served as is.
    summary: serde_json::Value,
    market: Option<MarketState>,
}

struct MarketState {
    pairs: Vec<(AuctionCurve, AuctionCurve)>,
    baseline: PriceSummary,
}

pub struct AppState {
    horizons: BTreeMap<usize, Horizon>,
    rule: TieRule,
    bins: usize,
}

#[derive(Serialize)]
struct SideView<'a> {
    #[serde(flatten)]
    forecast: &'a crate::artifacts::SideForecast,
    /// Point estimate mapped back to price and quantity.
    point_curve: AuctionCurve,
}

impl AppState {
    pub fn new(artifacts: BTreeMap<usize, ForecastArtifact>, rule: TieRule, bins: usize) -> Result<Self> {
        let mut horizons = BTreeMap::new();
        for (h, a) in artifacts {
            let mut light = a.clone();
            let market = match &mut light.payload {
                Payload::Curve { ensemble, .. } => {
                    *ensemble = ensemble.without_members();
                    None
                }
                Payload::Market { demand, supply, .. } => {
                    let d = demand.auction_curves(Side::Demand)?;
                    let s = supply.auction_curves(Side::Supply)?;
                    let pairs: Vec<_> = d.into_iter().zip(s).collect();
                    let baseline = summarize_prices(&clearing_prices(&pairs, None, rule)?, bins);
                    Some(MarketState { pairs, baseline })
                }
            };
            let summary = match (&light.payload, &market) {
                (Payload::Market { demand, supply, price_benchmark }, Some(m)) => {
                    let view = |f: &crate::artifacts::SideForecast, side: Side| -> Result<serde_json::Value> {
                        let mut stripped = f.clone();
                        stripped.ensemble = f.ensemble.without_members();
                        stripped.last_jumps.clear();
                        Ok(serde_json::to_value(SideView {
                            forecast: &stripped,
                            point_curve: point_curve(f, side)?,
                        })?)
                    };
                    serde_json::json!({
                        "schema_version": API_SCHEMA_VERSION,
                        "horizon": h,
                        "origin": light.origin,
                        "kind": "market",
                        "demand": view(demand, Side::Demand)?,
                        "supply": view(supply, Side::Supply)?,
                        "price_benchmark": price_benchmark,
                        "baseline": m.baseline,
                    })
                }
                _ => {
                    let mut v = serde_json::to_value(&light)?;
                    v["schema_version"] = API_SCHEMA_VERSION.into();
                    v
                }
            };
            horizons.insert(h, Horizon { summary, market });
        }
        Ok(AppState { horizons, rule, bins })
    }

    pub fn horizons(&self) -> Vec<usize> {
        self.horizons.keys().copied().collect()
    }

    /// Clearing-price summary with `bid` added at horizon `h`.
    pub fn whatif(&self, h: Option<usize>, side: Side, bid: Bid) -> Result<WhatIfResponse, ApiError> {
        let market: Vec<_> = self.horizons.iter().filter(|(_, v)| v.market.is_some()).collect();
        if market.is_empty() {
            return Err(ApiError::conflict("no market forecast artifacts are loaded"));
        }
        check_bid(&bid).map_err(|e| ApiError::bad_request(e.to_string()))?;
        let (horizon, state) = match h {
            None => (*market[0].0, market[0].1),
            Some(h) => match self.horizons.get(&h) {
                Some(v) if v.market.is_some() => (h, v),
                Some(_) => return Err(ApiError::not_found(format!("horizon {h} has no market forecast"))),
                None => return Err(ApiError::not_found(format!("no forecast for horizon {h}"))),
            },
        };
        let m = state.market.as_ref().expect("filtered");
        let prices = clearing_prices(&m.pairs, Some((side, bid)), self.rule)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        Ok(WhatIfResponse {
            schema_version: API_SCHEMA_VERSION,
            horizon,
            side,
            price: bid.price,
            quantity: bid.quantity,
            summary: summarize_prices(&prices, self.bins),
            baseline: m.baseline.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfRequest {
    pub side: Side,
    pub price: f64,
    pub quantity: f64,
    #[serde(default)]
    pub h: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub schema_version: u32,
    pub horizon: usize,
    pub side: Side,
    pub price: f64,
    pub quantity: f64,
    #[serde(flatten)]
    pub summary: PriceSummary,
    pub baseline: PriceSummary,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            message: message.into(),
        }
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "schema_version": API_SCHEMA_VERSION, "error": self.message });
        (self.status, Json(body)).into_response()
    }
}

type Shared = Arc<AppState>;

async fn health(State(state): State<Shared>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "schema_version": API_SCHEMA_VERSION,
        "status": "ok",
        "horizons": state.horizons(),
    }))
}

#[derive(Deserialize)]
struct EnsembleQuery {
    h: usize,
}

async fn ensemble(
    State(state): State<Shared>,
    query: Result<Query<EnsembleQuery>, QueryRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    if state.horizons.is_empty() {
        return Err(ApiError::conflict("no forecast artifacts are loaded"));
    }
    let Query(q) = query.map_err(|e| ApiError::bad_request(format!("expected ?h=<positive integer>: {e}")))?;
    state
        .horizons
        .get(&q.h)
        .map(|v| Json(v.summary.clone()))
        .ok_or_else(|| ApiError::not_found(format!("no forecast for horizon {}", q.h)))
}

async fn whatif(
    State(state): State<Shared>,
    body: Result<Json<WhatIfRequest>, JsonRejection>,
) -> Result<Json<WhatIfResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let state = state.clone();
    // Re-clearing a large ensemble is CPU bound.
    tokio::task::spawn_blocking(move || state.whatif(req.h, req.side, Bid::new(req.price, req.quantity)))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
        })?
        .map(Json)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/ensemble", get(ensemble))
        .route("/whatif", post(whatif))
        .with_state(Arc::new(state))
}

pub async fn serve(state: AppState, addr: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await?;
    Ok(())
}
