//! Textual similarity, temporal/spatial decay weights and their combination.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GeoPoint, MatchMode, MatchParams, Post};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Per-pair score decomposition. Fields a mode does not use are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub s_text: f64,
    pub w_time: Option<f64>,
    pub w_location: Option<f64>,
    pub s_overall: f64,
    pub distance_km: Option<f64>,
    pub delta_t_days: Option<f64>,
}

/// Cosine of the angle between `a` and `b`, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Absolute time difference in fractional days.
pub fn delta_days(r_time: i64, q_time: i64) -> f64 {
    (q_time as f64 - r_time as f64).abs() / SECONDS_PER_DAY
}

/// `1 - min(x / delta, 1)`, the linear ramp shared by both weights.
fn linear_decay(x: f64, delta: f64) -> f64 {
    1.0 - (x / delta).min(1.0)
}

pub fn temporal_weight(r_time: i64, q_time: i64, delta_time_days: f64) -> Result<f64> {
    if !(delta_time_days > 0.0) {
        return Err(Error::NonPositiveDelta("delta_time"));
    }
    Ok(linear_decay(delta_days(r_time, q_time), delta_time_days))
}

/// Great-circle distance via the haversine formula.
pub fn haversine_km(p: GeoPoint, q: GeoPoint, radius_km: f64) -> f64 {
    let (lat1, lat2) = (p.lat().to_radians(), q.lat().to_radians());
    let dlat = lat2 - lat1;
    let dlon = (q.lon() - p.lon()).to_radians();
    let a = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    let a = a.clamp(0.0, 1.0);
    let c = 2.0 * a.sqrt().atan2((1.0 - a).sqrt());
    radius_km * c
}

pub fn spatial_weight(p: GeoPoint, q: GeoPoint, delta_distance_km: f64, radius_km: f64) -> Result<f64> {
    if !(delta_distance_km > 0.0) {
        return Err(Error::NonPositiveDelta("delta_distance"));
    }
    Ok(linear_decay(haversine_km(p, q, radius_km), delta_distance_km))
}

/// Scores a request/offer pair under `params.mode`.
pub fn score_pair(
    request: &Post,
    request_emb: &[f32],
    offer: &Post,
    offer_emb: &[f32],
    params: &MatchParams,
) -> Result<ScoreBreakdown> {
    let s_text = cosine_similarity(request_emb, offer_emb)?;
    score_with_text(request, offer, s_text, params)
}

/// Like [`score_pair`] with the textual similarity already known.
pub fn score_with_text(request: &Post, offer: &Post, s_text: f64, params: &MatchParams) -> Result<ScoreBreakdown> {
    let mode = params.mode;
    let mut out = ScoreBreakdown {
        s_text,
        w_time: None,
        w_location: None,
        s_overall: s_text,
        distance_km: None,
        delta_t_days: None,
    };
    if mode == MatchMode::T {
        return Ok(out);
    }

    let rg = request.geo.ok_or_else(|| Error::MissingGeo(request.id.clone()))?;
    let og = offer.geo.ok_or_else(|| Error::MissingGeo(offer.id.clone()))?;
    if !(params.delta_distance > 0.0) {
        return Err(Error::NonPositiveDelta("delta_distance"));
    }
    let d = haversine_km(rg, og, params.earth_radius_km);
    let w_location = linear_decay(d, params.delta_distance);
    out.distance_km = Some(d);
    out.w_location = Some(w_location);

    match mode {
        MatchMode::Ts => {
            let a = params.ts_alpha;
            out.s_overall = a * s_text + (1.0 - a) * w_location;
        }
        MatchMode::Tts => {
            let rt = request.time().ok_or_else(|| Error::MissingTime(request.id.clone()))?;
            let ot = offer.time().ok_or_else(|| Error::MissingTime(offer.id.clone()))?;
            let dt = delta_days(rt, ot);
            let w_time = temporal_weight(rt, ot, params.delta_time)?;
            out.delta_t_days = Some(dt);
            out.w_time = Some(w_time);
            out.s_overall = s_text * w_time * w_location;
        }
        MatchMode::T => unreachable!(),
    }
    Ok(out)
}
