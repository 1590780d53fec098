//! Seeded synthetic request/offer corpora with planted true pairs.
//!
//! Each pair gets a request, its true offer inside both windows, and a cycle
//! of labeled distractors:
//!
//! * `temporal_out`: near the request but outside the decay time, higher cosine
//! * `spatial_out`: in the time window but beyond the decay distance, higher cosine
//! * `high_cosine_far`: near another center, higher cosine
//! * `low_sim_in`: inside both windows, at least as far in space and time as
//!   the true offer, lower cosine by at least the configured margin
//!
//! Pairs sharing a center are spaced far enough apart in time that posts from
//! different pairs never fall inside each other's decay windows.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::accuracy::{GroundTruth, TruthPair};
use crate::error::{Error, Result};
use crate::io::EmbeddingStore;
use crate::model::{EmbeddingMatrix, GeoPoint, Post, PostKind, Resource, EARTH_RADIUS_KM};
use crate::scoring::SECONDS_PER_DAY;

/// 2020-01-01T00:00:00Z.
pub const SYNTH_EPOCH: i64 = 1_577_836_800;

pub const DEFAULT_CENTERS: [(&str, f64, f64); 5] = [
    ("Sydney", -33.8688, 151.2093),
    ("Melbourne", -37.8136, 144.9631),
    ("Brisbane", -27.4698, 153.0251),
    ("Adelaide", -34.9285, 138.6007),
    ("Perth", -31.9505, 115.8605),
];

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub n_pairs: usize,
    pub centers: Vec<(String, GeoPoint)>,
    /// Maximum request-to-true-offer time gap, days.
    pub time_window_days: f64,
    /// Maximum request-to-true-offer distance, km; requests lie within half of
    /// it from their center.
    pub distance_window_km: f64,
    pub n_distractors_per_pair: usize,
    pub embedding_dim: usize,
    pub seed: u64,
    /// Decay time the out-of-window distractors are placed beyond.
    pub decay_time_days: f64,
    /// Decay distance the out-of-window distractors are placed beyond.
    pub decay_distance_km: f64,
    /// Cosine gap between the true offer and any in-window distractor.
    pub similarity_margin: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            n_pairs: 500,
            centers: default_centers(),
            time_window_days: 3.0,
            distance_window_km: 10.0,
            n_distractors_per_pair: 5,
            embedding_dim: 64,
            seed: 42,
            decay_time_days: 30.0,
            decay_distance_km: 10.0,
            similarity_margin: 0.05,
        }
    }
}

pub fn default_centers() -> Vec<(String, GeoPoint)> {
    DEFAULT_CENTERS
        .iter()
        .map(|&(name, lat, lon)| (name.to_string(), GeoPoint::new(lat, lon).expect("valid center")))
        .collect()
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.n_pairs == 0 {
            return bad("n_pairs must be at least 1");
        }
        if self.centers.is_empty() {
            return bad("at least one center is required");
        }
        if !(self.time_window_days > 0.0 && self.distance_window_km > 0.0) {
            return bad("windows must be positive");
        }
        if !(self.decay_time_days > 0.0 && self.decay_distance_km > 0.0) {
            return bad("decay parameters must be positive");
        }
        if self.embedding_dim < 2 {
            return bad("embedding_dim must be at least 2");
        }
        if !(0.0..0.3).contains(&self.similarity_margin) {
            return bad("similarity_margin must lie in [0, 0.3)");
        }
        Ok(())
    }

    /// Days between consecutive pairs at the same center.
    pub fn slot_spacing_days(&self) -> f64 {
        (3.0 * self.decay_time_days + self.time_window_days + 1.0).ceil()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistractorKind {
    TemporalOut,
    SpatialOut,
    HighCosineFar,
    LowSimIn,
}

impl DistractorKind {
    pub const CYCLE: [DistractorKind; 4] = [
        DistractorKind::TemporalOut,
        DistractorKind::SpatialOut,
        DistractorKind::HighCosineFar,
        DistractorKind::LowSimIn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DistractorKind::TemporalOut => "temporal_out",
            DistractorKind::SpatialOut => "spatial_out",
            DistractorKind::HighCosineFar => "high_cosine_far",
            DistractorKind::LowSimIn => "low_sim_in",
        }
    }
}

/// Taxonomy tag of a synthetic offer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OfferLabel {
    True,
    Distractor(DistractorKind),
}

impl OfferLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            OfferLabel::True => "true",
            OfferLabel::Distractor(k) => k.as_str(),
        }
    }

    /// Reads the `label=` tag embedded in a synthetic offer text.
    pub fn from_text(text: &str) -> Option<Self> {
        let start = text.find("label=")? + "label=".len();
        let rest = &text[start..];
        let end = rest.find([' ', ']']).unwrap_or(rest.len());
        rest[..end].parse().ok()
    }
}

impl FromStr for OfferLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "true" {
            return Ok(OfferLabel::True);
        }
        DistractorKind::CYCLE
            .iter()
            .find(|k| k.as_str() == s)
            .map(|&k| OfferLabel::Distractor(k))
            .ok_or_else(|| Error::InvalidParams(format!("unknown offer label `{s}`")))
    }
}

impl fmt::Display for OfferLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub requests: Vec<Post>,
    pub offers: Vec<Post>,
    pub request_embeddings: EmbeddingMatrix,
    pub offer_embeddings: EmbeddingMatrix,
    pub truth: GroundTruth,
    /// Aligned with `offers`.
    pub labels: Vec<OfferLabel>,
    /// Index into `spec.centers` for each request.
    pub request_centers: Vec<usize>,
}

impl SyntheticCorpus {
    /// Requests then offers, keyed by id.
    pub fn embedding_store(&self) -> Result<EmbeddingStore> {
        let ids = self.requests.iter().chain(&self.offers).map(|p| p.id.clone()).collect();
        let mut flat = self.request_embeddings.as_flat().to_vec();
        flat.extend_from_slice(self.offer_embeddings.as_flat());
        EmbeddingStore::new(ids, EmbeddingMatrix::from_flat(self.request_embeddings.dim(), flat)?)
    }
}

/// Point reached from `p` after `dist_km` along initial `bearing` (radians).
pub fn destination(p: GeoPoint, bearing: f64, dist_km: f64) -> GeoPoint {
    let d = dist_km / EARTH_RADIUS_KM;
    let (lat1, lon1) = (p.lat().to_radians(), p.lon().to_radians());
    let lat2 = (lat1.sin() * d.cos() + lat1.cos() * d.sin() * bearing.cos()).clamp(-1.0, 1.0).asin();
    let lon2 = lon1 + (bearing.sin() * d.sin() * lat1.cos()).atan2(d.cos() - lat1.sin() * lat2.sin());
    let lon_deg = (lon2.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
    GeoPoint::new(lat2.to_degrees().clamp(-90.0, 90.0), lon_deg).expect("destination is in range")
}

fn secs(days: f64) -> i64 {
    (days * SECONDS_PER_DAY).round() as i64
}

struct Gen<'a> {
    spec: &'a GenSpec,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    fn bearing(&mut self) -> f64 {
        self.uniform(0.0, 2.0 * PI)
    }

    fn unit(&mut self) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..self.spec.embedding_dim).map(|_| StandardNormal.sample(&mut self.rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-9 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }

    /// A unit vector with cosine exactly `c` to unit vector `u`.
    fn at_cosine(&mut self, u: &[f64], c: f64) -> Vec<f32> {
        loop {
            let g = self.unit();
            let proj: f64 = g.iter().zip(u).map(|(a, b)| a * b).sum();
            let w: Vec<f64> = g.iter().zip(u).map(|(a, b)| a - proj * b).collect();
            let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                let s = (1.0 - c * c).max(0.0).sqrt();
                return u.iter().zip(&w).map(|(a, b)| (c * a + s * b / n) as f32).collect();
            }
        }
    }

    fn resource(&mut self) -> Resource {
        Resource::ALL[self.rng.random_range(0..Resource::ALL.len())]
    }

}

fn offer_post(id: String, pair: usize, label: OfferLabel, city: &str, res: Resource, ts: i64, geo: GeoPoint) -> Post {
    let mut p = Post::new(id, format!("[synthetic offer pair={pair} label={label} city={city}] offering {res} around {city}"))
        .with_kind(PostKind::Offer)
        .with_resource(res)
        .with_time(ts)
        .with_geo(geo);
    p.lang = "en".into();
    p.region = Some(city.to_string());
    p
}

pub fn generate_synthetic(spec: &GenSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut g = Gen { spec, rng: ChaCha8Rng::seed_from_u64(spec.seed) };
    let n_centers = spec.centers.len();
    let half_w = spec.distance_window_km / 2.0;
    let t_win = spec.time_window_days;
    let (dt, dd) = (spec.decay_time_days, spec.decay_distance_km);
    let spacing = secs(spec.slot_spacing_days());
    let dim = spec.embedding_dim;

    let mut requests = Vec::with_capacity(spec.n_pairs);
    let mut offers = Vec::new();
    let mut labels = Vec::new();
    let mut request_embeddings = EmbeddingMatrix::new(dim);
    let mut offer_embeddings = EmbeddingMatrix::new(dim);
    let mut truth = Vec::with_capacity(spec.n_pairs);
    let mut request_centers = Vec::with_capacity(spec.n_pairs);

    for i in 0..spec.n_pairs {
        let city_idx = i % n_centers;
        let (city, center) = (&spec.centers[city_idx].0, spec.centers[city_idx].1);
        let slot = (i / n_centers) as i64;
        let req_time = SYNTH_EPOCH + slot * spacing;
        let b = g.bearing();
        let r = g.uniform(0.0, half_w);
        let req_geo = destination(center, b, r);
        let res = g.resource();
        let u = g.unit();

        let req_id = format!("r{i:05}");
        let mut req = Post::new(req_id.clone(), format!("[synthetic request pair={i} city={city}] need {res} around {city}"))
            .with_kind(PostKind::Request)
            .with_resource(res)
            .with_time(req_time)
            .with_geo(req_geo);
        req.lang = "en".into();
        req.region = Some(city.clone());
        request_embeddings.push_normalized(&u.iter().map(|&x| x as f32).collect::<Vec<_>>())?;
        requests.push(req);
        request_centers.push(city_idx);

        // true offer
        let c_true = g.uniform(0.3, 0.9);
        let dt_true = secs(g.uniform(0.0, t_win));
        let b = g.bearing();
        let d_true = g.uniform(0.0, half_w);
        let true_geo = destination(req_geo, b, d_true);
        let offer_id = format!("o{i:05}");
        offers.push(offer_post(offer_id.clone(), i, OfferLabel::True, city, res, req_time + dt_true, true_geo));
        labels.push(OfferLabel::True);
        let v = g.at_cosine(&u, c_true);
        offer_embeddings.push_normalized(&v)?;
        truth.push(TruthPair { request_id: req_id, offer_id });

        for j in 0..spec.n_distractors_per_pair {
            let kind = DistractorKind::CYCLE[j % DistractorKind::CYCLE.len()];
            let high = |g: &mut Gen<'_>| c_true + (1.0 - c_true) * g.uniform(0.2, 0.9);
            let ring = |g: &mut Gen<'_>, around: GeoPoint| {
                let b = g.bearing();
                let r = g.uniform(dd + half_w + 1.0, 3.0 * dd + half_w);
                destination(around, b, r)
            };
            let (ts, geo, cos) = match kind {
                DistractorKind::TemporalOut => {
                    let b = g.bearing();
                    let geo = destination(req_geo, b, g.uniform(0.0, half_w));
                    let sign = if g.rng.random::<bool>() { 1 } else { -1 };
                    let off = secs(dt * g.uniform(1.2, 2.0));
                    (req_time + sign * off, geo, high(&mut g))
                }
                DistractorKind::SpatialOut => {
                    let geo = ring(&mut g, center);
                    let ts = req_time + secs(g.uniform(0.0, t_win));
                    (ts, geo, high(&mut g))
                }
                DistractorKind::HighCosineFar => {
                    let geo = if n_centers > 1 {
                        ring(&mut g, spec.centers[(city_idx + 1) % n_centers].1)
                    } else {
                        let b = g.bearing();
                        destination(center, b, g.uniform(1000.0, 1500.0))
                    };
                    let ts = req_time + secs(g.uniform(0.0, t_win));
                    (ts, geo, high(&mut g))
                }
                DistractorKind::LowSimIn => {
                    let b = g.bearing();
                    let d = d_true + g.uniform(0.0, (half_w - d_true).max(0.0));
                    let geo = destination(req_geo, b, d);
                    let span = (secs(t_win) - dt_true).max(0);
                    let ts = req_time + dt_true + g.rng.random_range(0..=span);
                    let cos = (c_true - spec.similarity_margin) * g.uniform(0.2, 0.9);
                    (ts, geo, cos)
                }
            };
            let label = OfferLabel::Distractor(kind);
            offers.push(offer_post(format!("d{i:05}-{j}"), i, label, city, g.resource(), ts, geo));
            labels.push(label);
            let v = g.at_cosine(&u, cos);
            offer_embeddings.push_normalized(&v)?;
        }
    }

    Ok(SyntheticCorpus {
        requests,
        offers,
        request_embeddings,
        offer_embeddings,
        truth: GroundTruth::from_pairs(truth)?,
        labels,
        request_centers,
    })
}
