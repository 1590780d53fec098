//! Domain types shared by every pipeline stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
            return Err(Error::InvalidRange(format!("latitude {lat} outside [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&lon) || !lon.is_finite() {
            return Err(Error::InvalidRange(format!("longitude {lon} outside [-180, 180]")));
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostKind {
    #[default]
    Unlabeled,
    PotentialCandidate,
    Request,
    Offer,
    Other,
}

impl PostKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PostKind::Unlabeled => "unlabeled",
            PostKind::PotentialCandidate => "potential_candidate",
            PostKind::Request => "request",
            PostKind::Offer => "offer",
            PostKind::Other => "other",
        }
    }
}

impl FromStr for PostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unlabeled" | "" => Ok(PostKind::Unlabeled),
            "potential_candidate" | "potential" | "candidate" => Ok(PostKind::PotentialCandidate),
            "request" => Ok(PostKind::Request),
            "offer" => Ok(PostKind::Offer),
            "other" => Ok(PostKind::Other),
            other => Err(Error::InvalidParams(format!("unknown post kind `{other}`"))),
        }
    }
}

/// Resource categories a request or offer can be about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    Money,
    Volunteer,
    Cloth,
    Shelter,
    Medical,
    Food,
}

impl Resource {
    pub const ALL: [Resource; 6] = [
        Resource::Money,
        Resource::Volunteer,
        Resource::Cloth,
        Resource::Shelter,
        Resource::Medical,
        Resource::Food,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Resource::Money => "money",
            Resource::Volunteer => "volunteer",
            Resource::Cloth => "cloth",
            Resource::Shelter => "shelter",
            Resource::Medical => "medical",
            Resource::Food => "food",
        }
    }
}

impl FromStr for Resource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Resource::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown resource `{s}`")))
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One social-media record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PostRecord", into = "PostRecord")]
pub struct Post {
    pub id: String,
    pub text: String,
    pub lang: String,
    /// Publication time, UTC epoch seconds.
    pub timestamp: Option<i64>,
    pub geo: Option<GeoPoint>,
    pub kind: PostKind,
    pub resource: Option<Resource>,
    /// Grouping keys supplied at ingestion; used by the O:R analytics only.
    pub country: Option<String>,
    pub region: Option<String>,
}

impl Post {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            lang: "und".to_string(),
            timestamp: None,
            geo: None,
            kind: PostKind::Unlabeled,
            resource: None,
            country: None,
            region: None,
        }
    }

    pub fn with_time(mut self, ts: i64) -> Self {
        self.timestamp = Some(ts);
        self
    }

    pub fn with_geo(mut self, geo: GeoPoint) -> Self {
        self.geo = Some(geo);
        self
    }

    pub fn with_kind(mut self, kind: PostKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_resource(mut self, resource: Resource) -> Self {
        self.resource = Some(resource);
        self
    }

    /// Timestamp, treating zero as absent.
    pub fn time(&self) -> Option<i64> {
        self.timestamp.filter(|&t| t != 0)
    }
}

/// The JSON-lines wire shape of a [`Post`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PostRecord {
    id: String,
    text: String,
    #[serde(default = "default_lang")]
    lang: String,
    #[serde(default)]
    ts: Option<i64>,
    #[serde(default)]
    lat: Option<f64>,
    #[serde(default)]
    lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resource: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    region: Option<String>,
}

fn default_lang() -> String {
    "und".to_string()
}

impl TryFrom<PostRecord> for Post {
    type Error = Error;

    fn try_from(r: PostRecord) -> Result<Self> {
        let geo = match (r.lat, r.lon) {
            (Some(lat), Some(lon)) => Some(GeoPoint::new(lat, lon)?),
            (None, None) => None,
            _ => {
                return Err(Error::InvalidRange(format!(
                    "post `{}` has only one of lat/lon",
                    r.id
                )))
            }
        };
        let kind = match r.kind.as_deref() {
            Some(k) => k.parse()?,
            None => PostKind::Unlabeled,
        };
        let resource = r.resource.as_deref().map(str::parse).transpose()?;
        Ok(Post {
            id: r.id,
            text: r.text,
            lang: r.lang,
            timestamp: r.ts,
            geo,
            kind,
            resource,
            country: r.country,
            region: r.region,
        })
    }
}

impl From<Post> for PostRecord {
    fn from(p: Post) -> Self {
        PostRecord {
            id: p.id,
            text: p.text,
            lang: p.lang,
            ts: p.timestamp,
            lat: p.geo.map(|g| g.lat),
            lon: p.geo.map(|g| g.lon),
            kind: Some(p.kind.as_str().to_string()),
            resource: p.resource.map(|r| r.as_str().to_string()),
            country: p.country,
            region: p.region,
        }
    }
}

/// Checks required fields and invariants, returning the post unchanged on success.
pub fn validate_post(post: Post, require_geo: bool, require_time: bool) -> Result<Post> {
    if post.id.is_empty() {
        return Err(Error::InvalidPost(post.id, "empty id".into()));
    }
    if post.text.trim().is_empty() {
        return Err(Error::InvalidPost(post.id, "empty text".into()));
    }
    if let Some(g) = post.geo {
        // GeoPoint fields are private, but a deserialized or hand-built value
        // still goes through the same range check.
        GeoPoint::new(g.lat, g.lon)?;
    }
    if post.resource.is_some() && !matches!(post.kind, PostKind::Request | PostKind::Offer) {
        return Err(Error::InvalidPost(
            post.id,
            "resource set on a post that is neither request nor offer".into(),
        ));
    }
    if require_geo && post.geo.is_none() {
        return Err(Error::MissingGeo(post.id));
    }
    if require_time && post.time().is_none() {
        return Err(Error::MissingTime(post.id));
    }
    Ok(post)
}

/// Scales `values` to unit Euclidean norm, accumulating in f64.
pub fn normalize(values: &[f32]) -> Result<Vec<f32>> {
    let norm = values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(values.iter().map(|&v| (f64::from(v) / norm) as f32).collect())
}

/// A unit-normalized embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    pub fn new(values: &[f32]) -> Result<Self> {
        normalize(values).map(Embedding)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

impl AsRef<[f32]> for Embedding {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// Row-major matrix of embeddings sharing one dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParams("embedding dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Format(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from rows, normalizing each one.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut m = Self::new(dim);
        for r in rows {
            m.push_normalized(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_normalized(&mut self, row: &[f32]) -> Result<()> {
        if self.dim == 0 && self.data.is_empty() {
            self.dim = row.len();
        }
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: row.len() });
        }
        self.data.extend(normalize(row)?);
        Ok(())
    }

    /// Appends a row verbatim; caller guarantees it is already normalized.
    pub fn push_raw(&mut self, row: &[f32]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: row.len() });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// Normalizes every row in place.
    pub fn normalize_rows(&mut self) -> Result<()> {
        let dim = self.dim;
        for row in self.data.chunks_exact_mut(dim) {
            let n = normalize(row)?;
            row.copy_from_slice(&n);
        }
        Ok(())
    }

    /// Copies the selected rows, in order, into a new matrix.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self { dim: self.dim, data }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Textual similarity only.
    T,
    /// Linear blend of textual similarity and spatial weight.
    Ts,
    /// Textual similarity times temporal and spatial weights.
    Tts,
}

impl MatchMode {
    pub fn needs_geo(&self) -> bool {
        matches!(self, MatchMode::Ts | MatchMode::Tts)
    }

    pub fn needs_time(&self) -> bool {
        matches!(self, MatchMode::Tts)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MatchMode::T => "t",
            MatchMode::Ts => "ts",
            MatchMode::Tts => "tts",
        }
    }
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t" => Ok(MatchMode::T),
            "ts" => Ok(MatchMode::Ts),
            "tts" => Ok(MatchMode::Tts),
            other => Err(Error::InvalidParams(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Matching hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    /// Maximum allowable waiting time, days.
    pub delta_time: f64,
    /// Maximum allowable distance, kilometers.
    pub delta_distance: f64,
    /// Candidate pool size retrieved from the index.
    pub k: usize,
    pub top_n: usize,
    pub mode: MatchMode,
    /// Weight on textual similarity in TS mode.
    pub ts_alpha: f64,
    pub earth_radius_km: f64,
    /// Restrict retrieval to offers sharing the request's resource category.
    #[serde(default)]
    pub filter_resource: bool,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            delta_time: 30.0,
            delta_distance: 10.0,
            k: 100,
            top_n: 3,
            mode: MatchMode::Tts,
            ts_alpha: 0.5,
            earth_radius_km: EARTH_RADIUS_KM,
            filter_resource: false,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_time > 0.0) {
            return Err(Error::NonPositiveDelta("delta_time"));
        }
        if !(self.delta_distance > 0.0) {
            return Err(Error::NonPositiveDelta("delta_distance"));
        }
        if self.k == 0 || self.top_n == 0 {
            return Err(Error::InvalidParams("k and top_n must be positive".into()));
        }
        if self.top_n > self.k {
            return Err(Error::InvalidParams(format!(
                "top_n ({}) must not exceed k ({})",
                self.top_n, self.k
            )));
        }
        if !(0.0..=1.0).contains(&self.ts_alpha) {
            return Err(Error::InvalidParams(format!("ts_alpha {} outside [0, 1]", self.ts_alpha)));
        }
        if !(self.earth_radius_km > 0.0) {
            return Err(Error::NonPositiveDelta("earth_radius_km"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geo_range_checks() {
        assert!(GeoPoint::new(-37.81, 144.96).is_ok());
        assert!(matches!(GeoPoint::new(91.0, 0.0), Err(Error::InvalidRange(_))));
        assert!(matches!(GeoPoint::new(0.0, -180.5), Err(Error::InvalidRange(_))));
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn validate_post_cases() {
        let melbourne = GeoPoint::new(-37.81, 144.96).unwrap();
        let p = Post::new("p1", "need water").with_geo(melbourne).with_time(1_700_000_000);
        assert_eq!(validate_post(p.clone(), true, true).unwrap(), p);

        let no_geo = Post::new("p2", "need water");
        assert!(matches!(validate_post(no_geo.clone(), true, false), Err(Error::MissingGeo(id)) if id == "p2"));
        assert!(validate_post(no_geo.clone(), false, false).is_ok());
        assert!(matches!(validate_post(no_geo.with_time(0), false, true), Err(Error::MissingTime(_))));

        let bad: std::result::Result<Post, _> =
            serde_json::from_str(r#"{"id":"p3","text":"x","ts":1,"lat":91,"lon":0}"#);
        assert!(bad.unwrap_err().to_string().contains("latitude"));
    }

    #[test]
    fn resource_only_on_requests_and_offers() {
        let p = Post::new("p", "x").with_resource(Resource::Food);
        assert!(matches!(validate_post(p, false, false), Err(Error::InvalidPost(..))));
    }

    #[test]
    fn post_json_round_trip() {
        let line = r#"{"id":"a","text":"hi","lang":"en","ts":5,"lat":1.5,"lon":2.5,"kind":"offer","resource":"food"}"#;
        let p: Post = serde_json::from_str(line).unwrap();
        assert_eq!(p.kind, PostKind::Offer);
        assert_eq!(p.resource, Some(Resource::Food));
        let back: Post = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(p, back);

        let minimal: Post = serde_json::from_str(r#"{"id":"b","text":"t","lat":null,"lon":null}"#).unwrap();
        assert_eq!(minimal.lang, "und");
        assert!(minimal.geo.is_none() && minimal.timestamp.is_none());
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(matches!(normalize(&[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn params_validation() {
        assert!(MatchParams::default().validate().is_ok());
        let p = MatchParams { top_n: 5, k: 3, ..Default::default() };
        assert!(p.validate().is_err());
        let p = MatchParams { delta_time: 0.0, ..Default::default() };
        assert!(matches!(p.validate(), Err(Error::NonPositiveDelta("delta_time"))));
        let p = MatchParams { ts_alpha: 1.5, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
