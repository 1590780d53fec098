//! Two-stage matching: textual retrieval from the offer index, then
//! re-scoring with temporal and spatial weights.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{BuildStats, IndexConfig, VectorIndex};
use crate::io::EmbeddingStore;
use crate::model::{EmbeddingMatrix, MatchMode, MatchParams, Post};
use crate::scoring::{cosine_similarity, score_with_text, ScoreBreakdown};

/// One ranked offer for a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchEntry {
    pub offer_id: String,
    pub rank: usize,
    #[serde(flatten)]
    pub breakdown: ScoreBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub request_id: String,
    pub matches: Vec<MatchEntry>,
}

/// min / max / mean of a set of millisecond samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub samples: usize,
}

impl TimingSummary {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        Self { min, max, mean, samples: samples.len() }
    }

    /// `min–max (mean)` with two decimals.
    pub fn display(&self) -> String {
        format!("{:.2}\u{2013}{:.2} ({:.2})", self.min, self.max, self.mean)
    }
}

/// Offers plus the index built over their embeddings; row `i` is `posts[i]`.
#[derive(Debug, Clone)]
pub struct OfferCorpus {
    posts: Vec<Post>,
    embeddings: EmbeddingMatrix,
    index: VectorIndex,
    build: BuildStats,
}

impl OfferCorpus {
    pub fn build(posts: Vec<Post>, embeddings: EmbeddingMatrix, config: &IndexConfig) -> Result<Self> {
        check_rows(&posts, &embeddings)?;
        let (index, build) = VectorIndex::build(&embeddings, config)?;
        Ok(Self { posts, embeddings, index, build })
    }

    /// Wraps a previously built (e.g. loaded) index.
    pub fn with_index(posts: Vec<Post>, embeddings: EmbeddingMatrix, index: VectorIndex) -> Result<Self> {
        check_rows(&posts, &embeddings)?;
        if index.len() != posts.len() || index.dim() != embeddings.dim() {
            return Err(Error::CorpusMismatch(format!(
                "index holds {}x{}, offers are {}x{}",
                index.len(),
                index.dim(),
                posts.len(),
                embeddings.dim()
            )));
        }
        Ok(Self { posts, embeddings, index, build: BuildStats::default() })
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn index_mut(&mut self) -> &mut VectorIndex {
        &mut self.index
    }

    pub fn build_stats(&self) -> &BuildStats {
        &self.build
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }
}

fn check_rows(posts: &[Post], embeddings: &EmbeddingMatrix) -> Result<()> {
    if posts.is_empty() {
        return Err(Error::EmptyOfferCorpus);
    }
    if posts.len() != embeddings.len() {
        return Err(Error::CorpusMismatch(format!(
            "{} offers but {} embedding rows",
            posts.len(),
            embeddings.len()
        )));
    }
    Ok(())
}

fn require_mode_fields(post: &Post, mode: MatchMode) -> Result<()> {
    if mode.needs_geo() && post.geo.is_none() {
        return Err(Error::MissingGeo(post.id.clone()));
    }
    if mode.needs_time() && post.time().is_none() {
        return Err(Error::MissingTime(post.id.clone()));
    }
    Ok(())
}

/// Ranks offers for one request.
pub fn match_one(request: &Post, request_emb: &[f32], offers: &OfferCorpus, params: &MatchParams) -> Result<MatchResult> {
    params.validate()?;
    match_one_unchecked(request, request_emb, offers, params)
}

fn match_one_unchecked(request: &Post, request_emb: &[f32], offers: &OfferCorpus, params: &MatchParams) -> Result<MatchResult> {
    require_mode_fields(request, params.mode)?;
    let k = params.k.min(offers.len());
    let hits = match (params.filter_resource, request.resource) {
        (true, Some(res)) => {
            let same = |row: usize| offers.posts[row].resource == Some(res);
            offers.index.search_filtered(request_emb, k, Some(&same))?
        }
        _ => offers.index.search(request_emb, k)?,
    };

    let mut scored = Vec::with_capacity(hits.len());
    for hit in hits {
        let offer = &offers.posts[hit.offer_row];
        let s_text = cosine_similarity(request_emb, offers.embeddings.row(hit.offer_row))?;
        let b = score_with_text(request, offer, s_text, params)?;
        if params.mode == MatchMode::Tts && b.s_overall <= 0.0 {
            continue;
        }
        scored.push((offer, b));
    }
    scored.sort_by(|a, b| {
        b.1.s_overall
            .partial_cmp(&a.1.s_overall)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.0.id.cmp(&b.0.id))
    });
    scored.truncate(params.top_n);
    let matches = scored
        .into_iter()
        .enumerate()
        .map(|(i, (offer, breakdown))| MatchEntry { offer_id: offer.id.clone(), rank: i + 1, breakdown })
        .collect();
    Ok(MatchResult { request_id: request.id.clone(), matches })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub params: MatchParams,
    pub index: IndexConfig,
    pub index_time_ms: f64,
    pub build_warnings: Vec<String>,
    pub search_ms: TimingSummary,
    pub requests: usize,
    pub offers: usize,
    /// Requests with at least one match.
    pub matched_requests: usize,
    pub total_matches: usize,
}

/// Matches every request against a prepared offer corpus, in parallel on the
/// current rayon pool. Results keep request input order.
pub fn match_requests(
    requests: &[Post],
    request_embs: &EmbeddingMatrix,
    offers: &OfferCorpus,
    params: &MatchParams,
) -> Result<(Vec<MatchResult>, RunReport)> {
    params.validate()?;
    if requests.len() != request_embs.len() {
        return Err(Error::CorpusMismatch(format!(
            "{} requests but {} embedding rows",
            requests.len(),
            request_embs.len()
        )));
    }
    if !request_embs.is_empty() && request_embs.dim() != offers.embeddings.dim() {
        return Err(Error::DimensionMismatch { expected: offers.embeddings.dim(), got: request_embs.dim() });
    }
    let offer_ids: HashSet<&str> = offers.posts.iter().map(|p| p.id.as_str()).collect();
    if let Some(dup) = requests.iter().find(|r| offer_ids.contains(r.id.as_str())) {
        return Err(Error::InvalidPost(dup.id.clone(), "id appears in both request and offer corpora".into()));
    }

    let timed: Vec<(MatchResult, f64)> = requests
        .par_iter()
        .enumerate()
        .map(|(i, req)| {
            let start = Instant::now();
            let r = match_one_unchecked(req, request_embs.row(i), offers, params)?;
            Ok((r, start.elapsed().as_secs_f64() * 1e3))
        })
        .collect::<Result<_>>()?;

    let times: Vec<f64> = timed.iter().map(|t| t.1).collect();
    let results: Vec<MatchResult> = timed.into_iter().map(|t| t.0).collect();
    let report = RunReport {
        params: params.clone(),
        index: offers.index.config().clone(),
        index_time_ms: offers.build.index_time_ms,
        build_warnings: offers.build.warnings.clone(),
        search_ms: TimingSummary::from_samples(&times),
        requests: requests.len(),
        offers: offers.len(),
        matched_requests: results.iter().filter(|r| !r.matches.is_empty()).count(),
        total_matches: results.iter().map(|r| r.matches.len()).sum(),
    };
    Ok((results, report))
}

/// End to end: joins embeddings by id, builds one offer index, matches all requests.
pub fn match_all(
    requests: &[Post],
    offers: &[Post],
    store: &EmbeddingStore,
    params: &MatchParams,
    index_config: &IndexConfig,
) -> Result<(Vec<MatchResult>, RunReport)> {
    params.validate()?;
    if offers.is_empty() {
        return Err(Error::EmptyOfferCorpus);
    }
    let missing: Vec<String> = requests
        .iter()
        .chain(offers)
        .filter(|p| store.row_of(&p.id).is_none())
        .map(|p| p.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::EmbeddingMissing(missing));
    }
    let request_embs = store.gather(requests)?;
    let offer_embs = store.gather(offers)?;
    let corpus = OfferCorpus::build(offers.to_vec(), offer_embs, index_config)?;
    match_requests(requests, &request_embs, &corpus, params)
}
