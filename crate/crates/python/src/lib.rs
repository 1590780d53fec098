//! Python bindings. Posts, results and ground truth cross the boundary as
//! plain dicts with the same field names as the JSONL files.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crema_core::eval::{self, GenSpec, GroundTruth, TruthPair};
use crema_core::filter::RegexSet;
use crema_core::index::{self as cindex, BackendKind};
use crema_core::io;
use crema_core::matching::{self, MatchResult, OfferCorpus};
use crema_core::model::{EmbeddingMatrix, GeoPoint, MatchMode, Post};
use crema_core::{scoring, text};

fn err(e: crema_core::Error) -> PyErr {
    match e {
        crema_core::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let s: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&s).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn matrix(rows: Vec<Vec<f32>>, normalize: bool) -> PyResult<EmbeddingMatrix> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut m = EmbeddingMatrix::new(dim);
    for r in &rows {
        if normalize {
            m.push_normalized(r).map_err(err)?;
        } else {
            m.push_raw(r).map_err(err)?;
        }
    }
    Ok(m)
}

fn rows(m: &EmbeddingMatrix) -> Vec<Vec<f32>> {
    m.rows().map(<[f32]>::to_vec).collect()
}

#[pyclass(name = "MatchParams", from_py_object)]
#[derive(Clone)]
struct PyMatchParams(crema_core::MatchParams);

#[pymethods]
impl PyMatchParams {
    #[new]
    #[pyo3(signature = (mode="tts", delta_time=30.0, delta_distance=10.0, k=100, top_n=3, ts_alpha=0.5, earth_radius_km=6371.0, filter_resource=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        mode: &str,
        delta_time: f64,
        delta_distance: f64,
        k: usize,
        top_n: usize,
        ts_alpha: f64,
        earth_radius_km: f64,
        filter_resource: bool,
    ) -> PyResult<Self> {
        let mode: MatchMode = mode.parse().map_err(err)?;
        let p = crema_core::MatchParams { mode, delta_time, delta_distance, k, top_n, ts_alpha, earth_radius_km, filter_resource };
        p.validate().map_err(err)?;
        Ok(Self(p))
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.0.mode.as_str()
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.k
    }

    #[getter]
    fn top_n(&self) -> usize {
        self.0.top_n
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "IndexConfig", from_py_object)]
#[derive(Clone)]
struct PyIndexConfig(cindex::IndexConfig);

#[pymethods]
impl PyIndexConfig {
    #[new]
    #[pyo3(signature = (backend="exhaustive", partitions=3, nprobe=2, pq_m=8, pq_bits=4, hnsw_m=16, ef_construction=200, ef_search=64, kmeans_iters=25, seed=42))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        backend: &str,
        partitions: usize,
        nprobe: usize,
        pq_m: usize,
        pq_bits: u32,
        hnsw_m: usize,
        ef_construction: usize,
        ef_search: usize,
        kmeans_iters: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let backend: BackendKind = backend.parse().map_err(err)?;
        Ok(Self(cindex::IndexConfig {
            backend,
            ivf_partitions: partitions,
            ivf_nprobe: nprobe,
            pq_m,
            pq_bits,
            hnsw_m,
            hnsw_ef_construction: ef_construction,
            hnsw_ef_search: ef_search,
            kmeans_iters,
            seed,
        }))
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "VectorIndex")]
struct PyVectorIndex(cindex::VectorIndex);

#[pymethods]
impl PyVectorIndex {
    /// Builds over `embeddings`, normalizing each row.
    #[new]
    #[pyo3(signature = (embeddings, config=None))]
    fn new(embeddings: Vec<Vec<f32>>, config: Option<PyIndexConfig>) -> PyResult<Self> {
        let m = matrix(embeddings, true)?;
        let config = config.map(|c| c.0).unwrap_or_default();
        let (index, _) = cindex::VectorIndex::build(&m, &config).map_err(err)?;
        Ok(Self(index))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        cindex::VectorIndex::load(path).map(Self).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// `(row, similarity)` pairs, best first.
    fn search(&self, query: Vec<f32>, k: usize) -> PyResult<Vec<(usize, f32)>> {
        let q = crema_core::model::normalize(&query).map_err(err)?;
        let hits = self.0.search(&q, k).map_err(err)?;
        Ok(hits.into_iter().map(|h| (h.offer_row, h.similarity)).collect())
    }

    #[pyo3(signature = (nprobe=None, ef_search=None))]
    fn set_search_params(&mut self, nprobe: Option<usize>, ef_search: Option<usize>) -> PyResult<()> {
        self.0.set_search_params(nprobe, ef_search).map_err(err)
    }
}

#[pyfunction]
fn preprocess_text(raw: &str) -> String {
    text::preprocess_text(raw)
}

/// Ids of the built-in patterns that match `text`.
#[pyfunction]
fn pattern_matches(text: &str) -> Vec<u32> {
    RegexSet::builtin().matching_ids(text)
}

#[pyfunction]
#[pyo3(signature = (lat1, lon1, lat2, lon2, radius_km=6371.0))]
fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64, radius_km: f64) -> PyResult<f64> {
    let p = GeoPoint::new(lat1, lon1).map_err(err)?;
    let q = GeoPoint::new(lat2, lon2).map_err(err)?;
    Ok(scoring::haversine_km(p, q, radius_km))
}

/// Score breakdown for one request/offer pair of post dicts.
#[pyfunction]
#[pyo3(signature = (request, request_embedding, offer, offer_embedding, params=None))]
fn score_pair<'py>(
    request: &Bound<'py, PyAny>,
    request_embedding: Vec<f32>,
    offer: &Bound<'py, PyAny>,
    offer_embedding: Vec<f32>,
    params: Option<PyMatchParams>,
) -> PyResult<Bound<'py, PyAny>> {
    let (r, o): (Post, Post) = (from_py(request)?, from_py(offer)?);
    let params = params.map(|p| p.0).unwrap_or_default();
    let b = scoring::score_pair(&r, &request_embedding, &o, &offer_embedding, &params).map_err(err)?;
    to_py(request.py(), &b)
}

/// Matches every request against the offers; returns result dicts in request order.
#[pyfunction]
#[pyo3(signature = (requests, request_embeddings, offers, offer_embeddings, params=None, index=None))]
fn match_posts<'py>(
    py: Python<'py>,
    requests: &Bound<'py, PyAny>,
    request_embeddings: Vec<Vec<f32>>,
    offers: &Bound<'py, PyAny>,
    offer_embeddings: Vec<Vec<f32>>,
    params: Option<PyMatchParams>,
    index: Option<PyIndexConfig>,
) -> PyResult<Bound<'py, PyAny>> {
    let requests: Vec<Post> = from_py(requests)?;
    let offers: Vec<Post> = from_py(offers)?;
    let (re, oe) = (matrix(request_embeddings, true)?, matrix(offer_embeddings, true)?);
    let params = params.map(|p| p.0).unwrap_or_default();
    let config = index.map(|c| c.0).unwrap_or_default();
    let results = py
        .detach(|| {
            let corpus = OfferCorpus::build(offers, oe, &config)?;
            matching::match_requests(&requests, &re, &corpus, &params)
        })
        .map_err(err)?
        .0;
    to_py(py, &results)
}

/// Fraction of results whose true offer is ranked within the first `n`.
#[pyfunction]
fn topn_accuracy(results: &Bound<'_, PyAny>, truth: std::collections::BTreeMap<String, String>, n: usize) -> PyResult<f64> {
    let results: Vec<MatchResult> = from_py(results)?;
    let truth = GroundTruth::from_pairs(truth.into_iter().map(|(request_id, offer_id)| TruthPair { request_id, offer_id }))
        .map_err(err)?;
    eval::topn_accuracy(&results, &truth, n).map_err(err)
}

/// Synthetic corpus as a dict: requests, offers, embeddings, truth and labels.
#[pyfunction]
#[pyo3(signature = (n_pairs=500, n_distractors=5, dim=64, seed=42))]
fn generate_synthetic(py: Python<'_>, n_pairs: usize, n_distractors: usize, dim: usize, seed: u64) -> PyResult<Bound<'_, PyAny>> {
    let spec = GenSpec { n_pairs, n_distractors_per_pair: n_distractors, embedding_dim: dim, seed, ..Default::default() };
    let c = eval::generate_synthetic(&spec).map_err(err)?;
    let truth: std::collections::BTreeMap<String, String> =
        c.truth.to_pairs().into_iter().map(|p| (p.request_id, p.offer_id)).collect();
    let labels: Vec<&str> = c.labels.iter().map(|l| l.as_str()).collect();
    let out = serde_json::json!({
        "requests": c.requests,
        "offers": c.offers,
        "request_embeddings": rows(&c.request_embeddings),
        "offer_embeddings": rows(&c.offer_embeddings),
        "truth": truth,
        "labels": labels,
    });
    to_py(py, &out)
}

#[pyfunction]
fn read_embeddings(path: &str) -> PyResult<Vec<Vec<f32>>> {
    io::read_embeddings(path).map(|m| rows(&m)).map_err(err)
}

/// Writes rows as-is, without normalizing.
#[pyfunction]
fn write_embeddings(path: &str, embeddings: Vec<Vec<f32>>) -> PyResult<()> {
    io::write_embeddings(path, &matrix(embeddings, false)?).map_err(err)
}

#[pymodule]
fn crema(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatchParams>()?;
    m.add_class::<PyIndexConfig>()?;
    m.add_class::<PyVectorIndex>()?;
    m.add_function(wrap_pyfunction!(preprocess_text, m)?)?;
    m.add_function(wrap_pyfunction!(pattern_matches, m)?)?;
    m.add_function(wrap_pyfunction!(haversine_km, m)?)?;
    m.add_function(wrap_pyfunction!(score_pair, m)?)?;
    m.add_function(wrap_pyfunction!(match_posts, m)?)?;
    m.add_function(wrap_pyfunction!(topn_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(read_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(write_embeddings, m)?)?;
    Ok(())
}
