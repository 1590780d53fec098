use super::kmeans::{l2_sq, KMeans};
use super::pq::ProductQuantizer;
use super::{dot, IndexConfig, RowFilter, SearchHit, TopK};
use crate::model::EmbeddingMatrix;

/// Coarse k-means partition with one posting list per centroid.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Coarse {
    pub dim: usize,
    pub centroids: Vec<f32>,
    pub lists: Vec<Vec<u32>>,
}

impl Coarse {
    fn train(embeddings: &EmbeddingMatrix, config: &IndexConfig, warnings: &mut Vec<String>) -> Self {
        let dim = embeddings.dim();
        let km = KMeans::train(embeddings.as_flat(), dim, config.ivf_partitions, config.kmeans_iters, config.seed);
        if km.degenerate {
            warnings.push(format!(
                "degenerate k-means for IVF: fewer distinct points than {} partitions",
                config.ivf_partitions
            ));
        }
        let mut lists = vec![Vec::new(); config.ivf_partitions];
        for (row, v) in embeddings.rows().enumerate() {
            lists[km.nearest(v)].push(row as u32);
        }
        Self { dim, centroids: km.centroids, lists }
    }

    /// The `nprobe` cells nearest to `query`, closest first.
    pub fn probe(&self, query: &[f32], nprobe: usize) -> Vec<usize> {
        let mut cells: Vec<(f32, usize)> = self
            .centroids
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(c, cent)| (l2_sq(query, cent), c))
            .collect();
        cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cells.into_iter().take(nprobe).map(|(_, c)| c).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.lists.iter().map(Vec::len).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Ivf {
    pub(crate) coarse: Coarse,
    pub(crate) vectors: EmbeddingMatrix,
    // vectors regrouped per list, for sequential scans
    list_vectors: Vec<Vec<f32>>,
}

impl Ivf {
    pub(crate) fn build(embeddings: &EmbeddingMatrix, config: &IndexConfig, warnings: &mut Vec<String>) -> Self {
        let coarse = Coarse::train(embeddings, config, warnings);
        Self::from_parts(coarse, embeddings.clone())
    }

    pub(crate) fn from_parts(coarse: Coarse, vectors: EmbeddingMatrix) -> Self {
        let list_vectors = coarse
            .lists
            .iter()
            .map(|l| l.iter().flat_map(|&r| vectors.row(r as usize).iter().copied()).collect())
            .collect();
        Self { coarse, vectors, list_vectors }
    }

    pub fn list_sizes(&self) -> Vec<usize> {
        self.coarse.sizes()
    }

    pub(crate) fn search(&self, query: &[f32], k: usize, nprobe: usize, filter: Option<RowFilter<'_>>) -> Vec<SearchHit> {
        let dim = self.coarse.dim;
        let mut top = TopK::new(k);
        for cell in self.coarse.probe(query, nprobe) {
            let rows = &self.coarse.lists[cell];
            for (&row, v) in rows.iter().zip(self.list_vectors[cell].chunks_exact(dim)) {
                if filter.is_none_or(|f| f(row as usize)) {
                    top.push(dot(query, v), row);
                }
            }
        }
        top.into_hits()
    }
}

#[derive(Debug, Clone)]
pub struct IvfPq {
    pub(crate) coarse: Coarse,
    pub(crate) pq: ProductQuantizer,
    /// Row-major codes, `n * m` bytes.
    pub(crate) codes: Vec<u8>,
    list_codes: Vec<Vec<u8>>,
}

impl IvfPq {
    pub(crate) fn build(embeddings: &EmbeddingMatrix, config: &IndexConfig, warnings: &mut Vec<String>) -> Self {
        let coarse = Coarse::train(embeddings, config, warnings);
        let pq = ProductQuantizer::train(
            embeddings.as_flat(),
            embeddings.dim(),
            config.pq_m,
            config.pq_bits,
            config.kmeans_iters,
            config.seed,
            warnings,
        );
        let mut codes = Vec::with_capacity(embeddings.len() * pq.code_len());
        for v in embeddings.rows() {
            pq.encode(v, &mut codes);
        }
        Self::from_parts(coarse, pq, codes)
    }

    pub(crate) fn from_parts(coarse: Coarse, pq: ProductQuantizer, codes: Vec<u8>) -> Self {
        let m = pq.code_len();
        let list_codes = coarse
            .lists
            .iter()
            .map(|l| l.iter().flat_map(|&r| codes[r as usize * m..(r as usize + 1) * m].iter().copied()).collect())
            .collect();
        Self { coarse, pq, codes, list_codes }
    }

    pub fn pq(&self) -> &ProductQuantizer {
        &self.pq
    }

    pub fn ivf_list_sizes(&self) -> Vec<usize> {
        self.coarse.sizes()
    }

    pub(crate) fn search(&self, query: &[f32], k: usize, nprobe: usize, filter: Option<RowFilter<'_>>) -> Vec<SearchHit> {
        let m = self.pq.code_len();
        let table = self.pq.query_table(query);
        let mut top = TopK::new(k);
        for cell in self.coarse.probe(query, nprobe) {
            let rows = &self.coarse.lists[cell];
            for (&row, codes) in rows.iter().zip(self.list_codes[cell].chunks_exact(m)) {
                if filter.is_none_or(|f| f(row as usize)) {
                    top.push(self.pq.adc(&table, codes), row);
                }
            }
        }
        top.into_hits()
    }
}
