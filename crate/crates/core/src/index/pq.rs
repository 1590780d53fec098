use rayon::prelude::*;

use super::dot;
use super::kmeans::{nearest, KMeans};

/// Per-subspace codebooks; each vector is stored as `m` one-byte codes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductQuantizer {
    m: usize,
    ksub: usize,
    dsub: usize,
    /// `m * ksub * dsub`: codebook `j`, centroid `c` at `(j * ksub + c) * dsub`.
    codebooks: Vec<f32>,
}

impl ProductQuantizer {
    pub(crate) fn from_parts(m: usize, ksub: usize, dsub: usize, codebooks: Vec<f32>) -> Self {
        Self { m, ksub, dsub, codebooks }
    }

    /// Trains one k-means codebook of `2^bits` centroids per subspace.
    pub fn train(data: &[f32], dim: usize, m: usize, bits: u32, iters: usize, seed: u64, warnings: &mut Vec<String>) -> Self {
        let n = data.len() / dim;
        let dsub = dim / m;
        let ksub = 1usize << bits;
        let books: Vec<KMeans> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut sub = Vec::with_capacity(n * dsub);
                for row in data.chunks_exact(dim) {
                    sub.extend_from_slice(&row[j * dsub..(j + 1) * dsub]);
                }
                KMeans::train(&sub, dsub, ksub, iters, seed.wrapping_add(1 + j as u64))
            })
            .collect();
        let mut codebooks = Vec::with_capacity(m * ksub * dsub);
        for (j, book) in books.iter().enumerate() {
            if book.degenerate {
                warnings.push(format!(
                    "degenerate k-means in PQ subspace {j}: fewer distinct points than {ksub} centroids"
                ));
            }
            codebooks.extend_from_slice(&book.centroids);
        }
        Self { m, ksub, dsub, codebooks }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ksub(&self) -> usize {
        self.ksub
    }

    pub fn dsub(&self) -> usize {
        self.dsub
    }

    /// Bytes stored per encoded vector.
    pub fn code_len(&self) -> usize {
        self.m
    }

    pub fn codebooks(&self) -> &[f32] {
        &self.codebooks
    }

    fn book(&self, j: usize) -> &[f32] {
        &self.codebooks[j * self.ksub * self.dsub..(j + 1) * self.ksub * self.dsub]
    }

    pub fn encode(&self, v: &[f32], out: &mut Vec<u8>) {
        for j in 0..self.m {
            let sub = &v[j * self.dsub..(j + 1) * self.dsub];
            out.push(nearest(self.book(j), self.dsub, sub) as u8);
        }
    }

    pub fn decode(&self, codes: &[u8]) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.m * self.dsub);
        for (j, &c) in codes.iter().enumerate() {
            let off = (j * self.ksub + c as usize) * self.dsub;
            out.extend_from_slice(&self.codebooks[off..off + self.dsub]);
        }
        out
    }

    /// Per-query lookup table of subspace inner products, `m * ksub` entries.
    pub fn query_table(&self, query: &[f32]) -> Vec<f32> {
        let mut table = Vec::with_capacity(self.m * self.ksub);
        for j in 0..self.m {
            let sub = &query[j * self.dsub..(j + 1) * self.dsub];
            for c in self.book(j).chunks_exact(self.dsub) {
                table.push(dot(sub, c));
            }
        }
        table
    }

    /// Asymmetric similarity: sum of table entries selected by `codes`.
    #[inline]
    pub fn adc(&self, table: &[f32], codes: &[u8]) -> f32 {
        table.chunks_exact(self.ksub).zip(codes).map(|(t, &c)| t[c as usize]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::testutil::random_unit;

    #[test]
    fn adc_equals_dot_with_reconstruction() {
        let m = random_unit(500, 16, 21);
        let mut w = Vec::new();
        let pq = ProductQuantizer::train(m.as_flat(), 16, 4, 4, 20, 3, &mut w);
        assert!(w.is_empty());
        let q = m.row(3);
        let table = pq.query_table(q);
        for r in 0..20 {
            let mut codes = Vec::new();
            pq.encode(m.row(r), &mut codes);
            let recon = pq.decode(&codes);
            let direct: f32 = q.iter().zip(&recon).map(|(a, b)| a * b).sum();
            assert!((pq.adc(&table, &codes) - direct).abs() < 1e-5);
        }
    }

    #[test]
    fn more_subspaces_reconstruct_better() {
        let m = random_unit(800, 32, 22);
        let err = |sub: usize| {
            let mut w = Vec::new();
            let pq = ProductQuantizer::train(m.as_flat(), 32, sub, 4, 20, 5, &mut w);
            m.rows()
                .map(|v| {
                    let mut c = Vec::new();
                    pq.encode(v, &mut c);
                    pq.decode(&c).iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f32>()
                })
                .sum::<f32>()
        };
        assert!(err(16) < err(4));
    }
}
