//! Seeded k-means with k-means++ seeding, used for IVF cells and PQ codebooks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub dim: usize,
    /// `k * dim`, row-major.
    pub centroids: Vec<f32>,
    /// Fewer distinct points than centroids; some centroids duplicate points.
    pub degenerate: bool,
}

#[inline]
pub fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            let d = x[i] - y[i];
            acc[i] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

impl KMeans {
    pub fn k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    /// Index of the nearest centroid; ties resolve to the lower index.
    pub fn nearest(&self, v: &[f32]) -> usize {
        nearest(&self.centroids, self.dim, v)
    }

    /// Trains `k` centroids over `data` (`n * dim`, row-major).
    ///
    /// Panics if `data` holds fewer than one row or `k == 0`.
    pub fn train(data: &[f32], dim: usize, k: usize, iters: usize, seed: u64) -> Self {
        let n = data.len() / dim;
        assert!(n > 0 && k > 0, "k-means needs data and at least one centroid");
        let row = |i: usize| &data[i * dim..(i + 1) * dim];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        // k-means++ seeding
        let mut centroids = Vec::with_capacity(k * dim);
        let mut degenerate = false;
        let first = rng.random_range(0..n);
        centroids.extend_from_slice(row(first));
        let mut d2: Vec<f64> = (0..n).map(|i| f64::from(l2_sq(row(i), row(first)))).collect();
        for _ in 1..k {
            let total: f64 = d2.iter().sum();
            let pick = if total <= 0.0 {
                degenerate = true;
                rng.random_range(0..n)
            } else {
                let mut target = rng.random::<f64>() * total;
                let mut chosen = n - 1;
                for (i, &w) in d2.iter().enumerate() {
                    if target < w {
                        chosen = i;
                        break;
                    }
                    target -= w;
                }
                chosen
            };
            let c = row(pick).to_vec();
            for (i, d) in d2.iter_mut().enumerate() {
                *d = d.min(f64::from(l2_sq(row(i), &c)));
            }
            centroids.extend_from_slice(&c);
        }

        // Lloyd iterations
        let mut assign = vec![usize::MAX; n];
        for _ in 0..iters {
            let next: Vec<usize> = data.par_chunks_exact(dim).map(|v| nearest(&centroids, dim, v)).collect();
            if next == assign {
                break;
            }
            assign = next;
            let mut sums = vec![0.0f64; k * dim];
            let mut counts = vec![0usize; k];
            for (i, &c) in assign.iter().enumerate() {
                counts[c] += 1;
                for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(row(i)) {
                    *s += f64::from(v);
                }
            }
            for c in 0..k {
                // an empty cell keeps its previous centroid
                if counts[c] > 0 {
                    for j in 0..dim {
                        centroids[c * dim + j] = (sums[c * dim + j] / counts[c] as f64) as f32;
                    }
                }
            }
        }
        Self { dim, centroids, degenerate }
    }
}

pub fn nearest(centroids: &[f32], dim: usize, v: &[f32]) -> usize {
    let mut best = 0;
    let mut best_d = f32::INFINITY;
    for (c, cent) in centroids.chunks_exact(dim).enumerate() {
        let d = l2_sq(v, cent);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let mut data = Vec::new();
        for i in 0..50 {
            let e = i as f32 * 1e-3;
            data.extend_from_slice(&[1.0 + e, 0.0]);
            data.extend_from_slice(&[-1.0 - e, 0.0]);
        }
        let km = KMeans::train(&data, 2, 2, 25, 7);
        assert!(!km.degenerate);
        let a = km.nearest(&[1.0, 0.0]);
        let b = km.nearest(&[-1.0, 0.0]);
        assert_ne!(a, b);
        assert!((km.centroid(a)[0] - 1.0245).abs() < 1e-3);
    }

    #[test]
    fn degenerate_when_too_few_distinct_points() {
        let data = vec![0.5f32, 0.5, 0.5, 0.5, -0.5, 0.5];
        let km = KMeans::train(&data, 2, 4, 10, 1);
        assert!(km.degenerate);
        assert_eq!(km.k(), 4);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let data: Vec<f32> = (0..600).map(|i| ((i * 7919) % 613) as f32 / 613.0).collect();
        let a = KMeans::train(&data, 3, 5, 25, 99);
        let b = KMeans::train(&data, 3, 5, 25, 99);
        assert_eq!(a.centroids, b.centroids);
    }
}
