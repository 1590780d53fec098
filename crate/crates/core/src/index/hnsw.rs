//! Hierarchical navigable small-world graph over inner-product similarity.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, IndexConfig, RowFilter, Scored, SearchHit};
use crate::model::EmbeddingMatrix;

const MAX_LEVEL: usize = 16;

struct Visited(Vec<u64>);

impl Visited {
    fn new(n: usize) -> Self {
        Visited(vec![0; n.div_ceil(64)])
    }

    /// Marks `i`; returns false if it was already marked.
    #[inline]
    fn insert(&mut self, i: u32) -> bool {
        let (w, b) = ((i / 64) as usize, i % 64);
        let fresh = self.0[w] & (1 << b) == 0;
        self.0[w] |= 1 << b;
        fresh
    }
}

#[derive(Debug, Clone)]
pub struct Hnsw {
    pub(crate) vectors: EmbeddingMatrix,
    /// `links[node][level]` for every level `0..=level_of(node)`.
    pub(crate) links: Vec<Vec<Vec<u32>>>,
    pub(crate) entry: u32,
    pub(crate) max_level: usize,
    pub(crate) m: usize,
    pub(crate) ef_construction: usize,
}

impl Hnsw {
    pub(crate) fn build(embeddings: &EmbeddingMatrix, config: &IndexConfig) -> Self {
        let n = embeddings.len();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let level_mult = 1.0 / (config.hnsw_m.max(2) as f64).ln();
        let mut h = Hnsw {
            vectors: embeddings.clone(),
            links: Vec::with_capacity(n),
            entry: 0,
            max_level: 0,
            m: config.hnsw_m,
            ef_construction: config.hnsw_ef_construction,
        };
        for id in 0..n as u32 {
            let u: f64 = rng.random();
            let level = ((-(1.0 - u).ln() * level_mult).floor() as usize).min(MAX_LEVEL);
            h.insert(id, level);
        }
        h
    }

    pub(crate) fn from_parts(
        vectors: EmbeddingMatrix,
        links: Vec<Vec<Vec<u32>>>,
        entry: u32,
        max_level: usize,
        m: usize,
        ef_construction: usize,
    ) -> Self {
        Self { vectors, links, entry, max_level, m, ef_construction }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn level_of(&self, node: usize) -> usize {
        self.links[node].len() - 1
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn neighbors(&self, node: usize, level: usize) -> &[u32] {
        &self.links[node][level]
    }

    /// Degree bound at `level`.
    pub fn max_degree(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    #[inline]
    fn sim(&self, q: &[f32], node: u32) -> f32 {
        dot(q, self.vectors.row(node as usize))
    }

    fn insert(&mut self, id: u32, level: usize) {
        self.links.push(vec![Vec::new(); level + 1]);
        if id == 0 {
            self.entry = 0;
            self.max_level = level;
            return;
        }
        let q = self.vectors.row(id as usize).to_vec();
        let mut ep = Scored { sim: self.sim(&q, self.entry), row: self.entry };
        for lc in (level + 1..=self.max_level).rev() {
            ep = self.greedy(&q, ep, lc);
        }
        let mut eps = vec![ep];
        for lc in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(&q, &eps, self.ef_construction, lc, None);
            let chosen = self.select_neighbors(&found, self.m);
            self.links[id as usize][lc] = chosen.clone();
            let cap = self.max_degree(lc);
            for e in chosen {
                let list = &mut self.links[e as usize][lc];
                list.push(id);
                if list.len() > cap {
                    self.shrink(e, lc, cap);
                }
            }
            eps = found;
        }
        if level > self.max_level {
            self.entry = id;
            self.max_level = level;
        }
    }

    fn shrink(&mut self, node: u32, level: usize, cap: usize) {
        let base = self.vectors.row(node as usize);
        let mut cands: Vec<Scored> = self.links[node as usize][level]
            .iter()
            .map(|&nb| Scored { sim: dot(base, self.vectors.row(nb as usize)), row: nb })
            .collect();
        cands.sort_unstable_by(|a, b| b.cmp(a));
        self.links[node as usize][level] = self.select_neighbors(&cands, cap);
    }

    /// Diversity heuristic: keep a candidate only if it is more similar to the
    /// base than to every neighbor already kept, then top up with the best
    /// pruned ones. `cands` must be sorted best first.
    fn select_neighbors(&self, cands: &[Scored], m: usize) -> Vec<u32> {
        let mut kept: Vec<u32> = Vec::with_capacity(m);
        let mut pruned: Vec<u32> = Vec::new();
        for c in cands {
            if kept.len() >= m {
                break;
            }
            let v = self.vectors.row(c.row as usize);
            if kept.iter().all(|&r| dot(v, self.vectors.row(r as usize)) < c.sim) {
                kept.push(c.row);
            } else {
                pruned.push(c.row);
            }
        }
        let room = m - kept.len();
        kept.extend(pruned.into_iter().take(room));
        kept
    }

    fn greedy(&self, q: &[f32], mut ep: Scored, level: usize) -> Scored {
        loop {
            let mut changed = false;
            for &nb in &self.links[ep.row as usize][level] {
                let s = Scored { sim: self.sim(q, nb), row: nb };
                if s > ep {
                    ep = s;
                    changed = true;
                }
            }
            if !changed {
                return ep;
            }
        }
    }

    /// Beam search on one layer; returns up to `ef` admitted nodes, best first.
    fn search_layer(&self, q: &[f32], eps: &[Scored], ef: usize, level: usize, filter: Option<RowFilter<'_>>) -> Vec<Scored> {
        let admit = |row: u32| filter.is_none_or(|f| f(row as usize));
        let mut visited = Visited::new(self.links.len());
        let mut candidates: BinaryHeap<Scored> = BinaryHeap::new();
        let mut results: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        for &ep in eps {
            if visited.insert(ep.row) {
                candidates.push(ep);
                if admit(ep.row) {
                    results.push(Reverse(ep));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        while let Some(c) = candidates.pop() {
            if results.len() >= ef {
                if let Some(Reverse(worst)) = results.peek() {
                    if c < *worst {
                        break;
                    }
                }
            }
            for &nb in &self.links[c.row as usize][level] {
                if !visited.insert(nb) {
                    continue;
                }
                let s = Scored { sim: self.sim(q, nb), row: nb };
                let better = results.len() < ef || results.peek().is_some_and(|Reverse(w)| s > *w);
                if better {
                    candidates.push(s);
                    if admit(nb) {
                        results.push(Reverse(s));
                        if results.len() > ef {
                            results.pop();
                        }
                    }
                }
            }
        }
        let mut out: Vec<Scored> = results.into_iter().map(|r| r.0).collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }

    pub(crate) fn search(&self, q: &[f32], k: usize, ef: usize, filter: Option<RowFilter<'_>>) -> Vec<SearchHit> {
        let mut ep = Scored { sim: self.sim(q, self.entry), row: self.entry };
        for lc in (1..=self.max_level).rev() {
            ep = self.greedy(q, ep, lc);
        }
        self.search_layer(q, &[ep], ef, 0, filter)
            .into_iter()
            .take(k)
            .map(|s| SearchHit { offer_row: s.row as usize, similarity: s.sim })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::testutil::random_unit;
    use crate::index::{recall_at_k, VectorIndex};

    #[test]
    fn graph_invariants() {
        let m = random_unit(1500, 16, 31);
        let cfg = IndexConfig::hnsw(8, 64, 32);
        let (idx, _) = VectorIndex::build(&m, &cfg).unwrap();
        let h = idx.hnsw().unwrap();
        assert!(h.max_level() >= 1);
        for node in 0..h.len() {
            for level in 0..=h.level_of(node) {
                let nbs = h.neighbors(node, level);
                assert!(nbs.len() <= h.max_degree(level));
                for &nb in nbs {
                    // a neighbor on level l must itself exist on level l
                    assert!(h.level_of(nb as usize) >= level);
                    assert_ne!(nb as usize, node);
                }
            }
        }
    }

    #[test]
    fn recall_on_small_corpus() {
        let m = random_unit(2000, 32, 32);
        let q = random_unit(50, 32, 33);
        let (exact, _) = VectorIndex::build(&m, &IndexConfig::exhaustive()).unwrap();
        let (h, _) = VectorIndex::build(&m, &IndexConfig::hnsw(16, 100, 64)).unwrap();
        let r = recall_at_k(&h, &exact, &q, 10).unwrap();
        assert!(r >= 0.9, "recall {r}");
    }
}
