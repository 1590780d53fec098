//! Binary serialization of built indices.
//!
//! Layout (little-endian): magic, u32 version, u8 backend tag, config, u32 dim,
//! u32 count, then a backend-specific payload.

use std::fs;
use std::path::Path;

use super::hnsw::Hnsw;
use super::ivf::{Coarse, Ivf, IvfPq};
use super::pq::ProductQuantizer;
use super::{Backend, BackendKind, IndexConfig, VectorIndex};
use crate::error::{Error, Result};
use crate::model::EmbeddingMatrix;

pub const INDEX_MAGIC: &[u8; 8] = b"CREMAIDX";
pub const INDEX_VERSION: u32 = 1;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, v: &[f32]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }
    fn lists(&mut self, lists: &[Vec<u32>]) {
        self.u32(lists.len());
        for l in lists {
            self.u32(l.len());
            for &r in l {
                self.u32(r as usize);
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("index truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn lists(&mut self, bound: usize) -> Result<Vec<Vec<u32>>> {
        let n = self.u32()?;
        let mut out = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let len = self.u32()?;
            let mut l = Vec::with_capacity(len.min(1 << 16));
            for _ in 0..len {
                let r = self.u32()?;
                if r >= bound {
                    return Err(Error::Format(format!("row {r} out of range ({bound})")));
                }
                l.push(r as u32);
            }
            out.push(l);
        }
        Ok(out)
    }
}

impl VectorIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.0.extend_from_slice(INDEX_MAGIC);
        w.u32(INDEX_VERSION as usize);
        let c = &self.config;
        w.u8(c.backend.tag());
        for v in [
            c.ivf_partitions,
            c.ivf_nprobe,
            c.pq_m,
            c.pq_bits as usize,
            c.hnsw_m,
            c.hnsw_ef_construction,
            c.hnsw_ef_search,
            c.kmeans_iters,
        ] {
            w.u32(v);
        }
        w.u64(c.seed);
        w.u32(self.dim);
        w.u32(self.len);
        match &self.backend {
            Backend::Exhaustive(m) => w.f32s(m.as_flat()),
            Backend::Ivf(ivf) => {
                w.f32s(ivf.vectors.as_flat());
                w.f32s(&ivf.coarse.centroids);
                w.lists(&ivf.coarse.lists);
            }
            Backend::IvfPq(p) => {
                w.f32s(&p.coarse.centroids);
                w.lists(&p.coarse.lists);
                w.u32(p.pq.ksub());
                w.f32s(p.pq.codebooks());
                w.0.extend_from_slice(&p.codes);
            }
            Backend::Hnsw(h) => {
                w.f32s(h.vectors.as_flat());
                w.u32(h.entry as usize);
                w.u32(h.max_level);
                for node in &h.links {
                    w.u8((node.len() - 1) as u8);
                    for level in node {
                        w.u32(level.len());
                        for &nb in level {
                            w.u32(nb as usize);
                        }
                    }
                }
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8).ok() != Some(INDEX_MAGIC.as_slice()) {
            return Err(Error::Format("not an index file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != INDEX_VERSION as usize {
            return Err(Error::Format(format!("unsupported index version {version}")));
        }
        let backend = BackendKind::from_tag(r.u8()?)?;
        let config = IndexConfig {
            backend,
            ivf_partitions: r.u32()?,
            ivf_nprobe: r.u32()?,
            pq_m: r.u32()?,
            pq_bits: r.u32()? as u32,
            hnsw_m: r.u32()?,
            hnsw_ef_construction: r.u32()?,
            hnsw_ef_search: r.u32()?,
            kmeans_iters: r.u32()?,
            seed: r.u64()?,
        };
        let dim = r.u32()?;
        let len = r.u32()?;
        if dim == 0 {
            return Err(Error::Format("zero dimension".into()));
        }
        config.validate(dim).map_err(|e| Error::Format(e.to_string()))?;
        let matrix = |r: &mut Reader<'_>| EmbeddingMatrix::from_flat(dim, r.f32s(len * dim)?);
        let payload = match backend {
            BackendKind::Exhaustive => Backend::Exhaustive(matrix(&mut r)?),
            BackendKind::Ivf => {
                let vectors = matrix(&mut r)?;
                let centroids = r.f32s(config.ivf_partitions * dim)?;
                let lists = r.lists(len)?;
                check_lists(&lists, config.ivf_partitions, len)?;
                Backend::Ivf(Ivf::from_parts(Coarse { dim, centroids, lists }, vectors))
            }
            BackendKind::IvfPq => {
                let centroids = r.f32s(config.ivf_partitions * dim)?;
                let lists = r.lists(len)?;
                check_lists(&lists, config.ivf_partitions, len)?;
                let ksub = r.u32()?;
                if ksub == 0 || ksub > 256 {
                    return Err(Error::Format(format!("bad ksub {ksub}")));
                }
                let dsub = dim / config.pq_m;
                let codebooks = r.f32s(config.pq_m * ksub * dsub)?;
                let codes = r.take(len * config.pq_m)?.to_vec();
                if codes.iter().any(|&c| c as usize >= ksub) {
                    return Err(Error::Format("PQ code out of range".into()));
                }
                let pq = ProductQuantizer::from_parts(config.pq_m, ksub, dsub, codebooks);
                Backend::IvfPq(IvfPq::from_parts(Coarse { dim, centroids, lists }, pq, codes))
            }
            BackendKind::Hnsw => {
                let vectors = matrix(&mut r)?;
                let entry = r.u32()?;
                let max_level = r.u32()?;
                let mut links = Vec::with_capacity(len);
                for _ in 0..len {
                    let levels = r.u8()? as usize + 1;
                    let mut node = Vec::with_capacity(levels);
                    for _ in 0..levels {
                        let n = r.u32()?;
                        let mut l = Vec::with_capacity(n.min(1024));
                        for _ in 0..n {
                            let nb = r.u32()?;
                            if nb >= len {
                                return Err(Error::Format(format!("neighbor {nb} out of range")));
                            }
                            l.push(nb as u32);
                        }
                        node.push(l);
                    }
                    links.push(node);
                }
                if len > 0 && (entry >= len || links[entry].len() != max_level + 1) {
                    return Err(Error::Format("inconsistent HNSW entry point".into()));
                }
                Backend::Hnsw(Hnsw::from_parts(
                    vectors,
                    links,
                    entry as u32,
                    max_level,
                    config.hnsw_m,
                    config.hnsw_ef_construction,
                ))
            }
        };
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(VectorIndex::from_parts(config, dim, len, payload))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn check_lists(lists: &[Vec<u32>], partitions: usize, len: usize) -> Result<()> {
    if lists.len() != partitions || lists.iter().map(Vec::len).sum::<usize>() != len {
        return Err(Error::Format("posting lists do not partition the corpus".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use crate::index::testutil::random_unit;
    use crate::index::{IndexConfig, VectorIndex};

    #[test]
    fn round_trip_every_backend() {
        let m = random_unit(300, 16, 40);
        let q = random_unit(8, 16, 41);
        for cfg in [
            IndexConfig::exhaustive(),
            IndexConfig::ivf(3, 2),
            IndexConfig::ivfpq(3, 2, 4, 4),
            IndexConfig::hnsw(8, 40, 20),
        ] {
            let (idx, _) = VectorIndex::build(&m, &cfg).unwrap();
            let bytes = idx.to_bytes();
            let back = VectorIndex::from_bytes(&bytes).unwrap();
            assert_eq!(back.config(), idx.config());
            assert_eq!(back.to_bytes(), bytes);
            for qv in q.rows() {
                assert_eq!(back.search(qv, 5).unwrap(), idx.search(qv, 5).unwrap());
            }
        }
    }

    #[test]
    fn rejects_corruption() {
        let m = random_unit(50, 8, 42);
        let (idx, _) = VectorIndex::build(&m, &IndexConfig::ivf(3, 1)).unwrap();
        let bytes = idx.to_bytes();
        assert!(VectorIndex::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(VectorIndex::from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(VectorIndex::from_bytes(&long).is_err());
    }
}
