//! File formats: post JSON-lines, the `CREMAEMB` embedding file and its id list.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{EmbeddingMatrix, Post};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"CREMAEMB";
pub const EMBEDDING_VERSION: u32 = 1;
/// magic + version + count + dim
pub const EMBEDDING_HEADER_LEN: usize = 20;

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    parse_jsonl(reader, &path.display().to_string())
}

pub fn parse_jsonl<T: DeserializeOwned, R: BufRead>(reader: R, label: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: label.to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_jsonl_to(&mut w, items)?;
    w.flush()?;
    Ok(())
}

pub fn write_jsonl_to<T: Serialize, W: Write>(w: &mut W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut *w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_posts(path: impl AsRef<Path>) -> Result<Vec<Post>> {
    read_jsonl(path)
}

pub fn write_posts(path: impl AsRef<Path>, posts: &[Post]) -> Result<()> {
    write_jsonl(path, posts)
}

/// Embeddings keyed by post id.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    ids: Vec<String>,
    matrix: EmbeddingMatrix,
    rows: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(ids: Vec<String>, matrix: EmbeddingMatrix) -> Result<Self> {
        if ids.len() != matrix.len() {
            return Err(Error::Format(format!(
                "{} ids for {} embedding rows",
                ids.len(),
                matrix.len()
            )));
        }
        let mut rows = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if rows.insert(id.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate id `{id}` in embedding ids")));
            }
        }
        Ok(Self { ids, matrix, rows })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.rows.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.row_of(id).map(|r| self.matrix.row(r))
    }

    /// Gathers the embeddings of `posts` in order, reporting every missing id.
    pub fn gather(&self, posts: &[Post]) -> Result<EmbeddingMatrix> {
        let mut missing = Vec::new();
        let mut rows = Vec::with_capacity(posts.len());
        for p in posts {
            match self.row_of(&p.id) {
                Some(r) => rows.push(r),
                None => missing.push(p.id.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::EmbeddingMissing(missing));
        }
        Ok(self.matrix.select(&rows))
    }

    /// Loads an embedding file plus its id file, normalizing every row.
    pub fn load(embeddings: impl AsRef<Path>, ids: impl AsRef<Path>) -> Result<Self> {
        let mut matrix = read_embeddings(embeddings)?;
        matrix.normalize_rows()?;
        let ids = read_ids(ids)?;
        Self::new(ids, matrix)
    }

    pub fn save(&self, embeddings: impl AsRef<Path>, ids: impl AsRef<Path>) -> Result<()> {
        write_embeddings(embeddings, &self.matrix)?;
        write_ids(ids, &self.ids)
    }
}

pub fn encode_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(EMBEDDING_HEADER_LEN + m.as_flat().len() * 4);
    buf.extend_from_slice(EMBEDDING_MAGIC);
    buf.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    for v in m.as_flat() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    if bytes.len() < EMBEDDING_HEADER_LEN || &bytes[..8] != EMBEDDING_MAGIC {
        return Err(Error::Format("missing CREMAEMB header".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(8);
    if version != EMBEDDING_VERSION {
        return Err(Error::Format(format!("unsupported embedding file version {version}")));
    }
    let count = word(12) as usize;
    let dim = word(16) as usize;
    let expected = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(EMBEDDING_HEADER_LEN))
        .ok_or_else(|| Error::Format("embedding header overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "embedding file is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let data = bytes[EMBEDDING_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if dim == 0 {
        return Ok(EmbeddingMatrix::new(0));
    }
    EmbeddingMatrix::from_flat(dim, data)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_embeddings(&bytes)
}

pub fn write_embeddings(path: impl AsRef<Path>, m: &EmbeddingMatrix) -> Result<()> {
    std::fs::write(path, encode_embeddings(m))?;
    Ok(())
}

pub fn read_ids(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().map(str::to_string).filter(|l| !l.is_empty()).collect())
}

pub fn write_ids(path: impl AsRef<Path>, ids: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for id in ids {
        writeln!(w, "{id}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_file_layout() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0f32, 0.0, 0.0], vec![0.0, 3.0, 4.0]]).unwrap();
        let bytes = encode_embeddings(&m);
        assert_eq!(bytes.len(), 20 + 2 * 3 * 4);
        assert_eq!(&bytes[..8], b"CREMAEMB");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &3u32.to_le_bytes());
        assert_eq!(&bytes[20 + 20..20 + 24], &0.8f32.to_le_bytes());
        assert_eq!(decode_embeddings(&bytes).unwrap(), m);
    }

    #[test]
    fn truncated_file_rejected() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0f32, 0.0]]).unwrap();
        let bytes = encode_embeddings(&m);
        assert!(decode_embeddings(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_embeddings(b"NOTMAGIC").is_err());
    }

    #[test]
    fn store_gather_reports_all_missing() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0f32, 0.0]]).unwrap();
        let store = EmbeddingStore::new(vec!["a".into()], m).unwrap();
        let posts = vec![Post::new("a", "x"), Post::new("b", "y"), Post::new("c", "z")];
        match store.gather(&posts) {
            Err(Error::EmbeddingMissing(ids)) => assert_eq!(ids, vec!["b", "c"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jsonl_parse_error_has_line() {
        let input = "{\"id\":\"a\",\"text\":\"x\"}\n\nnot json\n";
        let err = parse_jsonl::<Post, _>(input.as_bytes(), "posts.jsonl").unwrap_err();
        assert!(err.to_string().starts_with("posts.jsonl:3:"), "{err}");
    }
}
