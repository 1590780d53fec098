//! Index build/search timing and recall against the exhaustive scan.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{recall_at_k, IndexConfig, VectorIndex};
use crate::matching::TimingSummary;
use crate::model::EmbeddingMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub backend: String,
    pub params: String,
    pub k: usize,
    pub index_ms: TimingSummary,
    pub search_ms: TimingSummary,
    /// Mean top-k overlap with the exhaustive result.
    pub recall: f64,
}

fn params_of(cfg: &IndexConfig) -> String {
    let label = cfg.label();
    match label.find('(') {
        Some(i) => label[i + 1..label.len() - 1].replace(',', " "),
        None => String::new(),
    }
}

/// Builds every config `reps` times and times every query `reps` times per k,
/// after one untimed warm-up pass.
pub fn bench_indices(
    corpus: &EmbeddingMatrix,
    configs: &[IndexConfig],
    queries: &EmbeddingMatrix,
    k_values: &[usize],
    reps: usize,
) -> Result<Vec<BenchRow>> {
    if reps < 3 {
        return Err(Error::InvalidParams(format!("reps must be at least 3, got {reps}")));
    }
    if k_values.is_empty() || k_values.contains(&0) {
        return Err(Error::InvalidParams("k values must be positive".into()));
    }
    let (oracle, _) = VectorIndex::build(corpus, &IndexConfig::exhaustive())?;
    let mut rows = Vec::new();
    for cfg in configs {
        let mut build_times = Vec::with_capacity(reps);
        let mut index = None;
        for _ in 0..reps {
            let (idx, stats) = VectorIndex::build(corpus, cfg)?;
            build_times.push(stats.index_time_ms);
            index = Some(idx);
        }
        let index = index.expect("reps >= 3");
        for &k in k_values {
            for q in queries.rows() {
                index.search(q, k)?;
            }
            let mut samples = Vec::with_capacity(reps * queries.len());
            for _ in 0..reps {
                for q in queries.rows() {
                    let start = Instant::now();
                    let hits = index.search(q, k)?;
                    samples.push(start.elapsed().as_secs_f64() * 1e3);
                    std::hint::black_box(hits);
                }
            }
            rows.push(BenchRow {
                backend: cfg.backend.to_string(),
                params: params_of(cfg),
                k,
                index_ms: TimingSummary::from_samples(&build_times),
                search_ms: TimingSummary::from_samples(&samples),
                recall: recall_at_k(&index, &oracle, queries, k)?,
            });
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "backend,params,k,index_ms_min,index_ms_max,index_ms_mean,search_ms_min,search_ms_max,search_ms_mean,recall\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{:.4},{:.4},{:.6},{:.6},{:.6},{:.4}",
            r.backend,
            r.params,
            r.k,
            r.index_ms.min,
            r.index_ms.max,
            r.index_ms.mean,
            r.search_ms.min,
            r.search_ms.max,
            r.search_ms.mean,
            r.recall
        );
    }
    out
}

/// Fixed-width text table, times as `min–max (mean)`.
pub fn to_table(rows: &[BenchRow]) -> String {
    let header = ["Index", "Params", "k", "Index time (ms)", "Search time (ms)", "Recall"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.backend.clone(),
                r.params.clone(),
                r.k.to_string(),
                r.index_ms.display(),
                format!("{:.3}\u{2013}{:.3} ({:.3})", r.search_ms.min, r.search_ms.max, r.search_ms.mean),
                format!("{:.2}", r.recall),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let pad = w - c.chars().count();
            s.push_str(c);
            s.push_str(&" ".repeat(pad));
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&header.map(String::from));
    out.push_str(&line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>()));
    for row in &body {
        out.push_str(&line(row));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(n: usize, dim: usize) -> EmbeddingMatrix {
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|i| (0..dim).map(|j| (((i * 31 + j * 17) % 23) as f32 - 11.0) + 0.01 * i as f32).collect())
            .collect();
        EmbeddingMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn exhaustive_recall_is_one_and_full_probe_too() {
        let m = corpus(400, 8);
        let q = m.select(&[1, 50, 200]);
        let rows = bench_indices(&m, &[IndexConfig::exhaustive(), IndexConfig::ivf(3, 3)], &q, &[5, 20], 3).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.recall == 1.0));
        assert!(rows.iter().all(|r| r.search_ms.samples == 9 && r.index_ms.samples == 3));
        let csv = to_csv(&rows);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().nth(3).unwrap().starts_with("ivf,part=3 np=3,5,"));
        let table = to_table(&rows);
        assert!(table.contains('\u{2013}') && table.contains('('));
    }

    #[test]
    fn reps_below_three_rejected() {
        let m = corpus(10, 4);
        assert!(bench_indices(&m, &[IndexConfig::exhaustive()], &m, &[1], 2).is_err());
    }
}
