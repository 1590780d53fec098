use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use crema_core::eval::bench::{to_csv, to_table};
use crema_core::eval::synth::default_centers;
use crema_core::eval::{
    bench_indices, generate_synthetic, offer_request_ratio, topn_accuracy, GenSpec, GroundTruth, GroupBy, OfferLabel,
};
use crema_core::filter::{classify, filter_candidates, ExternalClassifier, PluginRegistry, RegexSet};
use crema_core::index::{IndexConfig, VectorIndex};
use crema_core::io::{read_embeddings, read_jsonl, read_posts, write_embeddings, write_ids, write_jsonl, write_posts, EmbeddingStore};
use crema_core::matching::{match_requests, MatchResult, OfferCorpus};
use crema_core::model::{validate_post, EmbeddingMatrix, GeoPoint, Post, PostKind};
use crema_core::text::preprocess_text;

use super::{
    BenchArgs, ClassifyArgs, Command, EvalArgs, FilterArgs, GenArgs, IndexArgs, IndexFlags, IngestArgs, MatchArgs,
    RatioArgs, Usage,
};

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest(a) => ingest(a),
        Command::Filter(a) => filter(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Index(a) => index(a),
        Command::Match(a) => match_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Gen(a) => gen(a),
        Command::Ratio(a) => ratio(a),
    }
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Usage::new("--workers", "must be at least 1").into()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build()?;
            Ok(pool.install(f))
        }
    }
}

fn posts_from(path: &Path) -> Result<Vec<Post>> {
    read_posts(path).with_context(|| format!("reading posts from {}", path.display()))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let file = fs::File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let label = a.input.display().to_string();
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for (i, line) in BufReader::new(file).split(b'\n').enumerate() {
        let line = line?;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let parsed = std::str::from_utf8(&line)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<Post>(s).map_err(|e| e.to_string()))
            .and_then(|mut p| {
                p.text = preprocess_text(&p.text);
                validate_post(p, a.require_geo, a.require_time).map_err(|e| e.to_string())
            });
        match parsed {
            Ok(p) => out.push(p),
            Err(reason) if a.skip_invalid => {
                log::warn!("{label}:{}: skipped: {reason}", i + 1);
                skipped += 1;
            }
            Err(reason) => {
                return Err(crema_core::Error::Parse { path: label, line: i + 1, reason }.into());
            }
        }
    }
    write_posts(&a.output, &out)?;
    eprintln!("ingested {} posts, skipped {skipped}", out.len());
    Ok(())
}

fn filter(a: FilterArgs) -> Result<()> {
    let set = match &a.patterns {
        Some(p) => RegexSet::builtin_with_file(p).with_context(|| format!("loading patterns {}", p.display()))?,
        None => RegexSet::builtin(),
    };
    let posts = posts_from(&a.input)?;
    let total = posts.len();
    let kept: Vec<_> = filter_candidates(posts, &set).collect();
    write_jsonl(&a.output, &kept)?;
    eprintln!("kept {} of {total} posts", kept.len());
    Ok(())
}

fn classify_cmd(a: ClassifyArgs) -> Result<()> {
    let mut registry = PluginRegistry::with_heuristic();
    if a.plugin == "external" {
        let path = a
            .verdicts
            .as_ref()
            .ok_or_else(|| Usage::new("--verdicts", "required with --plugin external"))?;
        registry.register("external", Box::new(ExternalClassifier::load(path)?))?;
    }
    let plugin = registry.get(&a.plugin)?;
    let mut posts = posts_from(&a.input)?;
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for p in &mut posts {
        classify(p, plugin)?;
        *counts.entry(p.kind.as_str()).or_default() += 1;
    }
    write_posts(&a.output, &posts)?;
    if let Some(path) = &a.requests_out {
        let v: Vec<Post> = posts.iter().filter(|p| p.kind == PostKind::Request).cloned().collect();
        write_posts(path, &v)?;
    }
    if let Some(path) = &a.offers_out {
        let v: Vec<Post> = posts.iter().filter(|p| p.kind == PostKind::Offer).cloned().collect();
        write_posts(path, &v)?;
    }
    eprintln!("classified {} posts: {}", posts.len(), serde_json::to_string(&counts)?);
    Ok(())
}

fn load_store(emb: &super::EmbeddingArgs) -> Result<EmbeddingStore> {
    EmbeddingStore::load(&emb.embeddings, &emb.ids)
        .with_context(|| format!("loading embeddings {} / {}", emb.embeddings.display(), emb.ids.display()))
}

fn index(a: IndexArgs) -> Result<()> {
    let offers = posts_from(&a.offers)?;
    let store = load_store(&a.emb)?;
    let embs = store.gather(&offers)?;
    let config = a.index.to_config();
    let (idx, stats) = VectorIndex::build(&embs, &config)?;
    idx.save(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    eprintln!(
        "built {} index over {} offers in {:.2} ms",
        config.label(),
        idx.len(),
        stats.index_time_ms
    );
    Ok(())
}

fn match_cmd(a: MatchArgs) -> Result<()> {
    let requests = posts_from(&a.requests)?;
    let offers = posts_from(&a.offers)?;
    let store = load_store(&a.emb)?;
    let mut missing = Vec::new();
    for p in requests.iter().chain(&offers) {
        if store.row_of(&p.id).is_none() {
            missing.push(p.id.clone());
        }
    }
    if !missing.is_empty() {
        return Err(crema_core::Error::EmbeddingMissing(missing).into());
    }
    let req_embs = store.gather(&requests)?;
    let offer_embs = store.gather(&offers)?;
    let params = a.params.to_params();
    params.validate()?;

    let corpus = match &a.index_file {
        Some(path) => {
            let mut idx = VectorIndex::load(path).with_context(|| format!("loading index {}", path.display()))?;
            idx.set_search_params(a.index.nprobe, a.index.ef_search)?;
            OfferCorpus::with_index(offers, offer_embs, idx)?
        }
        None => OfferCorpus::build(offers, offer_embs, &a.index.to_config())?,
    };
    let (results, report) = in_pool(a.workers, || match_requests(&requests, &req_embs, &corpus, &params))??;
    write_jsonl(&a.output, &results)?;
    if let Some(path) = &a.report {
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    eprintln!(
        "matched {} of {} requests ({} matches); search {} ms",
        report.matched_requests,
        report.requests,
        report.total_matches,
        report.search_ms.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let results: Vec<MatchResult> = read_jsonl(&a.matches).with_context(|| format!("reading {}", a.matches.display()))?;
    let truth = GroundTruth::load(&a.truth).with_context(|| format!("reading {}", a.truth.display()))?;
    let mut accuracy = BTreeMap::new();
    let mut ns = vec![1, 3, a.n];
    ns.sort_unstable();
    ns.dedup();
    for n in ns {
        accuracy.insert(format!("top{n}"), topn_accuracy(&results, &truth, n)?);
    }
    let mut report = json!({
        "requests": results.len(),
        "n": a.n,
        "top_n_accuracy": topn_accuracy(&results, &truth, a.n)?,
        "accuracy": accuracy,
        "empty_results": results.iter().filter(|r| r.matches.is_empty()).count(),
    });
    if let Some(path) = &a.offers {
        let offers = posts_from(path)?;
        let labels: BTreeMap<&str, OfferLabel> = offers
            .iter()
            .filter_map(|p| OfferLabel::from_text(&p.text).map(|l| (p.id.as_str(), l)))
            .collect();
        let mut rank1: BTreeMap<String, usize> = BTreeMap::new();
        for r in &results {
            let key = match r.matches.first() {
                None => "none".to_string(),
                Some(m) => labels.get(m.offer_id.as_str()).map_or("unlabeled".to_string(), |l| l.to_string()),
            };
            *rank1.entry(key).or_default() += 1;
        }
        report["rank1_labels"] = json!(rank1);
    }
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &a.output {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Parses one bench config line: space-separated `key=value` with index flag names.
pub fn parse_config_line(line: &str) -> Result<IndexConfig> {
    let mut f = IndexFlags::default();
    for tok in line.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Usage::new("--configs", format!("expected key=value, got `{tok}`")))?;
        let bad = |_| Usage::new("--configs", format!("bad value `{v}` for `{k}`"));
        match k.replace('_', "-").as_str() {
            "backend" => f.backend = Some(v.parse().map_err(|_| Usage::new("--configs", format!("unknown backend `{v}`")))?),
            "partitions" => f.partitions = Some(v.parse().map_err(bad)?),
            "nprobe" => f.nprobe = Some(v.parse().map_err(bad)?),
            "pq-m" => f.pq_m = Some(v.parse().map_err(bad)?),
            "pq-bits" => f.pq_bits = Some(v.parse().map_err(bad)?),
            "hnsw-m" => f.hnsw_m = Some(v.parse().map_err(bad)?),
            "ef-construction" => f.ef_construction = Some(v.parse().map_err(bad)?),
            "ef-search" => f.ef_search = Some(v.parse().map_err(bad)?),
            "kmeans-iters" => f.kmeans_iters = Some(v.parse().map_err(bad)?),
            "seed" => f.seed = Some(v.parse().map_err(bad)?),
            _ => return Err(Usage::new("--configs", format!("unknown key `{k}`")).into()),
        }
    }
    Ok(f.to_config())
}

fn default_bench_configs() -> Vec<IndexConfig> {
    vec![
        IndexConfig::exhaustive(),
        IndexConfig::ivf(3, 1),
        IndexConfig::ivf(3, 2),
        IndexConfig::ivfpq(3, 1, 8, 4),
        IndexConfig::ivfpq(3, 2, 8, 4),
        IndexConfig::hnsw(16, 16, 64),
    ]
}

fn random_matrix(n: usize, dim: usize, seed: u64) -> Result<EmbeddingMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = EmbeddingMatrix::new(dim);
    for _ in 0..n {
        let v: Vec<f32> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        m.push_normalized(&v)?;
    }
    Ok(m)
}

fn bench(a: BenchArgs) -> Result<()> {
    let corpus = match (&a.embeddings, a.random) {
        (Some(p), _) => {
            let mut m = read_embeddings(p).with_context(|| format!("reading {}", p.display()))?;
            m.normalize_rows()?;
            m
        }
        (None, Some(n)) => random_matrix(n, a.dim, a.seed)?,
        (None, None) => bail!(Usage::new("--embeddings", "give a corpus file or --random N")),
    };
    let queries = match &a.queries {
        Some(p) => {
            let mut m = read_embeddings(p)?;
            m.normalize_rows()?;
            m
        }
        None => random_matrix(a.n_queries, corpus.dim(), a.seed.wrapping_add(1))?,
    };
    let configs = match &a.configs {
        Some(p) => fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(parse_config_line)
            .collect::<Result<Vec<_>>>()?,
        None => default_bench_configs(),
    };
    let rows = in_pool(a.workers, || bench_indices(&corpus, &configs, &queries, &a.k, a.reps))??;
    if let Some(p) = &a.csv {
        fs::write(p, to_csv(&rows))?;
    }
    print!("{}", to_table(&rows));
    Ok(())
}

fn read_centers(path: &Path) -> Result<Vec<(String, GeoPoint)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = || -> Option<(f64, f64)> { Some((parts.get(1)?.parse().ok()?, parts.get(2)?.parse().ok()?)) };
        match (parts.len(), parse()) {
            (3, Some((lat, lon))) => out.push((parts[0].to_string(), GeoPoint::new(lat, lon)?)),
            _ => {
                return Err(crema_core::Error::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: "expected name,lat,lon".into(),
                }
                .into())
            }
        }
    }
    Ok(out)
}

fn gen(a: GenArgs) -> Result<()> {
    let spec = GenSpec {
        n_pairs: a.pairs,
        centers: match &a.centers {
            Some(p) => read_centers(p)?,
            None => default_centers(),
        },
        time_window_days: a.time_window,
        distance_window_km: a.distance_window,
        n_distractors_per_pair: a.distractors,
        embedding_dim: a.dim,
        seed: a.seed,
        decay_time_days: a.decay_time,
        decay_distance_km: a.decay_distance,
        similarity_margin: a.margin,
    };
    let corpus = generate_synthetic(&spec)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let dir = &a.out_dir;
    write_posts(dir.join("requests.jsonl"), &corpus.requests)?;
    write_posts(dir.join("offers.jsonl"), &corpus.offers)?;
    let store = corpus.embedding_store()?;
    write_embeddings(dir.join("embeddings.bin"), store.matrix())?;
    write_ids(dir.join("ids.txt"), store.ids())?;
    corpus.truth.save(dir.join("truth.jsonl"))?;
    eprintln!(
        "generated {} requests and {} offers in {}",
        corpus.requests.len(),
        corpus.offers.len(),
        dir.display()
    );
    Ok(())
}

fn ratio(a: RatioArgs) -> Result<()> {
    let group_by: GroupBy = a.group_by.parse()?;
    let posts = posts_from(&a.input)?;
    let rows = offer_request_ratio(&posts, group_by)?;
    match &a.output {
        Some(p) => write_jsonl(p, &rows)?,
        None => {
            let mut out = io::stdout().lock();
            crema_core::io::write_jsonl_to(&mut out, &rows)?;
        }
    }
    Ok(())
}
