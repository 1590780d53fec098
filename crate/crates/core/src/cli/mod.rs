//! Command-line front end.

mod commands;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use crema_core::index::{BackendKind, IndexConfig};
use crema_core::model::{MatchMode, MatchParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Bad flag value or flag combination.
#[derive(Debug)]
pub struct Usage {
    pub flag: String,
    pub message: String,
}

impl Usage {
    pub fn new(flag: &str, message: impl Into<String>) -> Self {
        Self { flag: flag.to_string(), message: message.into() }
    }
}

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} (see `crema <command> --help`)", self.flag, self.message)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug, Parser)]
#[command(name = "crema", version, about = "Match help requests to help offers in crisis social-media streams")]
#[command(arg_required_else_help = true, propagate_version = true)]
pub struct Cli {
    /// Flat key=value file supplying defaults for any flag of the chosen command.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean raw post texts and validate records (JSONL in, JSONL out).
    Ingest(IngestArgs),
    /// Keep posts matching any request/offer pattern; adds `matched_ids`.
    Filter(FilterArgs),
    /// Label posts as request/offer/other and assign a resource category.
    Classify(ClassifyArgs),
    /// Build an offer index and write it in CREMAIDX format.
    Index(IndexArgs),
    /// Rank offers for every request.
    Match(MatchArgs),
    /// Top-n accuracy of a match file against ground truth.
    Eval(EvalArgs),
    /// Time index builds and searches and measure recall.
    Bench(BenchArgs),
    /// Generate a seeded synthetic corpus with planted true pairs.
    Gen(GenArgs),
    /// Offer-to-request ratio per group.
    Ratio(RatioArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Posts JSONL: {id, text, lang?, ts?, lat?, lon?, kind?, resource?, country?, region?}.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    #[arg(long)]
    pub require_geo: bool,
    #[arg(long)]
    pub require_time: bool,
    /// Log and drop invalid records instead of failing.
    #[arg(long)]
    pub skip_invalid: bool,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Candidates JSONL: each post plus `matched_ids`.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Extra patterns, one regex per line, numbered from 6; `#` starts a comment.
    #[arg(long, value_name = "FILE")]
    pub patterns: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// All posts with `kind` and `resource` filled in.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    #[arg(long, default_value = "heuristic", value_parser = ["heuristic", "external"])]
    pub plugin: String,
    /// Verdicts JSONL for the external plugin: {id, kind, resource?, confidence?}.
    #[arg(long, value_name = "FILE")]
    pub verdicts: Option<PathBuf>,
    /// Also write the requests to this file.
    #[arg(long, value_name = "FILE")]
    pub requests_out: Option<PathBuf>,
    /// Also write the offers to this file.
    #[arg(long, value_name = "FILE")]
    pub offers_out: Option<PathBuf>,
}

/// Embedding file (CREMAEMB) plus its id file, one id per line.
#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    #[arg(long, value_name = "FILE")]
    pub embeddings: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub ids: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct IndexFlags {
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<BackendKind>,
    /// IVF cells [default: 3].
    #[arg(long)]
    pub partitions: Option<usize>,
    /// IVF cells scanned per query [default: 2].
    #[arg(long)]
    pub nprobe: Option<usize>,
    /// PQ subquantizers; must divide the dimension [default: 8].
    #[arg(long)]
    pub pq_m: Option<usize>,
    /// Bits per PQ code [default: 4].
    #[arg(long)]
    pub pq_bits: Option<u32>,
    /// HNSW max neighbors per node [default: 16].
    #[arg(long)]
    pub hnsw_m: Option<usize>,
    /// HNSW build beam width [default: 200].
    #[arg(long)]
    pub ef_construction: Option<usize>,
    /// HNSW search beam width [default: 64].
    #[arg(long)]
    pub ef_search: Option<usize>,
    /// Lloyd iterations for IVF and PQ training [default: 25].
    #[arg(long)]
    pub kmeans_iters: Option<usize>,
    /// Seed for k-means and HNSW level draws [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
}

impl IndexFlags {
    pub fn to_config(&self) -> IndexConfig {
        let d = IndexConfig::default();
        IndexConfig {
            backend: self.backend.unwrap_or(d.backend),
            ivf_partitions: self.partitions.unwrap_or(d.ivf_partitions),
            ivf_nprobe: self.nprobe.unwrap_or(d.ivf_nprobe),
            pq_m: self.pq_m.unwrap_or(d.pq_m),
            pq_bits: self.pq_bits.unwrap_or(d.pq_bits),
            hnsw_m: self.hnsw_m.unwrap_or(d.hnsw_m),
            hnsw_ef_construction: self.ef_construction.unwrap_or(d.hnsw_ef_construction),
            hnsw_ef_search: self.ef_search.unwrap_or(d.hnsw_ef_search),
            kmeans_iters: self.kmeans_iters.unwrap_or(d.kmeans_iters),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    s.parse().map_err(|_| format!("expected one of exhaustive, ivf, ivfpq, hnsw; got `{s}`"))
}

fn parse_mode(s: &str) -> Result<MatchMode, String> {
    s.parse().map_err(|_| format!("expected one of t, ts, tts; got `{s}`"))
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Offer posts JSONL; index rows follow file order.
    #[arg(long, value_name = "FILE")]
    pub offers: PathBuf,
    #[command(flatten)]
    pub emb: EmbeddingArgs,
    #[command(flatten)]
    pub index: IndexFlags,
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct MatchFlags {
    #[arg(long, default_value = "tts", value_parser = parse_mode)]
    pub mode: MatchMode,
    /// Maximum waiting time, days.
    #[arg(long, default_value_t = 30.0)]
    pub delta_time: f64,
    /// Maximum distance, km.
    #[arg(long, default_value_t = 10.0)]
    pub delta_distance: f64,
    /// Candidates retrieved from the index per request.
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub top_n: usize,
    /// Text weight in TS mode.
    #[arg(long, default_value_t = 0.5)]
    pub ts_alpha: f64,
    #[arg(long, default_value_t = crema_core::model::EARTH_RADIUS_KM)]
    pub earth_radius: f64,
    /// Retrieve only offers with the request's resource category.
    #[arg(long)]
    pub filter_resource: bool,
}

impl MatchFlags {
    pub fn to_params(&self) -> MatchParams {
        MatchParams {
            delta_time: self.delta_time,
            delta_distance: self.delta_distance,
            k: self.k,
            top_n: self.top_n,
            mode: self.mode,
            ts_alpha: self.ts_alpha,
            earth_radius_km: self.earth_radius,
            filter_resource: self.filter_resource,
        }
    }
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long, value_name = "FILE")]
    pub requests: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub offers: PathBuf,
    #[command(flatten)]
    pub emb: EmbeddingArgs,
    /// Prebuilt index over `--offers`; otherwise one is built from the index flags.
    #[arg(long, value_name = "FILE")]
    pub index_file: Option<PathBuf>,
    #[command(flatten)]
    pub index: IndexFlags,
    #[command(flatten)]
    pub params: MatchFlags,
    /// Match results JSONL: {request_id, matches:[{offer_id, rank, s_overall, ...}]}.
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Run report JSON: resolved parameters, build stats, search-time summary, counts.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    #[arg(long, value_name = "W")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub matches: PathBuf,
    /// Ground truth JSONL: {request_id, offer_id}.
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Offer posts; enables a breakdown of rank-1 offers by synthetic label.
    #[arg(long, value_name = "FILE")]
    pub offers: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Corpus embeddings (CREMAEMB).
    #[arg(long, value_name = "FILE", conflicts_with = "random")]
    pub embeddings: Option<PathBuf>,
    /// Use this many seeded random unit vectors as the corpus.
    #[arg(long, value_name = "N")]
    pub random: Option<usize>,
    /// Dimension for `--random`.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Query embeddings (CREMAEMB); otherwise random unit vectors.
    #[arg(long, value_name = "FILE")]
    pub queries: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n_queries: usize,
    /// One index config per line as space-separated key=value pairs using
    /// the index flag names, e.g. `backend=ivf partitions=3 nprobe=1`.
    #[arg(long, value_name = "FILE")]
    pub configs: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "10,100")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// CSV output: backend, params, k, index_ms_min/max/mean, search_ms_min/max/mean, recall.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    #[arg(long, value_name = "W")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Writes requests.jsonl, offers.jsonl, embeddings.bin, ids.txt and truth.jsonl.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub pairs: usize,
    #[arg(long, default_value_t = 5)]
    pub distractors: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Maximum request-to-true-offer gap, days.
    #[arg(long, default_value_t = 3.0)]
    pub time_window: f64,
    /// Maximum request-to-true-offer distance, km.
    #[arg(long, default_value_t = 10.0)]
    pub distance_window: f64,
    #[arg(long, default_value_t = 30.0)]
    pub decay_time: f64,
    #[arg(long, default_value_t = 10.0)]
    pub decay_distance: f64,
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    /// Centers as `name,lat,lon` lines; defaults to five Australian cities.
    #[arg(long, value_name = "FILE")]
    pub centers: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RatioArgs {
    /// Classified posts JSONL.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, default_value = "none", value_parser = ["country", "region", "none"])]
    pub group_by: String,
    /// JSONL rows {group, requests, offers, or_ratio}; standard output if absent.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> i32 {
    use crema_core::Error as E;
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidParams(_)
                | E::NonPositiveDelta(_)
                | E::DimNotDivisible { .. }
                | E::UnknownPlugin(_)
                | E::DuplicateName(_)
                | E::Pattern { .. }
                | E::DuplicatePatternId(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_DATA;
        }
    }
    EXIT_INTERNAL
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run(argv: Vec<OsString>) -> i32 {
    let cmd = Cli::command();
    let matches = match cmd.clone().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => return clap_exit(e),
    };
    let matches = match config::apply_config_file(&cmd, &argv, &matches) {
        Ok(Some(merged)) => match cmd.clone().try_get_matches_from(&merged) {
            Ok(m) => m,
            Err(e) => return clap_exit(e),
        },
        Ok(None) => matches,
        Err(e) => {
            eprintln!("error: {e:#}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => return clap_exit(e),
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();

    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn clap_exit(e: clap::Error) -> i32 {
    use clap::error::ErrorKind;
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
        _ => EXIT_USAGE,
    }
}
