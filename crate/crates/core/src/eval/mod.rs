//! Evaluation: Top-n accuracy, synthetic corpora, index benchmarks and
//! offer-to-request analytics.

pub mod accuracy;
pub mod bench;
pub mod ratio;
pub mod synth;

pub use accuracy::{topn_accuracy, GroundTruth, TruthPair};
pub use bench::{bench_indices, BenchRow};
pub use ratio::{offer_request_ratio, GroupBy, RatioRow};
pub use synth::{generate_synthetic, DistractorKind, GenSpec, OfferLabel, SyntheticCorpus};
