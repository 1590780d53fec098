//! Matching of help requests to help offers in crisis social-media streams.
//!
//! The pipeline: clean raw post text, keep posts that look like requests or
//! offers, classify them, then rank offers for every request by a product of
//! text similarity, temporal decay and spatial decay.

pub mod error;
pub mod eval;
pub mod filter;
pub mod index;
pub mod io;
pub mod matching;
pub mod model;
pub mod scoring;
pub mod text;

pub use error::{Error, Result};
pub use model::{EmbeddingMatrix, GeoPoint, MatchMode, MatchParams, Post, PostKind, Resource};
