//! Dataset construction and evaluation toolkit for multilingual relation
//! extraction.
//!
//! The crate covers the whole path from entity-linked abstracts to scored
//! system output:
//!
//! - [`ingest`]: parse abstract records with inline hyperlinks and link
//!   dates/quantities with per-language patterns.
//! - [`extract`]: align mention pairs against a triple store, collapse inverse
//!   relations, keep the most frequent relations and filter by entailment.
//! - [`critic`]: build critic training pairs, filter silver triplets and
//!   compute the critic metric suite.
//! - [`typing`]: classifier inputs, training-subset selection over the synset
//!   graph and confirm-or-replace maintenance of the entity-type map.
//! - [`annotation`]: sampling, HIT batching, judgment aggregation,
//!   Krippendorff's alpha and the HTTP annotation service.
//! - [`linearize`]: the seq2seq triplet grammar (encode and tolerant decode).
//! - [`evaluate`]: RE/RC scoring and error bucketing.
//! - [`dataset`] and [`pipeline`]: splits, gold assembly, statistics and the
//!   end-to-end orchestration.

pub mod annotation;
pub mod critic;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod extract;
pub mod ingest;
pub mod io;
pub mod linearize;
pub mod model;
pub mod pipeline;
pub mod scorer;
pub mod typing;
pub mod util;

pub use error::{Error, Result};
pub use model::{Document, EntityType, Lang, Mention, MentionKind, Status, Triplet};
