//! Pairwise (premise, hypothesis) scorers.
//!
//! Entailment filtering and critic filtering both go through [`PairScorer`].
//! Two implementations ship: [`HttpScorer`], a batched client for an external
//! scoring service, and [`MockScorer`], a deterministic rule table for tests
//! and desk runs.
//!
//! Wire protocol (one endpoint per scorer, `POST`):
//!
//! ```text
//! request:  {"pairs": [{"premise": "...", "hypothesis": "..."}, ...]}
//! response: {"scores": [0.93, 0.02, ...]}
//! ```
//!
//! Every score is a probability in `[0, 1]`; the response must contain one
//! score per pair, in order.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScorerError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("bad response: {0}")]
    Protocol(String),
    #[error("score {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("scorer refused document {0}")]
    Refused(String),
}

/// One scoring request. `doc_id` and `key` identify the triplet for scorers
/// that need it (the mock); only premise and hypothesis go over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub doc_id: String,
    pub key: String,
    pub premise: String,
    pub hypothesis: String,
}

pub trait PairScorer: Send + Sync {
    /// Scores a batch. Either every request gets a score or the batch fails.
    fn score_batch(&self, batch: &[ScoreRequest]) -> Result<Vec<f64>, ScorerError>;

    /// Preferred batch size for callers that chunk their input.
    fn batch_size(&self) -> usize {
        32
    }
}

pub(crate) fn check_scores(scores: Vec<f64>, expected: usize) -> Result<Vec<f64>, ScorerError> {
    if scores.len() != expected {
        return Err(ScorerError::Protocol(format!(
            "expected {expected} scores, got {}",
            scores.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(ScorerError::OutOfRange(*bad));
    }
    Ok(scores)
}

/// Fallback for pairs with no explicit rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MockDefault {
    Constant {
        score: f64,
    },
    /// Pseudo-random but stable score derived from (seed, doc_id, hypothesis).
    Hashed {
        seed: String,
    },
}

/// Deterministic scorer: a rule table keyed by `(doc_id, hypothesis)` with a
/// configurable fallback. Documents listed in `fail_docs` make the whole
/// batch fail, which exercises error paths.
#[derive(Debug, Clone)]
pub struct MockScorer {
    rules: HashMap<(String, String), f64>,
    default: MockDefault,
    fail_docs: Vec<String>,
}

impl MockScorer {
    pub fn constant(score: f64) -> Self {
        MockScorer {
            rules: HashMap::new(),
            default: MockDefault::Constant { score },
            fail_docs: Vec::new(),
        }
    }

    pub fn hashed(seed: impl Into<String>) -> Self {
        MockScorer {
            rules: HashMap::new(),
            default: MockDefault::Hashed { seed: seed.into() },
            fail_docs: Vec::new(),
        }
    }

    pub fn with_rule(mut self, doc_id: &str, hypothesis: &str, score: f64) -> Self {
        self.rules.insert((doc_id.to_string(), hypothesis.to_string()), score);
        self
    }

    pub fn failing_on(mut self, doc_id: &str) -> Self {
        self.fail_docs.push(doc_id.to_string());
        self
    }

    /// Loads rules from a `doc_id \t hypothesis \t score` file.
    pub fn load_rules(mut self, path: &Path) -> crate::Result<Self> {
        for (i, row) in io::read_tsv(path, 3)?.into_iter().enumerate() {
            let score: f64 = row[2]
                .trim()
                .parse()
                .map_err(|_| crate::Error::format(path, i + 1, "score is not a number"))?;
            self.rules.insert((row[0].clone(), row[1].clone()), score);
        }
        Ok(self)
    }

    pub fn score_one(&self, doc_id: &str, hypothesis: &str) -> f64 {
        if let Some(s) = self.rules.get(&(doc_id.to_string(), hypothesis.to_string())) {
            return *s;
        }
        match &self.default {
            MockDefault::Constant { score } => *score,
            MockDefault::Hashed { seed } => crate::util::unit_interval(&[seed, doc_id, hypothesis]),
        }
    }
}

impl PairScorer for MockScorer {
    fn score_batch(&self, batch: &[ScoreRequest]) -> Result<Vec<f64>, ScorerError> {
        if let Some(r) = batch.iter().find(|r| self.fail_docs.contains(&r.doc_id)) {
            return Err(ScorerError::Refused(r.doc_id.clone()));
        }
        let scores = batch.iter().map(|r| self.score_one(&r.doc_id, &r.hypothesis)).collect();
        check_scores(scores, batch.len())
    }
}

#[derive(Serialize)]
struct WirePair<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    pairs: Vec<WirePair<'a>>,
}

#[derive(Deserialize)]
struct WireResponse {
    scores: Vec<f64>,
}

/// Blocking client for an external scoring service. Must not be used from
/// inside an async runtime.
pub struct HttpScorer {
    url: String,
    batch_size: usize,
    client: reqwest::blocking::Client,
}

impl HttpScorer {
    pub fn new(url: impl Into<String>, timeout: Duration, batch_size: usize) -> Result<Self, ScorerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ScorerError::Transport(e.to_string()))?;
        Ok(HttpScorer {
            url: url.into(),
            batch_size: batch_size.max(1),
            client,
        })
    }
}

impl PairScorer for HttpScorer {
    fn score_batch(&self, batch: &[ScoreRequest]) -> Result<Vec<f64>, ScorerError> {
        let mut out = Vec::with_capacity(batch.len());
        for chunk in batch.chunks(self.batch_size) {
            let body = WireRequest {
                pairs: chunk
                    .iter()
                    .map(|r| WirePair {
                        premise: &r.premise,
                        hypothesis: &r.hypothesis,
                    })
                    .collect(),
            };
            let resp = self
                .client
                .post(&self.url)
                .json(&body)
                .send()
                .map_err(|e| ScorerError::Transport(e.to_string()))?;
            if !resp.status().is_success() {
                return Err(ScorerError::Transport(format!("HTTP {}", resp.status())));
            }
            let parsed: WireResponse = resp.json().map_err(|e| ScorerError::Protocol(e.to_string()))?;
            out.extend(check_scores(parsed.scores, chunk.len())?);
        }
        Ok(out)
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }
}
