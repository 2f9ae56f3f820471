//! Triplet critic support: training pairs from human judgments, the
//! silver-data filter, and the precision/recall/F1/accuracy suite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{score_and_apply, surfaces, FilterOutcome, RelationVocab, ScoringFailure};
use crate::model::{Document, Lang, Status, Triplet};
use crate::scorer::{PairScorer, ScoreRequest};
use crate::util::round1;

pub const DEFAULT_CRITIC_THRESHOLD: f64 = 0.5;

/// One critic training example: does `premise` entail `hypothesis`?
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticPair {
    pub premise: String,
    pub hypothesis: String,
    pub label: bool,
    pub lang: Lang,
}

/// `subject relation object`, single-space separated.
pub fn critic_hypothesis(doc: &Document, t: &Triplet, vocab: &RelationVocab) -> Result<String> {
    let (s, o) = surfaces(doc, t)?;
    Ok(format!("{s} {} {o}", vocab.name(&t.pid)))
}

#[derive(Debug, Default)]
pub struct PairsOutcome {
    pub pairs: Vec<CriticPair>,
    pub failures: Vec<ScoringFailure>,
}

/// One pair per human-labelled triplet; the label is `status == gold_true`.
/// Triplets without a document or without a gold status are reported, not
/// paired.
pub fn make_pairs<'d>(
    gold: &[Triplet],
    docs: &dyn Fn(&str) -> Option<&'d Document>,
    vocab: &RelationVocab,
) -> PairsOutcome {
    let mut out = PairsOutcome::default();
    for t in gold {
        let result = match t.status {
            Status::GoldTrue | Status::GoldFalse => docs(&t.doc_id)
                .ok_or_else(|| Error::Invariant(format!("document {} not found", t.doc_id)))
                .and_then(|doc| {
                    Ok(CriticPair {
                        premise: doc.text.clone(),
                        hypothesis: critic_hypothesis(doc, t, vocab)?,
                        label: t.status == Status::GoldTrue,
                        lang: t.lang,
                    })
                }),
            other => Err(Error::arg(format!("status {other:?} has no human label"))),
        };
        match result {
            Ok(p) => out.pairs.push(p),
            Err(e) => out.failures.push(ScoringFailure {
                triplet_id: t.triplet_id.clone(),
                message: e.to_string(),
            }),
        }
    }
    out
}

/// Records the critic score; below `threshold` the triplet becomes
/// critic_rejected, otherwise it stays silver. Anything that is not silver is
/// returned untouched.
pub fn apply_critic(mut t: Triplet, score: f64, threshold: f64) -> Result<Triplet> {
    if t.status != Status::Silver {
        return Ok(t);
    }
    t.critic_score = Some(score);
    let to = if score < threshold {
        Status::CriticRejected
    } else {
        Status::Silver
    };
    t.transition(to)?;
    Ok(t)
}

/// Batched critic filter. Non-silver triplets pass through without being
/// scored; every input comes back exactly once.
pub fn critic_filter_batch<'d>(
    triplets: Vec<Triplet>,
    docs: &dyn Fn(&str) -> Option<&'d Document>,
    scorer: &dyn PairScorer,
    vocab: &RelationVocab,
    threshold: f64,
) -> FilterOutcome {
    let (silver, rest): (Vec<_>, Vec<_>) = triplets
        .into_iter()
        .enumerate()
        .partition(|(_, t)| t.status == Status::Silver);
    let order: Vec<usize> = silver.iter().map(|(i, _)| *i).collect();
    let mut scored = score_and_apply(
        silver.into_iter().map(|(_, t)| t).collect(),
        docs,
        scorer,
        threshold,
        |doc, t| {
            Ok(ScoreRequest {
                doc_id: doc.doc_id.clone(),
                key: t.triplet_id.clone(),
                premise: doc.text.clone(),
                hypothesis: critic_hypothesis(doc, t, vocab)?,
            })
        },
        apply_critic,
    );
    // Restore input order.
    let mut slots: Vec<Option<Triplet>> = vec![None; order.len() + rest.len()];
    for (i, t) in rest {
        slots[i] = Some(t);
    }
    for (i, t) in order.into_iter().zip(scored.triplets.drain(..)) {
        slots[i] = Some(t);
    }
    FilterOutcome {
        triplets: slots.into_iter().flatten().collect(),
        failures: scored.failures,
    }
}

#[allow(clippy::result_large_err)]
pub fn critic_filter(
    t: Triplet,
    doc: &Document,
    scorer: &dyn PairScorer,
    vocab: &RelationVocab,
    threshold: f64,
) -> Result<Triplet, (Triplet, ScoringFailure)> {
    let mut out = critic_filter_batch(vec![t], &|_| Some(doc), scorer, vocab, threshold);
    let t = out.triplets.pop().expect("one in, one out");
    match out.failures.pop() {
        Some(f) => Err((t, f)),
        None => Ok(t),
    }
}

/// Binary confusion counts with the positive class = `true`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(preds: &[bool], golds: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&p, &g) in preds.iter().zip(golds) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

pub(crate) fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub(crate) fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Percentages, rounded to one decimal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
}

pub fn critic_metrics(preds: &[bool], golds: &[bool]) -> Result<CriticMetrics> {
    if preds.is_empty() {
        return Err(Error::arg("critic metrics need at least one prediction"));
    }
    if preds.len() != golds.len() {
        return Err(Error::arg(format!(
            "{} predictions vs {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    let c = Confusion::from_predictions(preds, golds);
    Ok(CriticMetrics {
        recall: round1(100.0 * c.recall()),
        precision: round1(100.0 * c.precision()),
        f1: round1(100.0 * c.f1()),
        accuracy: round1(100.0 * c.accuracy()),
    })
}
