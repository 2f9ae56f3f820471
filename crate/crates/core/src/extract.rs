//! Distant-supervision alignment of documents against a triple store, plus
//! the relation-level passes that follow it: inverse collapsing, top-K
//! relation selection and entailment filtering.
//!
//! Stage order is fixed: align, collapse inverses, count and keep the top-K
//! relations, then entailment-filter what remains. Top-K is a barrier: all
//! candidates must be collapsed before any frequency is final.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::model::{Document, Lang, MentionKind, Status, Triplet};
use crate::scorer::{PairScorer, ScoreRequest};
use crate::util::normalize_literal;

/// Set of `(subject entity, pid, object value)` facts. Object values are
/// entity ids or literals, normalized with [`normalize_literal`].
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    facts: BTreeSet<(String, String, String)>,
    by_pair: HashMap<(String, String), BTreeSet<String>>,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the fact was already present.
    pub fn insert(&mut self, subj: &str, pid: &str, obj: &str) -> bool {
        let (subj, pid, obj) = (subj.trim().to_string(), pid.trim().to_string(), normalize_literal(obj));
        if !self.facts.insert((subj.clone(), pid.clone(), obj.clone())) {
            return false;
        }
        self.by_pair.entry((subj, obj)).or_default().insert(pid);
        true
    }

    /// Loads a three-column `subj \t pid \t obj` file.
    pub fn from_tsv(path: &Path) -> Result<Self> {
        let mut store = TripleStore::new();
        for row in io::read_tsv(path, 3)? {
            store.insert(&row[0], &row[1], &row[2]);
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn facts(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.facts.iter().map(|(s, p, o)| (s.as_str(), p.as_str(), o.as_str()))
    }

    /// Relation ids linking `subj` to `obj`, in ascending order.
    pub fn relations_between(&self, subj: &str, obj: &str) -> impl Iterator<Item = &str> {
        self.by_pair
            .get(&(subj.to_string(), obj.to_string()))
            .into_iter()
            .flatten()
            .map(String::as_str)
    }
}

/// Emits one candidate per ordered mention pair `(a, b)` and fact
/// `(entity(a), p, value(b))`. Only entity mentions can be subjects; dates
/// and quantities match on their normalized literal.
pub fn align(doc: &Document, store: &TripleStore) -> Vec<Triplet> {
    let mut out = Vec::new();
    for (a, subj) in doc.mentions.iter().enumerate() {
        let Some(subj_id) = subj.entity_id.as_deref() else {
            continue;
        };
        for (b, obj) in doc.mentions.iter().enumerate() {
            if a == b {
                continue;
            }
            let value = match obj.kind {
                MentionKind::Entity => obj.value_key().to_string(),
                MentionKind::Date | MentionKind::Quantity => normalize_literal(obj.value_key()),
            };
            for pid in store.relations_between(subj_id, &value) {
                let id = format!("{}#{a}:{pid}:{b}", doc.doc_id);
                out.push(Triplet::candidate(id, doc, a, b, pid));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub pid: String,
    pub name_en: String,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InverseTarget {
    pub canonical: String,
    /// True when mapping onto the canonical pid reverses the argument order.
    pub swap: bool,
}

/// Relation ids with English names, frequency ranks and the inverse map.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationVocab {
    pub entries: Vec<RelationEntry>,
    pub inverse_map: BTreeMap<String, InverseTarget>,
}

const BUILTIN_RELATIONS: &str = include_str!("../data/relations.tsv");
const BUILTIN_INVERSES: &str = include_str!("../data/inverses.tsv");

fn tsv_pairs(src: &str) -> impl Iterator<Item = (String, String)> + '_ {
    src.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('\t'))
        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
}

impl RelationVocab {
    /// The bundled relation table.
    pub fn builtin() -> Self {
        Self::from_names(tsv_pairs(BUILTIN_RELATIONS))
    }

    /// Builds a vocabulary from `(pid, name)` pairs; ranks follow input order.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let entries = names
            .into_iter()
            .enumerate()
            .map(|(i, (pid, name))| RelationEntry {
                pid: pid.into(),
                name_en: name.into(),
                rank: i + 1,
            })
            .collect();
        RelationVocab {
            entries,
            inverse_map: BTreeMap::new(),
        }
    }

    /// Loads a two-column `pid \t english name` file.
    pub fn from_tsv(path: &Path) -> Result<Self> {
        let rows = io::read_tsv(path, 2)?;
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert(r[0].clone()) {
                return Err(Error::Config(format!("duplicate relation id {}", r[0])));
            }
        }
        Ok(Self::from_names(rows.into_iter().map(|r| (r[0].clone(), r[1].clone()))))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, pid: &str) -> Option<&RelationEntry> {
        self.entries.iter().find(|e| e.pid == pid)
    }

    pub fn contains(&self, pid: &str) -> bool {
        self.get(pid).is_some()
    }

    /// English name for `pid`, falling back to the id itself.
    pub fn name<'a>(&'a self, pid: &'a str) -> &'a str {
        self.get(pid).map(|e| e.name_en.as_str()).unwrap_or(pid)
    }

    pub fn pid_for_name(&self, name: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.name_en == name).map(|e| e.pid.as_str())
    }

    pub fn is_known(&self, pid: &str) -> bool {
        self.contains(pid) || self.inverse_map.contains_key(pid)
    }

    /// Installs the inverse map. For each pair the canonical direction is the
    /// pid more frequent in `raw_counts`, ties going to the smaller pid
    /// string. A pair of a pid with itself marks a symmetric relation and is
    /// left alone.
    pub fn set_inverses(&mut self, pairs: &InversePairs, raw_counts: &BTreeMap<String, usize>) {
        self.inverse_map.clear();
        for (a, b) in &pairs.pairs {
            if a == b {
                continue;
            }
            let count = |p: &str| raw_counts.get(p).copied().unwrap_or(0);
            let (canonical, other) = match count(a).cmp(&count(b)) {
                std::cmp::Ordering::Greater => (a, b),
                std::cmp::Ordering::Less => (b, a),
                std::cmp::Ordering::Equal => {
                    if a <= b {
                        (a, b)
                    } else {
                        (b, a)
                    }
                }
            };
            self.inverse_map.insert(
                canonical.clone(),
                InverseTarget {
                    canonical: canonical.clone(),
                    swap: false,
                },
            );
            self.inverse_map.insert(
                other.clone(),
                InverseTarget {
                    canonical: canonical.clone(),
                    swap: true,
                },
            );
        }
    }
}

/// Inverse relation pairs, one `pid \t inverse_pid` per line. Each pid may
/// take part in at most one pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InversePairs {
    pub pairs: Vec<(String, String)>,
}

impl InversePairs {
    /// The bundled inverse table.
    pub fn builtin() -> Self {
        Self::new(tsv_pairs(BUILTIN_INVERSES).collect()).expect("bundled inverse table is valid")
    }

    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (a, b) in &pairs {
            let fresh_a = seen.insert(a.clone());
            let fresh_b = a == b || seen.insert(b.clone());
            if !fresh_a || !fresh_b {
                return Err(Error::Config(format!(
                    "relation in more than one inverse pair: {a} / {b}"
                )));
            }
        }
        Ok(InversePairs { pairs })
    }

    pub fn from_tsv(path: &Path) -> Result<Self> {
        Self::new(
            io::read_tsv(path, 2)?
                .into_iter()
                .map(|r| (r[0].trim().to_string(), r[1].trim().to_string()))
                .collect(),
        )
    }
}

pub fn pid_counts<'a>(triplets: impl IntoIterator<Item = &'a Triplet>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in triplets {
        *counts.entry(t.pid.clone()).or_insert(0) += 1;
    }
    counts
}

/// Maps `t` onto its canonical relation, swapping subject and object when the
/// canonical pid runs the other way. Unknown pids pass through flagged.
pub fn collapse_inverse(mut t: Triplet, vocab: &RelationVocab) -> Triplet {
    match vocab.inverse_map.get(&t.pid) {
        Some(target) => {
            if target.swap {
                std::mem::swap(&mut t.subj, &mut t.obj);
            }
            t.pid = target.canonical.clone();
        }
        None => {
            if !vocab.contains(&t.pid) {
                t.unknown_pid = true;
            }
        }
    }
    t
}

/// Collapses every triplet and drops duplicates of the same
/// `(doc, subject, object, pid)` fact, keeping the first occurrence.
pub fn collapse_all(triplets: Vec<Triplet>, vocab: &RelationVocab) -> Vec<Triplet> {
    let mut seen = HashSet::new();
    triplets
        .into_iter()
        .map(|t| collapse_inverse(t, vocab))
        .filter(|t| seen.insert((t.doc_id.clone(), t.subj, t.obj, t.pid.clone())))
        .collect()
}

/// Keeps triplets whose relation is among the `k` most frequent in the
/// stream. Ties go to the smaller pid string. Returns the restricted
/// vocabulary (ranked by frequency, names taken from `names`) alongside the
/// kept triplets.
pub fn select_top_k(
    candidates: Vec<Triplet>,
    k: usize,
    names: &RelationVocab,
) -> Result<(RelationVocab, Vec<Triplet>)> {
    if k == 0 {
        return Err(Error::arg("k must be positive"));
    }
    let ranked = top_pids(&pid_counts(&candidates), k);
    let keep: HashSet<&str> = ranked.iter().map(String::as_str).collect();
    let vocab = RelationVocab {
        entries: ranked
            .iter()
            .enumerate()
            .map(|(i, pid)| RelationEntry {
                pid: pid.clone(),
                name_en: names.name(pid).to_string(),
                rank: i + 1,
            })
            .collect(),
        inverse_map: names.inverse_map.clone(),
    };
    let kept = candidates
        .into_iter()
        .filter(|t| keep.contains(t.pid.as_str()))
        .collect();
    Ok((vocab, kept))
}

/// Same as [`select_top_k`] but frequencies and the cut are computed per
/// language.
pub fn select_top_k_per_language(
    candidates: Vec<Triplet>,
    k: usize,
    names: &RelationVocab,
) -> Result<(BTreeMap<Lang, RelationVocab>, Vec<Triplet>)> {
    if k == 0 {
        return Err(Error::arg("k must be positive"));
    }
    let mut by_lang: BTreeMap<Lang, Vec<&Triplet>> = BTreeMap::new();
    for t in &candidates {
        by_lang.entry(t.lang).or_default().push(t);
    }
    let mut vocabs = BTreeMap::new();
    let mut keep: HashMap<Lang, HashSet<String>> = HashMap::new();
    for (lang, ts) in by_lang {
        let ranked = top_pids(&pid_counts(ts), k);
        keep.insert(lang, ranked.iter().cloned().collect());
        vocabs.insert(
            lang,
            RelationVocab {
                entries: ranked
                    .iter()
                    .enumerate()
                    .map(|(i, pid)| RelationEntry {
                        pid: pid.clone(),
                        name_en: names.name(pid).to_string(),
                        rank: i + 1,
                    })
                    .collect(),
                inverse_map: names.inverse_map.clone(),
            },
        );
    }
    let kept = candidates
        .into_iter()
        .filter(|t| keep.get(&t.lang).is_some_and(|s| s.contains(&t.pid)))
        .collect();
    Ok((vocabs, kept))
}

fn top_pids(counts: &BTreeMap<String, usize>, k: usize) -> Vec<String> {
    let mut v: Vec<(&String, &usize)> = counts.iter().collect();
    v.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().take(k).map(|(p, _)| p.clone()).collect()
}

/// The entailment hypothesis: subject, relation name and object surface forms
/// separated by ` <sep> `.
pub fn entailment_hypothesis(doc: &Document, t: &Triplet, vocab: &RelationVocab) -> Result<String> {
    let (s, o) = surfaces(doc, t)?;
    Ok(format!("{s} <sep> {} <sep> {o}", vocab.name(&t.pid)))
}

pub(crate) fn surfaces<'a>(doc: &'a Document, t: &Triplet) -> Result<(&'a str, &'a str)> {
    let get = |i: usize| {
        doc.mentions
            .get(i)
            .map(|m| m.surface.as_str())
            .ok_or_else(|| Error::Invariant(format!("{}: mention {i} missing in {}", t.triplet_id, doc.doc_id)))
    };
    Ok((get(t.subj)?, get(t.obj)?))
}

/// Records `score` and moves the triplet to silver, or to nli_rejected when
/// `score < threshold` (strictly less).
pub fn apply_entailment(mut t: Triplet, score: f64, threshold: f64) -> Result<Triplet> {
    t.entail_score = Some(score);
    let to = if score < threshold {
        Status::NliRejected
    } else {
        Status::Silver
    };
    t.transition(to)?;
    Ok(t)
}

/// A triplet whose scoring failed; it stays a candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringFailure {
    pub triplet_id: String,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct FilterOutcome {
    pub triplets: Vec<Triplet>,
    pub failures: Vec<ScoringFailure>,
}

/// Single-triplet entailment filter. Premise is the document text.
#[allow(clippy::result_large_err)]
pub fn nli_filter(
    t: Triplet,
    doc: &Document,
    scorer: &dyn PairScorer,
    vocab: &RelationVocab,
    threshold: f64,
) -> Result<Triplet, (Triplet, ScoringFailure)> {
    let mut out = nli_filter_batch(vec![t], &|_| Some(doc), scorer, vocab, threshold);
    let t = out.triplets.pop().expect("one in, one out");
    match out.failures.pop() {
        Some(f) => Err((t, f)),
        None => Ok(t),
    }
}

/// Batched entailment filter. Each input triplet comes back exactly once:
/// silver, nli_rejected, or (on scorer failure) unchanged with a failure
/// record. Failed batches are retried one triplet at a time so a single bad
/// item does not hold back its neighbours.
pub fn nli_filter_batch<'d>(
    triplets: Vec<Triplet>,
    docs: &dyn Fn(&str) -> Option<&'d Document>,
    scorer: &dyn PairScorer,
    vocab: &RelationVocab,
    threshold: f64,
) -> FilterOutcome {
    score_and_apply(
        triplets,
        docs,
        scorer,
        threshold,
        |doc, t| {
            Ok(ScoreRequest {
                doc_id: doc.doc_id.clone(),
                key: t.triplet_id.clone(),
                premise: doc.text.clone(),
                hypothesis: entailment_hypothesis(doc, t, vocab)?,
            })
        },
        apply_entailment,
    )
}

pub(crate) fn score_and_apply<'d>(
    triplets: Vec<Triplet>,
    docs: &dyn Fn(&str) -> Option<&'d Document>,
    scorer: &dyn PairScorer,
    threshold: f64,
    make_request: impl Fn(&Document, &Triplet) -> Result<ScoreRequest>,
    apply: impl Fn(Triplet, f64, f64) -> Result<Triplet>,
) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    let mut pending: Vec<(Triplet, ScoreRequest)> = Vec::new();
    for t in triplets {
        let req = docs(&t.doc_id)
            .ok_or_else(|| Error::Invariant(format!("document {} not found", t.doc_id)))
            .and_then(|d| make_request(d, &t));
        match req {
            Ok(r) => pending.push((t, r)),
            Err(e) => {
                out.failures.push(ScoringFailure {
                    triplet_id: t.triplet_id.clone(),
                    message: e.to_string(),
                });
                out.triplets.push(t);
            }
        }
    }
    let batch_size = scorer.batch_size().max(1);
    let mut iter = pending.into_iter().peekable();
    while iter.peek().is_some() {
        let chunk: Vec<(Triplet, ScoreRequest)> = iter.by_ref().take(batch_size).collect();
        let reqs: Vec<ScoreRequest> = chunk.iter().map(|(_, r)| r.clone()).collect();
        match scorer.score_batch(&reqs) {
            Ok(scores) => {
                for ((t, _), s) in chunk.into_iter().zip(scores) {
                    push_applied(&mut out, t, s, threshold, &apply);
                }
            }
            Err(_) if chunk.len() > 1 => {
                for (t, r) in chunk {
                    match scorer.score_batch(std::slice::from_ref(&r)) {
                        Ok(s) => push_applied(&mut out, t, s[0], threshold, &apply),
                        Err(e) => {
                            out.failures.push(ScoringFailure {
                                triplet_id: t.triplet_id.clone(),
                                message: e.to_string(),
                            });
                            out.triplets.push(t);
                        }
                    }
                }
            }
            Err(e) => {
                for (t, _) in chunk {
                    out.failures.push(ScoringFailure {
                        triplet_id: t.triplet_id.clone(),
                        message: e.to_string(),
                    });
                    out.triplets.push(t);
                }
            }
        }
    }
    out
}

fn push_applied(
    out: &mut FilterOutcome,
    t: Triplet,
    score: f64,
    threshold: f64,
    apply: &impl Fn(Triplet, f64, f64) -> Result<Triplet>,
) {
    let keep = t.clone();
    match apply(t, score, threshold) {
        Ok(t) => out.triplets.push(t),
        Err(e) => {
            out.failures.push(ScoringFailure {
                triplet_id: keep.triplet_id.clone(),
                message: e.to_string(),
            });
            out.triplets.push(keep);
        }
    }
}
