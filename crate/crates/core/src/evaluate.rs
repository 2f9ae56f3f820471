//! Relation extraction and classification scoring.
//!
//! Matching is one-to-one: every gold triplet is consumed by at most one
//! prediction. Duplicates are removed on both sides first. Strict mode needs
//! spans, types and relation to agree; boundaries mode drops the types.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critic::{f1, ratio};
use crate::dataset::{GoldRecord, GoldTriplet};
use crate::error::{Error, Result};
use crate::io;
use crate::linearize::{decode_with, DecodeOptions, LinearTriplet};
use crate::model::{EntityType, Lang};
use crate::util::{normalize_surface, round1};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Strict,
    Boundaries,
}

/// What identifies an entity: its character span, or its normalized surface
/// for data without offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Span,
    Surface,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvalEntity {
    pub surface: String,
    pub span: Option<(usize, usize)>,
    pub etype: Option<EntityType>,
}

impl EvalEntity {
    pub fn new(surface: impl Into<String>, span: Option<(usize, usize)>, etype: Option<EntityType>) -> Self {
        EvalEntity {
            surface: normalize_surface(&surface.into()),
            span,
            etype,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvalTriplet {
    pub subject: EvalEntity,
    pub object: EvalEntity,
    pub relation: String,
}

impl From<&GoldTriplet> for EvalTriplet {
    fn from(t: &GoldTriplet) -> Self {
        let e =
            |s: &crate::dataset::TypedSpan| EvalEntity::new(s.surface.clone(), Some((s.start, s.end)), Some(s.etype));
        EvalTriplet {
            subject: e(&t.subject),
            object: e(&t.object),
            relation: t.relation.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalDoc {
    pub doc_id: String,
    pub lang: Lang,
    pub triplets: Vec<EvalTriplet>,
}

impl From<&GoldRecord> for EvalDoc {
    fn from(r: &GoldRecord) -> Self {
        EvalDoc {
            doc_id: r.doc_id.clone(),
            lang: r.lang,
            triplets: r.triplets.iter().map(EvalTriplet::from).collect(),
        }
    }
}

/// Entity identity under `basis`. A missing span never equals anything.
fn same_entity(a: &EvalEntity, b: &EvalEntity, basis: Basis) -> bool {
    match basis {
        Basis::Span => a.span.is_some() && a.span == b.span,
        Basis::Surface => a.surface == b.surface,
    }
}

pub fn matches(pred: &EvalTriplet, gold: &EvalTriplet, mode: MatchMode, basis: Basis) -> bool {
    let bounds = pred.relation == gold.relation
        && same_entity(&pred.subject, &gold.subject, basis)
        && same_entity(&pred.object, &gold.object, basis);
    match mode {
        MatchMode::Boundaries => bounds,
        MatchMode::Strict => {
            bounds && pred.subject.etype == gold.subject.etype && pred.object.etype == gold.object.etype
        }
    }
}

fn dedup(ts: &[EvalTriplet]) -> Vec<EvalTriplet> {
    let mut seen = BTreeSet::new();
    ts.iter().filter(|t| seen.insert(*t)).cloned().collect()
}

/// One-to-one matching of deduplicated triplets, returned as
/// `(gold index, pred index)` pairs into the deduplicated lists.
///
/// Exact duplicates of a gold are paired first; the rest is greedy in gold
/// order, first free prediction wins. Because the match relation is an
/// equivalence on both sides this is a maximum matching, and strict pairs are
/// always a subset of boundaries pairs.
pub fn match_triplets(
    preds: &[EvalTriplet],
    golds: &[EvalTriplet],
    mode: MatchMode,
    basis: Basis,
) -> Vec<(usize, usize)> {
    let mut used = vec![false; preds.len()];
    let mut gold_used = vec![false; golds.len()];
    let mut pairs = Vec::new();
    for (gi, g) in golds.iter().enumerate() {
        if let Some(pi) = (0..preds.len()).find(|&pi| !used[pi] && matches(&preds[pi], g, MatchMode::Strict, basis)) {
            used[pi] = true;
            gold_used[gi] = true;
            pairs.push((gi, pi));
        }
    }
    if mode == MatchMode::Boundaries {
        for (gi, g) in golds.iter().enumerate() {
            if gold_used[gi] {
                continue;
            }
            if let Some(pi) = (0..preds.len()).find(|&pi| !used[pi] && matches(&preds[pi], g, mode, basis)) {
                used[pi] = true;
                gold_used[gi] = true;
                pairs.push((gi, pi));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Counts plus percentages (one decimal).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        Scores {
            tp,
            fp,
            fn_,
            precision: round1(100.0 * p),
            recall: round1(100.0 * r),
            f1: round1(100.0 * f1(p, r)),
        }
    }

    /// Unrounded F1 in [0, 1].
    pub fn raw_f1(&self) -> f64 {
        f1(ratio(self.tp, self.tp + self.fp), ratio(self.tp, self.tp + self.fn_))
    }

    fn add(&mut self, tp: usize, fp: usize, fn_: usize) {
        *self = Scores::from_counts(self.tp + tp, self.fp + fp, self.fn_ + fn_);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub micro: Scores,
    pub macro_f1: f64,
    pub per_relation: BTreeMap<String, Scores>,
}

impl Breakdown {
    fn finish(&mut self, relations: Option<&[String]>) {
        let rels: Vec<&String> = match relations {
            Some(list) => list.iter().collect(),
            None => self
                .per_relation
                .iter()
                .filter(|(_, s)| s.tp + s.fn_ > 0)
                .map(|(r, _)| r)
                .collect(),
        };
        let sum: f64 = rels
            .iter()
            .map(|r| self.per_relation.get(*r).map(Scores::raw_f1).unwrap_or(0.0))
            .sum();
        self.macro_f1 = if rels.is_empty() {
            0.0
        } else {
            round1(100.0 * sum / rels.len() as f64)
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub mode: MatchMode,
    pub basis: Basis,
    pub overall: Breakdown,
    pub per_language: BTreeMap<Lang, Breakdown>,
}

#[derive(Debug, Clone, Default)]
pub struct ScoreOptions {
    /// Relations macro-F1 averages over. Default: every relation with at
    /// least one gold triplet.
    pub macro_relations: Option<Vec<String>>,
}

#[derive(Default)]
struct DocCounts {
    lang: Option<Lang>,
    /// relation -> (tp, fp, fn)
    by_relation: BTreeMap<String, (usize, usize, usize)>,
}

fn count_doc(
    preds: &[EvalTriplet],
    golds: &[EvalTriplet],
    mode: MatchMode,
    basis: Basis,
) -> BTreeMap<String, (usize, usize, usize)> {
    let preds = dedup(preds);
    let golds = dedup(golds);
    let pairs = match_triplets(&preds, &golds, mode, basis);
    let mut gm = vec![false; golds.len()];
    let mut pm = vec![false; preds.len()];
    for &(g, p) in &pairs {
        gm[g] = true;
        pm[p] = true;
    }
    let mut out: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (g, t) in golds.iter().enumerate() {
        let e = out.entry(t.relation.clone()).or_default();
        if gm[g] {
            e.0 += 1;
        } else {
            e.2 += 1;
        }
    }
    for (p, t) in preds.iter().enumerate() {
        if !pm[p] {
            out.entry(t.relation.clone()).or_default().1 += 1;
        }
    }
    out
}

/// Scores predictions against gold documents. Documents are keyed by
/// `doc_id`; predictions for unknown documents are false positives and gold
/// documents without predictions contribute only false negatives.
pub fn score_re(
    preds: &[EvalDoc],
    golds: &[EvalDoc],
    mode: MatchMode,
    basis: Basis,
    opts: &ScoreOptions,
) -> ScoreReport {
    let mut keyed: BTreeMap<&str, (Option<&EvalDoc>, Vec<&EvalDoc>)> = BTreeMap::new();
    for g in golds {
        keyed.entry(g.doc_id.as_str()).or_default().0 = Some(g);
    }
    for p in preds {
        keyed.entry(p.doc_id.as_str()).or_default().1.push(p);
    }
    let docs: Vec<DocCounts> = keyed
        .into_par_iter()
        .map(|(_, (g, ps))| {
            let pred_ts: Vec<EvalTriplet> = ps.iter().flat_map(|p| p.triplets.iter().cloned()).collect();
            let gold_ts = g.map(|g| g.triplets.as_slice()).unwrap_or(&[]);
            DocCounts {
                lang: g.map(|g| g.lang).or_else(|| ps.first().map(|p| p.lang)),
                by_relation: count_doc(&pred_ts, gold_ts, mode, basis),
            }
        })
        .collect();

    let mut overall = Breakdown::default();
    let mut per_language: BTreeMap<Lang, Breakdown> = BTreeMap::new();
    for d in &docs {
        let lang = d.lang.expect("every keyed document has a side");
        let lb = per_language.entry(lang).or_default();
        for (rel, &(tp, fp, fn_)) in &d.by_relation {
            for b in [&mut overall, &mut *lb] {
                b.micro.add(tp, fp, fn_);
                b.per_relation.entry(rel.clone()).or_default().add(tp, fp, fn_);
            }
        }
    }
    let macro_rel = opts.macro_relations.as_deref();
    overall.finish(macro_rel);
    for b in per_language.values_mut() {
        b.finish(macro_rel);
    }
    ScoreReport {
        mode,
        basis,
        overall,
        per_language,
    }
}

pub const NO_RELATION: &str = "no_relation";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub micro_f1: f64,
}

/// Relation classification: accuracy over all items, micro-F1 with the
/// `no_relation` class excluded from positives. Percentages, one decimal.
pub fn score_rc<S: AsRef<str>>(preds: &[S], golds: &[S]) -> Result<RcScores> {
    if preds.len() != golds.len() {
        return Err(Error::arg(format!(
            "{} predictions vs {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    let (mut correct, mut tp, mut pred_pos, mut gold_pos) = (0, 0, 0, 0);
    for (p, g) in preds.iter().zip(golds) {
        let (p, g) = (p.as_ref(), g.as_ref());
        correct += usize::from(p == g);
        pred_pos += usize::from(p != NO_RELATION);
        gold_pos += usize::from(g != NO_RELATION);
        tp += usize::from(p == g && g != NO_RELATION);
    }
    let p = ratio(tp, pred_pos);
    let r = ratio(tp, gold_pos);
    Ok(RcScores {
        accuracy: round1(100.0 * ratio(correct, preds.len())),
        precision: round1(100.0 * p),
        recall: round1(100.0 * r),
        micro_f1: round1(100.0 * f1(p, r)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorBucket {
    EntityType,
    SpanUnderlap,
    SpanOverlap,
    Subject,
    Object,
    Relation,
    Other,
}

impl ErrorBucket {
    pub const ALL: [ErrorBucket; 7] = [
        ErrorBucket::EntityType,
        ErrorBucket::SpanUnderlap,
        ErrorBucket::SpanOverlap,
        ErrorBucket::Subject,
        ErrorBucket::Object,
        ErrorBucket::Relation,
        ErrorBucket::Other,
    ];
}

/// How a predicted entity relates to a gold one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rel {
    Same,
    /// Prediction strictly inside the gold entity.
    Inside,
    /// Gold strictly inside the prediction.
    Contains,
    Disjoint,
    Crossing,
}

fn relate(p: &EvalEntity, g: &EvalEntity, basis: Basis) -> Rel {
    match basis {
        Basis::Span => match (p.span, g.span) {
            (Some((ps, pe)), Some((gs, ge))) => {
                if (ps, pe) == (gs, ge) {
                    Rel::Same
                } else if gs <= ps && pe <= ge {
                    Rel::Inside
                } else if ps <= gs && ge <= pe {
                    Rel::Contains
                } else if pe <= gs || ge <= ps {
                    Rel::Disjoint
                } else {
                    Rel::Crossing
                }
            }
            _ => Rel::Disjoint,
        },
        Basis::Surface => {
            if p.surface == g.surface {
                Rel::Same
            } else if g.surface.contains(&p.surface) {
                Rel::Inside
            } else if p.surface.contains(&g.surface) {
                Rel::Contains
            } else {
                Rel::Disjoint
            }
        }
    }
}

fn bucket_against(p: &EvalTriplet, g: &EvalTriplet, basis: Basis) -> ErrorBucket {
    let s = relate(&p.subject, &g.subject, basis);
    let o = relate(&p.object, &g.object, basis);
    let same_rel = p.relation == g.relation;
    match (s, o, same_rel) {
        (Rel::Same, Rel::Same, true) => ErrorBucket::EntityType,
        (Rel::Same, Rel::Inside, true) | (Rel::Inside, Rel::Same, true) => ErrorBucket::SpanUnderlap,
        (Rel::Same, Rel::Contains, true) | (Rel::Contains, Rel::Same, true) => ErrorBucket::SpanOverlap,
        (Rel::Disjoint, Rel::Same, true) => ErrorBucket::Subject,
        (Rel::Same, Rel::Disjoint, true) => ErrorBucket::Object,
        (Rel::Same, Rel::Same, false) => ErrorBucket::Relation,
        _ => ErrorBucket::Other,
    }
}

/// Buckets every strict-mode false positive: each goes to the first category
/// (in [`ErrorBucket::ALL`] order) that some gold triplet of the same document
/// supports. Counts sum to the strict false positives.
pub fn bucket_errors(preds: &[EvalDoc], golds: &[EvalDoc], basis: Basis) -> BTreeMap<ErrorBucket, usize> {
    let gold_by_id: HashMap<&str, &EvalDoc> = golds.iter().map(|g| (g.doc_id.as_str(), g)).collect();
    let mut by_doc: BTreeMap<&str, Vec<EvalTriplet>> = BTreeMap::new();
    for p in preds {
        by_doc
            .entry(p.doc_id.as_str())
            .or_default()
            .extend(p.triplets.iter().cloned());
    }
    let mut out: BTreeMap<ErrorBucket, usize> = ErrorBucket::ALL.iter().map(|b| (*b, 0)).collect();
    for (doc_id, ps) in by_doc {
        let ps = dedup(&ps);
        let gs = gold_by_id.get(doc_id).map(|g| dedup(&g.triplets)).unwrap_or_default();
        let pairs = match_triplets(&ps, &gs, MatchMode::Strict, basis);
        let matched: BTreeSet<usize> = pairs.iter().map(|(_, p)| *p).collect();
        for (pi, p) in ps.iter().enumerate() {
            if matched.contains(&pi) {
                continue;
            }
            let b = gs
                .iter()
                .map(|g| bucket_against(p, g, basis))
                .min()
                .unwrap_or(ErrorBucket::Other);
            *out.get_mut(&b).expect("all buckets present") += 1;
        }
    }
    out
}

/// A raw model output line: the decoder's target string for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPrediction {
    pub doc_id: String,
    pub prediction: String,
}

/// Decodes raw predictions. Spans are recovered as the first occurrence of
/// each surface in the gold document text; surfaces not found keep no span
/// and can only match in surface basis.
pub fn decode_predictions(raw: &[RawPrediction], golds: &[GoldRecord], typed: bool) -> Vec<EvalDoc> {
    let by_id: HashMap<&str, &GoldRecord> = golds.iter().map(|g| (g.doc_id.as_str(), g)).collect();
    let opts = DecodeOptions {
        typed,
        relation_names: None,
    };
    raw.iter()
        .filter_map(|r| {
            let gold = by_id.get(r.doc_id.as_str())?;
            let decoded = decode_with(&r.prediction, &opts);
            Some(EvalDoc {
                doc_id: r.doc_id.clone(),
                lang: gold.lang,
                triplets: decoded.triplets.iter().map(|t| from_linear(t, &gold.text)).collect(),
            })
        })
        .collect()
}

fn locate(text: &str, surface: &str) -> Option<(usize, usize)> {
    let b = text.find(surface)?;
    let start = text[..b].chars().count();
    Some((start, start + surface.chars().count()))
}

pub fn from_linear(t: &LinearTriplet, text: &str) -> EvalTriplet {
    EvalTriplet {
        subject: EvalEntity::new(t.subject.clone(), locate(text, &t.subject), t.subject_type),
        object: EvalEntity::new(t.object.clone(), locate(text, &t.object), t.object_type),
        relation: t.relation.clone(),
    }
}

/// Loads a structured prediction file (the dataset line schema).
pub fn load_structured(path: &Path) -> Result<Vec<EvalDoc>> {
    Ok(io::read_jsonl::<GoldRecord>(path)?.iter().map(EvalDoc::from).collect())
}

pub fn load_raw(path: &Path) -> Result<Vec<RawPrediction>> {
    io::read_jsonl(path)
}

/// Plain-text table: one row per language (and per relation if asked),
/// percentages with one decimal.
pub fn render_report(report: &ScoreReport, per_language: bool, per_relation: bool) -> String {
    let mut out = format!(
        "mode={:?} basis={:?}\n{:<40} {:>7} {:>7} {:>7} {:>7}\n",
        report.mode, report.basis, "scope", "P", "R", "F1", "MacroF1"
    )
    .to_lowercase();
    let row = |out: &mut String, name: &str, s: &Scores, m: Option<f64>| {
        let m = m.map(|m| format!("{m:.1}")).unwrap_or_default();
        out.push_str(&format!(
            "{name:<40} {:>7.1} {:>7.1} {:>7.1} {m:>7}\n",
            s.precision, s.recall, s.f1
        ));
    };
    row(&mut out, "all", &report.overall.micro, Some(report.overall.macro_f1));
    if per_language {
        for (lang, b) in &report.per_language {
            row(&mut out, lang.as_str(), &b.micro, Some(b.macro_f1));
        }
    }
    if per_relation {
        for (rel, s) in &report.overall.per_relation {
            row(&mut out, rel, s, None);
        }
    }
    out
}
