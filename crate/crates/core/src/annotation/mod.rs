//! Human validation of silver triplets: sampling, HIT packing, judgment
//! aggregation and agreement statistics. [`service`] serves HITs over HTTP.

mod alpha;
pub mod service;
pub mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use alpha::{krippendorff_alpha, Alpha};

use crate::dataset::PageKeys;
use crate::error::{Error, Result};
use crate::extract::RelationVocab;
use crate::io;
use crate::model::{Document, Lang, Status, Triplet};

pub const ITEMS_PER_HIT: usize = 10;
pub const DEFAULT_REQUIRED: usize = 3;
pub const DEFAULT_QUORUM: usize = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub seed: u64,
    /// Rule (ii) sample size per language, on top of the shared pages.
    pub extra_per_language: usize,
    #[serde(skip)]
    pub page_keys: PageKeys,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            seed: 0,
            extra_per_language: 100,
            page_keys: PageKeys::new(),
        }
    }
}

/// Picks silver triplets for annotation in `langs`: (i) every triplet from a
/// page present in all of `langs`, then (ii) per language, a weighted sample
/// without replacement of the rest with weight `1 / count(relation)`, so rare
/// relations are favoured. Output is sorted by `(lang, triplet_id)`.
pub fn sample_for_annotation<'d>(
    silver: &[Triplet],
    docs: &dyn Fn(&str) -> Option<&'d Document>,
    langs: &[Lang],
    cfg: &SamplingConfig,
) -> Result<Vec<Triplet>> {
    let wanted: BTreeSet<Lang> = langs.iter().copied().collect();
    let pool: Vec<(&Triplet, String)> = silver
        .iter()
        .filter(|t| t.status == Status::Silver && wanted.contains(&t.lang))
        .map(|t| {
            let doc = docs(&t.doc_id).ok_or_else(|| Error::Invariant(format!("document {} not found", t.doc_id)))?;
            Ok((t, cfg.page_keys.key(doc.lang, &doc.page_id).to_string()))
        })
        .collect::<Result<_>>()?;
    if pool.is_empty() {
        return Ok(Vec::new());
    }

    let mut langs_per_key: HashMap<&str, BTreeSet<Lang>> = HashMap::new();
    for (t, key) in &pool {
        langs_per_key.entry(key.as_str()).or_default().insert(t.lang);
    }
    let shared = |key: &str| langs_per_key.get(key).is_some_and(|ls| *ls == wanted);

    let mut chosen: Vec<Triplet> = Vec::new();
    let mut rest: BTreeMap<Lang, Vec<&Triplet>> = BTreeMap::new();
    for (t, key) in &pool {
        if shared(key) {
            chosen.push((*t).clone());
        } else {
            rest.entry(t.lang).or_default().push(t);
        }
    }

    for (lang, mut ts) in rest {
        ts.sort_by(|a, b| a.triplet_id.cmp(&b.triplet_id));
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for t in &ts {
            *freq.entry(t.pid.as_str()).or_insert(0) += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ crate::util::stable_hash(&["sample", lang.as_str()]));
        let picked = ts
            .choose_multiple_weighted(&mut rng, cfg.extra_per_language, |t| 1.0 / freq[t.pid.as_str()] as f64)
            .map_err(|e| Error::Invariant(format!("sampling weights: {e}")))?;
        chosen.extend(picked.map(|t| (*t).clone()));
    }
    chosen.sort_by(|a, b| (a.lang, &a.triplet_id).cmp(&(b.lang, &b.triplet_id)));
    Ok(chosen)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRef {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

/// What an annotator sees for one triplet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitItem {
    pub triplet_id: String,
    pub doc_id: String,
    pub lang: Lang,
    pub text: String,
    pub subject: SpanRef,
    pub object: SpanRef,
    pub pid: String,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub hit_id: String,
    pub lang: Lang,
    pub items: Vec<HitItem>,
}

pub fn hit_items<'d>(
    triplets: &[Triplet],
    docs: &dyn Fn(&str) -> Option<&'d Document>,
    vocab: &RelationVocab,
) -> Result<Vec<HitItem>> {
    triplets
        .iter()
        .map(|t| {
            let doc = docs(&t.doc_id).ok_or_else(|| Error::Invariant(format!("document {} not found", t.doc_id)))?;
            let span = |i: usize| {
                doc.mentions
                    .get(i)
                    .map(|m| SpanRef {
                        start: m.start,
                        end: m.end,
                        surface: m.surface.clone(),
                    })
                    .ok_or_else(|| Error::Invariant(format!("{}: mention {i} missing", t.triplet_id)))
            };
            Ok(HitItem {
                triplet_id: t.triplet_id.clone(),
                doc_id: t.doc_id.clone(),
                lang: t.lang,
                text: doc.text.clone(),
                subject: span(t.subj)?,
                object: span(t.obj)?,
                pid: t.pid.clone(),
                relation: vocab.name(&t.pid).to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitPlan {
    pub hits: Vec<Hit>,
    /// Items that did not fill a whole HIT (when partial HITs are not allowed).
    pub leftovers: Vec<HitItem>,
}

/// Packs items into HITs of `per_hit`, per language, in `triplet_id` order.
/// A short final HIT is only produced with `allow_partial`; otherwise those
/// items come back as leftovers. HIT ids are `{lang}-{index:05}`.
pub fn assign_hits(items: &[HitItem], per_hit: usize, allow_partial: bool) -> Result<HitPlan> {
    if per_hit == 0 {
        return Err(Error::arg("per_hit must be at least 1"));
    }
    let mut by_lang: BTreeMap<Lang, Vec<&HitItem>> = BTreeMap::new();
    for it in items {
        by_lang.entry(it.lang).or_default().push(it);
    }
    let mut plan = HitPlan::default();
    for (lang, mut its) in by_lang {
        its.sort_by(|a, b| a.triplet_id.cmp(&b.triplet_id));
        its.dedup_by(|a, b| a.triplet_id == b.triplet_id);
        for (i, chunk) in its.chunks(per_hit).enumerate() {
            if chunk.len() < per_hit && !allow_partial {
                plan.leftovers.extend(chunk.iter().map(|x| (*x).clone()));
                continue;
            }
            plan.hits.push(Hit {
                hit_id: format!("{lang}-{i:05}"),
                lang,
                items: chunk.iter().map(|x| (*x).clone()).collect(),
            });
        }
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub triplet_id: String,
    pub annotator_id: String,
    pub verdict: bool,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    GoldTrue,
    GoldFalse,
    Pending,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregated {
    pub lang: Lang,
    pub verdict: Verdict,
    /// The judgments that counted, in the order they counted.
    pub counted: Vec<(String, bool)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateOutcome {
    pub triplets: BTreeMap<String, Aggregated>,
    /// Judgments for triplets that were not sampled.
    pub unknown: Vec<Judgment>,
}

impl AggregateOutcome {
    pub fn count(&self, lang: Option<Lang>, verdict: Verdict) -> usize {
        self.triplets
            .values()
            .filter(|a| a.verdict == verdict && lang.is_none_or(|l| a.lang == l))
            .count()
    }
}

/// Majority vote per sampled triplet. Judgments are ordered by
/// `(submitted_at, annotator_id)`; the first `required` distinct annotators
/// count and later or repeated judgments are ignored, which makes the result
/// independent of log order. `quorum` true votes give gold_true, fewer give
/// gold_false, and fewer than `required` judgments leave the triplet pending.
pub fn aggregate(
    sampled: &BTreeMap<String, Lang>,
    judgments: &[Judgment],
    required: usize,
    quorum: usize,
) -> Result<AggregateOutcome> {
    if required == 0 || quorum == 0 || quorum > required {
        return Err(Error::arg(format!(
            "need 0 < quorum <= required, got quorum={quorum} required={required}"
        )));
    }
    let mut ordered: Vec<&Judgment> = judgments.iter().collect();
    ordered.sort_by(|a, b| {
        (a.submitted_at, &a.annotator_id, a.verdict).cmp(&(b.submitted_at, &b.annotator_id, b.verdict))
    });
    let mut out = AggregateOutcome::default();
    for (id, lang) in sampled {
        out.triplets.insert(
            id.clone(),
            Aggregated {
                lang: *lang,
                verdict: Verdict::Pending,
                counted: Vec::new(),
            },
        );
    }
    for j in ordered {
        let Some(a) = out.triplets.get_mut(&j.triplet_id) else {
            out.unknown.push(j.clone());
            continue;
        };
        if a.counted.len() < required && !a.counted.iter().any(|(who, _)| *who == j.annotator_id) {
            a.counted.push((j.annotator_id.clone(), j.verdict));
        }
    }
    for a in out.triplets.values_mut() {
        if a.counted.len() == required {
            let yes = a.counted.iter().filter(|(_, v)| *v).count();
            a.verdict = if yes >= quorum {
                Verdict::GoldTrue
            } else {
                Verdict::GoldFalse
            };
        }
    }
    Ok(out)
}

/// Moves aggregated silver triplets to gold_true / gold_false. Pending and
/// unsampled triplets are left as they are.
pub fn apply_verdicts(triplets: Vec<Triplet>, outcome: &AggregateOutcome) -> Result<Vec<Triplet>> {
    triplets
        .into_iter()
        .map(|mut t| {
            match outcome.triplets.get(&t.triplet_id).map(|a| a.verdict) {
                Some(Verdict::GoldTrue) => t.transition(Status::GoldTrue)?,
                Some(Verdict::GoldFalse) => t.transition(Status::GoldFalse)?,
                _ => {}
            }
            Ok(t)
        })
        .collect()
}

/// `100 · false / (true + false)`; `None` when nothing is aggregated.
pub fn filtered_pct(gold_true: usize, gold_false: usize) -> Option<f64> {
    let n = gold_true + gold_false;
    (n > 0).then(|| 100.0 * gold_false as f64 / n as f64)
}

/// Per-language filtered percentage; languages with nothing aggregated are
/// absent.
pub fn filtered_stats(outcome: &AggregateOutcome) -> BTreeMap<Lang, f64> {
    let langs: BTreeSet<Lang> = outcome.triplets.values().map(|a| a.lang).collect();
    langs
        .into_iter()
        .filter_map(|l| {
            filtered_pct(
                outcome.count(Some(l), Verdict::GoldTrue),
                outcome.count(Some(l), Verdict::GoldFalse),
            )
            .map(|p| (l, p))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub lang: Lang,
    /// Absent when fewer than two triplets have two or more judgments.
    pub alpha: Option<f64>,
    pub alpha_degenerate: bool,
    pub n_annotators: usize,
    pub filtered_pct: Option<f64>,
    pub gold_true: usize,
    pub gold_false: usize,
    pub pending: usize,
}

/// Agreement over the judgments that counted in aggregation for `lang`.
pub fn agreement_report(lang: Lang, outcome: &AggregateOutcome) -> AgreementReport {
    let units: Vec<&Aggregated> = outcome.triplets.values().filter(|a| a.lang == lang).collect();
    let annotators: BTreeSet<&str> = units
        .iter()
        .flat_map(|a| a.counted.iter().map(|(w, _)| w.as_str()))
        .collect();
    let col: BTreeMap<&str, usize> = annotators.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    let matrix: Vec<Vec<Option<bool>>> = units
        .iter()
        .map(|a| {
            let mut row = vec![None; col.len()];
            for (w, v) in &a.counted {
                row[col[w.as_str()]] = Some(*v);
            }
            row
        })
        .collect();
    let alpha = krippendorff_alpha(&matrix).ok();
    let gold_true = outcome.count(Some(lang), Verdict::GoldTrue);
    let gold_false = outcome.count(Some(lang), Verdict::GoldFalse);
    AgreementReport {
        lang,
        alpha: alpha.map(|a| a.value),
        alpha_degenerate: alpha.is_some_and(|a| a.degenerate),
        n_annotators: annotators.len(),
        filtered_pct: filtered_pct(gold_true, gold_false),
        gold_true,
        gold_false,
        pending: outcome.count(Some(lang), Verdict::Pending),
    }
}

/// Relation descriptions for annotators, by pid and language.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDescriptions {
    pub entries: BTreeMap<String, BTreeMap<String, String>>,
}

const DEFAULT_DESCRIPTIONS: &str = include_str!("../../data/relation_descriptions.tsv");

impl RelationDescriptions {
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_DESCRIPTIONS)
    }

    /// Reads `pid \t lang \t description` rows.
    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(Self::parse(
            &std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
        ))
    }

    fn parse(src: &str) -> Self {
        let mut entries: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for line in src.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
            let mut parts = line.splitn(3, '\t');
            if let (Some(pid), Some(lang), Some(desc)) = (parts.next(), parts.next(), parts.next()) {
                entries
                    .entry(pid.trim().to_string())
                    .or_default()
                    .insert(lang.trim().to_string(), desc.trim().to_string());
            }
        }
        RelationDescriptions { entries }
    }

    /// Description in `lang`, falling back to English.
    pub fn get(&self, pid: &str, lang: Lang) -> Option<&str> {
        let e = self.entries.get(pid)?;
        e.get(lang.as_str()).or_else(|| e.get("en")).map(String::as_str)
    }
}

pub fn write_hits(path: &Path, hits: &[Hit]) -> Result<usize> {
    io::write_jsonl(path, hits)
}

pub fn read_hits(path: &Path) -> Result<Vec<Hit>> {
    io::read_jsonl(path)
}
