//! Final dataset assembly: page-disjoint splits, the human-validated gold
//! subset with entity types, and relation distribution statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::RelationVocab;
use crate::io;
use crate::model::{Document, EntityType, Lang, Mention, MentionKind, Status, Triplet};
use crate::typing::EntityTypeMap;
use crate::util::unit_interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::arg(format!("unknown split {s:?}")))
    }
}

/// Train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = SplitRatios {
            train,
            validation,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::arg(format!("split ratios must be non-negative: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    fn bucket(&self, u: f64) -> Split {
        if u < self.train {
            Split::Train
        } else if u < self.train + self.validation {
            Split::Validation
        } else {
            Split::Test
        }
    }
}

/// Cross-lingual page identity. Pages listed in the table share a key with
/// their interlanguage counterparts; anything else is keyed by its page id.
#[derive(Debug, Clone, Default)]
pub struct PageKeys {
    keys: HashMap<(Lang, String), String>,
}

impl PageKeys {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, lang: Lang, page_id: impl Into<String>, key: impl Into<String>) {
        self.keys.insert((lang, page_id.into()), key.into());
    }

    /// Reads `lang \t page_id \t key` rows.
    pub fn from_tsv(path: &Path) -> Result<Self> {
        let mut keys = PageKeys::new();
        for (i, row) in io::read_tsv(path, 3)?.into_iter().enumerate() {
            let lang: Lang = row[0]
                .trim()
                .parse()
                .map_err(|_| Error::format(path, i + 1, format!("unknown language {:?}", row[0])))?;
            keys.insert(lang, row[1].trim(), row[2].trim());
        }
        Ok(keys)
    }

    pub fn key<'a>(&'a self, lang: Lang, page_id: &'a str) -> &'a str {
        self.keys
            .get(&(lang, page_id.to_string()))
            .map(String::as_str)
            .unwrap_or(page_id)
    }
}

/// Split per `(lang, page_id)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub pages: BTreeMap<(Lang, String), Split>,
}

impl SplitAssignment {
    pub fn get(&self, lang: Lang, page_id: &str) -> Option<Split> {
        self.pages.get(&(lang, page_id.to_string())).copied()
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    pub fn count(&self, split: Split) -> usize {
        self.pages.values().filter(|s| **s == split).count()
    }

    /// `lang \t page_id \t split`, sorted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# lang\tpage_id\tsplit\n");
        for ((lang, page), split) in &self.pages {
            out.push_str(&format!("{lang}\t{page}\t{split}\n"));
        }
        out
    }

    pub fn from_tsv(path: &Path) -> Result<Self> {
        let mut pages = BTreeMap::new();
        for (i, row) in io::read_tsv(path, 3)?.into_iter().enumerate() {
            let bad = |m: String| Error::format(path, i + 1, m);
            let lang: Lang = row[0]
                .parse()
                .map_err(|_| bad(format!("unknown language {:?}", row[0])))?;
            let split: Split = row[2].parse().map_err(|_| bad(format!("unknown split {:?}", row[2])))?;
            pages.insert((lang, row[1].clone()), split);
        }
        Ok(SplitAssignment { pages })
    }
}

/// Hashes each page key with `seed` onto `[0, 1)` and buckets it by the
/// cumulative ratios. Pages sharing a key always share a split.
pub fn assign_splits<'a, I>(pages: I, keys: &PageKeys, ratios: SplitRatios, seed: u64) -> Result<SplitAssignment>
where
    I: IntoIterator<Item = (Lang, &'a str)>,
{
    ratios.validate()?;
    let seed = seed.to_string();
    let pages = pages
        .into_iter()
        .map(|(lang, page)| {
            let u = unit_interval(&[&seed, "split", keys.key(lang, page)]);
            ((lang, page.to_string()), ratios.bucket(u))
        })
        .collect();
    Ok(SplitAssignment { pages })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedSpan {
    pub surface: String,
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub etype: EntityType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldTriplet {
    pub subject: TypedSpan,
    pub object: TypedSpan,
    #[serde(default)]
    pub pid: String,
    pub relation: String,
}

/// One line of a dataset file: a document with its typed triplets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub doc_id: String,
    #[serde(default)]
    pub page_id: String,
    pub lang: Lang,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub text: String,
    pub triplets: Vec<GoldTriplet>,
}

pub fn mention_type(m: &Mention, types: &EntityTypeMap) -> EntityType {
    match m.kind {
        MentionKind::Date => EntityType::Date,
        MentionKind::Quantity => EntityType::Number,
        MentionKind::Entity => types.type_of(m.entity_id.as_deref().unwrap_or_default()),
    }
}

fn typed_span(m: &Mention, types: &EntityTypeMap) -> TypedSpan {
    TypedSpan {
        surface: m.surface.clone(),
        start: m.start,
        end: m.end,
        etype: mention_type(m, types),
    }
}

/// Dataset records grouped by split and language.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldDataset {
    pub parts: BTreeMap<(Split, Lang), Vec<GoldRecord>>,
}

impl GoldDataset {
    pub fn triplet_count(&self) -> usize {
        self.parts
            .values()
            .flat_map(|rs| rs.iter())
            .map(|r| r.triplets.len())
            .sum()
    }

    pub fn records(&self) -> impl Iterator<Item = &GoldRecord> {
        self.parts.values().flat_map(|rs| rs.iter())
    }
}

/// Keeps `gold_true` triplets whose relation is in `vocab`, attaches entity
/// types and groups them into per-document records under their page's split.
/// A page missing from `splits` is an invariant breach.
pub fn build_gold<'d>(
    triplets: &[Triplet],
    docs: &dyn Fn(&str) -> Option<&'d Document>,
    vocab: &RelationVocab,
    types: &EntityTypeMap,
    splits: &SplitAssignment,
) -> Result<GoldDataset> {
    let mut by_doc: BTreeMap<&str, Vec<&Triplet>> = BTreeMap::new();
    for t in triplets {
        if t.status == Status::GoldTrue && vocab.contains(&t.pid) {
            by_doc.entry(t.doc_id.as_str()).or_default().push(t);
        }
    }
    let mut out = GoldDataset::default();
    for (doc_id, ts) in by_doc {
        let doc = docs(doc_id).ok_or_else(|| Error::Invariant(format!("document {doc_id} not found")))?;
        let split = splits
            .get(doc.lang, &doc.page_id)
            .ok_or_else(|| Error::Invariant(format!("page {} ({}) has no split", doc.page_id, doc.lang)))?;
        let mut gts = Vec::with_capacity(ts.len());
        for t in ts {
            let m = |i: usize| {
                doc.mentions
                    .get(i)
                    .ok_or_else(|| Error::Invariant(format!("{}: mention {i} missing", t.triplet_id)))
            };
            let (s, o) = (m(t.subj)?, m(t.obj)?);
            gts.push(GoldTriplet {
                subject: typed_span(s, types),
                object: typed_span(o, types),
                pid: t.pid.clone(),
                relation: vocab.name(&t.pid).to_string(),
            });
        }
        gts.sort_by_key(|g| (g.subject.start, g.object.start, g.pid.clone()));
        out.parts.entry((split, doc.lang)).or_default().push(GoldRecord {
            doc_id: doc.doc_id.clone(),
            page_id: doc.page_id.clone(),
            lang: doc.lang,
            title: doc.title.clone(),
            text: doc.text.clone(),
            triplets: gts,
        });
    }
    Ok(out)
}

/// Relation counts by language and split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsTable {
    pub langs: Vec<Lang>,
    /// relation -> (lang, split) -> count
    pub rows: BTreeMap<String, BTreeMap<(Lang, Split), usize>>,
}

impl CountsTable {
    pub fn from_dataset(ds: &GoldDataset) -> Self {
        let mut langs = BTreeSet::new();
        let mut rows: BTreeMap<String, BTreeMap<(Lang, Split), usize>> = BTreeMap::new();
        for ((split, lang), recs) in &ds.parts {
            langs.insert(*lang);
            for t in recs.iter().flat_map(|r| r.triplets.iter()) {
                *rows
                    .entry(t.relation.clone())
                    .or_default()
                    .entry((*lang, *split))
                    .or_insert(0) += 1;
            }
        }
        CountsTable {
            langs: langs.into_iter().collect(),
            rows,
        }
    }

    pub fn get(&self, relation: &str, lang: Lang, split: Split) -> usize {
        self.rows
            .get(relation)
            .and_then(|r| r.get(&(lang, split)))
            .copied()
            .unwrap_or(0)
    }

    pub fn split_total(&self, relation: &str, split: Split) -> usize {
        self.langs.iter().map(|l| self.get(relation, *l, split)).sum()
    }

    /// Relations ordered by train count, then overall count, descending; ties
    /// by name.
    pub fn ordered_relations(&self) -> Vec<&str> {
        let mut rels: Vec<&str> = self.rows.keys().map(String::as_str).collect();
        let total = |r: &str| Split::ALL.iter().map(|s| self.split_total(r, *s)).sum::<usize>();
        rels.sort_by(|a, b| {
            self.split_total(b, Split::Train)
                .cmp(&self.split_total(a, Split::Train))
                .then_with(|| total(b).cmp(&total(a)))
                .then_with(|| a.cmp(b))
        });
        rels
    }

    /// TSV with one column per (language, split) pair.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("relation");
        for l in &self.langs {
            for s in Split::ALL {
                out.push_str(&format!("\t{l}.{s}"));
            }
        }
        out.push('\n');
        for r in self.ordered_relations() {
            out.push_str(r);
            for l in &self.langs {
                for s in Split::ALL {
                    out.push_str(&format!("\t{}", self.get(r, *l, s)));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Writes `{split}/{lang}.jsonl` files and `counts.tsv` under `dir`.
pub fn write_gold(dir: &Path, ds: &GoldDataset) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for ((split, lang), recs) in &ds.parts {
        let path = dir.join(split.as_str()).join(format!("{lang}.jsonl"));
        io::write_jsonl(&path, recs)?;
        written.push(path);
    }
    let counts = dir.join("counts.tsv");
    io::write_text(&counts, &CountsTable::from_dataset(ds).to_tsv())?;
    written.push(counts);
    Ok(written)
}

pub fn read_gold_dir(dir: &Path) -> Result<GoldDataset> {
    let mut ds = GoldDataset::default();
    for split in Split::ALL {
        let sub = dir.join(split.as_str());
        let Ok(entries) = std::fs::read_dir(&sub) else {
            continue;
        };
        let mut files: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        files.sort();
        for f in files {
            let Some(lang) = f
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<Lang>().ok())
            else {
                continue;
            };
            ds.parts.insert((split, lang), io::read_jsonl(&f)?);
        }
    }
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationShare {
    pub relation: String,
    pub count: usize,
    pub pct: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LanguageDistribution {
    pub total: usize,
    /// Sorted by count descending, then name.
    pub relations: Vec<RelationShare>,
    /// Summed share of the configured rollup relations.
    pub rollup_pct: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub rollup: Vec<String>,
    pub per_language: BTreeMap<Lang, LanguageDistribution>,
}

/// Per-language relation shares (percent, unrounded) plus a rollup over
/// `rollup` relation names. An empty dataset gives an empty report.
pub fn distribution_report<'a, I>(records: I, rollup: &[String]) -> DistributionReport
where
    I: IntoIterator<Item = &'a GoldRecord>,
{
    let mut counts: BTreeMap<Lang, BTreeMap<&str, usize>> = BTreeMap::new();
    for r in records {
        let c = counts.entry(r.lang).or_default();
        for t in &r.triplets {
            *c.entry(t.relation.as_str()).or_insert(0) += 1;
        }
    }
    let mut per_language = BTreeMap::new();
    for (lang, c) in counts {
        let total: usize = c.values().sum();
        if total == 0 {
            continue;
        }
        let mut relations: Vec<RelationShare> = c
            .iter()
            .map(|(r, n)| RelationShare {
                relation: r.to_string(),
                count: *n,
                pct: 100.0 * *n as f64 / total as f64,
            })
            .collect();
        relations.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.relation.cmp(&b.relation)));
        let rollup_pct = relations
            .iter()
            .filter(|s| rollup.contains(&s.relation))
            .map(|s| s.pct)
            .sum();
        per_language.insert(
            lang,
            LanguageDistribution {
                total,
                relations,
                rollup_pct,
            },
        );
    }
    DistributionReport {
        rollup: rollup.to_vec(),
        per_language,
    }
}
