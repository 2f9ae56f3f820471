//! End-to-end dataset build driven by a TOML config.
//!
//! Stages run in order and each appends one record to `manifest.jsonl` in
//! the output directory:
//!
//! ```text
//! config → ingest → link_values → align → collapse → top_k → nli → critic
//!   → typing → annotation_export → [aggregate] → splits → linearize
//!   → [build_gold → distribution]
//! ```
//!
//! The bracketed stages run only when a judgments file is configured. The
//! manifest carries no timestamps, so the same config and inputs give
//! byte-identical outputs. On failure the failing stage is recorded with its
//! error and the run stops.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::annotation::{self, Judgment, SamplingConfig, Verdict};
use crate::critic::{critic_filter_batch, DEFAULT_CRITIC_THRESHOLD};
use crate::dataset::{self, PageKeys, SplitRatios};
use crate::error::{Error, Result};
use crate::extract::{self, InversePairs, RelationVocab, TripleStore};
use crate::ingest::{parse_corpus, TitleMap, TitleMaps, ValueLinker};
use crate::io;
use crate::linearize::{self, EncodeContext, LangTokens, Mode, TrainingRecord};
use crate::model::{Document, Lang, MentionKind, Status, Triplet};
use crate::scorer::{HttpScorer, MockScorer, PairScorer};
use crate::typing::{confirm_or_replace, EntityTypeMap};

pub const DEFAULT_NLI_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerConfig {
    /// Deterministic scorer: a constant or hashed default plus optional
    /// `doc_id \t hypothesis \t score` rules.
    Mock {
        #[serde(default)]
        constant: Option<f64>,
        #[serde(default)]
        seed: Option<String>,
        #[serde(default)]
        rules: Option<PathBuf>,
        #[serde(default)]
        fail_docs: Vec<String>,
    },
    Http {
        url: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_batch")]
        batch_size: usize,
    },
}

fn default_timeout() -> u64 {
    60
}

fn default_batch() -> usize {
    32
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig::Mock {
            constant: Some(1.0),
            seed: None,
            rules: None,
            fail_docs: Vec::new(),
        }
    }
}

impl ScorerConfig {
    pub fn build(&self) -> Result<Box<dyn PairScorer>> {
        match self {
            ScorerConfig::Mock {
                constant,
                seed,
                rules,
                fail_docs,
            } => {
                let mut s = match (constant, seed) {
                    (Some(c), None) => MockScorer::constant(*c),
                    (None, Some(seed)) => MockScorer::hashed(seed.clone()),
                    (None, None) => MockScorer::constant(1.0),
                    (Some(_), Some(_)) => {
                        return Err(Error::Config("mock scorer takes either constant or seed".into()))
                    }
                };
                if let Some(r) = rules {
                    s = s.load_rules(r)?;
                }
                for d in fail_docs {
                    s = s.failing_on(d);
                }
                Ok(Box::new(s))
            }
            ScorerConfig::Http {
                url,
                timeout_secs,
                batch_size,
            } => Ok(Box::new(HttpScorer::new(
                url.clone(),
                Duration::from_secs(*timeout_secs),
                *batch_size,
            )?)),
        }
    }

    fn resolve(&mut self, base: &Path) {
        if let ScorerConfig::Mock { rules: Some(r), .. } = self {
            *r = base.join(&*r);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    /// Abstract corpus, one JSON record per line.
    pub corpus: PathBuf,
    /// `title \t entity_id` per language.
    pub title_maps: BTreeMap<Lang, PathBuf>,
    /// `subject \t pid \t object` facts.
    pub triples: PathBuf,
    #[serde(default)]
    pub relations: Option<PathBuf>,
    #[serde(default)]
    pub inverses: Option<PathBuf>,
    #[serde(default)]
    pub value_patterns: Option<PathBuf>,
    /// Prior `entity_id \t type` map.
    #[serde(default)]
    pub types: Option<PathBuf>,
    /// Classifier output `entity_id \t type`, reconciled with the prior map.
    #[serde(default)]
    pub predicted_types: Option<PathBuf>,
    /// Interlanguage page keys, `lang \t page_id \t key`.
    #[serde(default)]
    pub page_keys: Option<PathBuf>,
    /// Judgment log from the annotation service.
    #[serde(default)]
    pub judgments: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub top_k: usize,
    pub per_language: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            top_k: 32,
            per_language: false,
        }
    }
}

macro_rules! filter_config {
    ($name:ident, $threshold:expr) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            pub threshold: f64,
            pub scorer: ScorerConfig,
        }

        impl Default for $name {
            fn default() -> Self {
                $name {
                    threshold: $threshold,
                    scorer: ScorerConfig::default(),
                }
            }
        }
    };
}

filter_config!(NliConfig, DEFAULT_NLI_THRESHOLD);
filter_config!(CriticConfig, DEFAULT_CRITIC_THRESHOLD);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationConfig {
    /// Target languages; empty means every language in the corpus.
    pub langs: Vec<Lang>,
    pub seed: u64,
    pub extra_per_language: usize,
    pub per_hit: usize,
    pub allow_partial: bool,
    pub required: usize,
    pub quorum: usize,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        AnnotationConfig {
            langs: Vec::new(),
            seed: 0,
            extra_per_language: 100,
            per_hit: annotation::ITEMS_PER_HIT,
            allow_partial: false,
            required: annotation::DEFAULT_REQUIRED,
            quorum: annotation::DEFAULT_QUORUM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub seed: u64,
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let r = SplitRatios::default();
        SplitConfig {
            seed: 0,
            train: r.train,
            validation: r.validation,
            test: r.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearizeConfig {
    pub rc_fraction: f64,
    pub seed: u64,
    pub typed: bool,
}

impl Default for LinearizeConfig {
    fn default() -> Self {
        LinearizeConfig {
            rc_fraction: 0.05,
            seed: 0,
            typed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Relation names summed into the rollup share of the distribution
    /// report.
    pub rollup: Vec<String>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            rollup: [
                "located in the administrative territorial entity",
                "country",
                "capital",
                "location",
                "headquarters location",
                "located in or next to body of water",
                "located on terrain feature",
                "shares border with",
                "place of birth",
                "country of citizenship",
                "country of origin",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Inputs,
    pub output_dir: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub extract: ExtractConfig,
    #[serde(default)]
    pub nli: NliConfig,
    #[serde(default)]
    pub critic: CriticConfig,
    #[serde(default)]
    pub annotation: AnnotationConfig,
    #[serde(default)]
    pub splits: SplitConfig,
    #[serde(default)]
    pub linearize: LinearizeConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file; relative paths are resolved against its
    /// directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&src)?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| *p = base.join(&*p);
        let i = &mut self.inputs;
        fix(&mut i.corpus);
        fix(&mut i.triples);
        i.title_maps.values_mut().for_each(fix);
        for p in [
            &mut i.relations,
            &mut i.inverses,
            &mut i.value_patterns,
            &mut i.types,
            &mut i.predicted_types,
            &mut i.page_keys,
            &mut i.judgments,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
        self.nli.scorer.resolve(base);
        self.critic.scorer.resolve(base);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub stage: String,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ManifestEntry {
    fn ok(stage: &str) -> Self {
        ManifestEntry {
            stage: stage.to_string(),
            status: StageStatus::Ok,
            counts: BTreeMap::new(),
            values: BTreeMap::new(),
            error: None,
        }
    }

    fn count(mut self, key: &str, n: usize) -> Self {
        self.counts.insert(key.to_string(), n);
        self
    }

    fn value(mut self, key: &str, v: impl Serialize) -> Self {
        self.values
            .insert(key.to_string(), serde_json::to_value(v).expect("serializable"));
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn stage(&self, name: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.stage == name)
    }

    pub fn count(&self, stage: &str, key: &str) -> Option<usize> {
        self.stage(stage)?.counts.get(key).copied()
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(Manifest {
            entries: io::read_jsonl(path)?,
        })
    }
}

struct Run {
    out: PathBuf,
    manifest: Manifest,
}

impl Run {
    fn record(&mut self, e: ManifestEntry) -> Result<()> {
        tracing::info!(stage = %e.stage, counts = ?e.counts, "stage done");
        self.manifest.entries.push(e);
        self.flush()
    }

    fn flush(&self) -> Result<()> {
        io::write_jsonl(&self.out.join("manifest.jsonl"), &self.manifest.entries).map(|_| ())
    }
}

fn status_counts(ts: &[Triplet]) -> BTreeMap<Status, usize> {
    let mut m = BTreeMap::new();
    for t in ts {
        *m.entry(t.status).or_insert(0) += 1;
    }
    m
}

fn load_vocab(cfg: &Inputs) -> Result<RelationVocab> {
    match &cfg.relations {
        Some(p) => RelationVocab::from_tsv(p),
        None => Ok(RelationVocab::builtin()),
    }
}

fn load_inverses(cfg: &Inputs) -> Result<InversePairs> {
    match &cfg.inverses {
        Some(p) => InversePairs::from_tsv(p),
        None => Ok(InversePairs::builtin()),
    }
}

/// Runs the whole pipeline. The manifest is written after every stage, so a
/// failed run leaves a record of how far it got.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let mut run = Run {
        out: cfg.output_dir.clone(),
        manifest: Manifest::default(),
    };
    let result = pool.install(|| stages(cfg, &mut run));
    if let Err(e) = &result {
        run.manifest.entries.push(ManifestEntry {
            stage: e.stage.clone(),
            status: StageStatus::Failed,
            counts: BTreeMap::new(),
            values: BTreeMap::new(),
            error: Some(e.source.to_string()),
        });
        run.flush()?;
    }
    result.map_err(|e| e.source)?;
    Ok(run.manifest)
}

struct StageError {
    stage: String,
    source: Error,
}

trait AtStage<T> {
    fn at(self, stage: &str) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: &str) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError {
            stage: stage.to_string(),
            source,
        })
    }
}

fn stages(cfg: &PipelineConfig, run: &mut Run) -> std::result::Result<(), StageError> {
    let out = cfg.output_dir.clone();
    run.record(
        ManifestEntry::ok("config")
            .value("nli_threshold", cfg.nli.threshold)
            .value("critic_threshold", cfg.critic.threshold)
            .value("top_k", cfg.extract.top_k)
            .value("annotation_seed", cfg.annotation.seed)
            .value("split_seed", cfg.splits.seed)
            .value(
                "split_ratios",
                [cfg.splits.train, cfg.splits.validation, cfg.splits.test],
            )
            .value("linearize_seed", cfg.linearize.seed)
            .value("rc_fraction", cfg.linearize.rc_fraction),
    )
    .at("config")?;

    // ingest
    let mut maps: TitleMaps = HashMap::new();
    for (lang, p) in &cfg.inputs.title_maps {
        maps.insert(*lang, TitleMap::from_tsv(p, *lang).at("ingest")?);
    }
    let lines = io::read_lines(&cfg.inputs.corpus).at("ingest")?;
    let ingested = parse_corpus(&lines, &maps);
    io::write_jsonl(&out.join("diagnostics.jsonl"), &ingested.diagnostics).at("ingest")?;
    let s = ingested.stats;
    run.record(
        ManifestEntry::ok("ingest")
            .count("records", s.records)
            .count("documents", s.documents)
            .count("malformed", s.malformed)
            .count("unknown_lang", s.unknown_lang)
            .count("links", s.links)
            .count("links_unresolved", s.links_unresolved),
    )
    .at("ingest")?;

    // link_values
    let linker = match &cfg.inputs.value_patterns {
        Some(p) => ValueLinker::from_path(p).at("link_values")?,
        None => ValueLinker::builtin(),
    };
    let docs: Vec<Document> = {
        use rayon::prelude::*;
        ingested
            .documents
            .into_par_iter()
            .map(|d| linker.link_values(d))
            .collect()
    };
    let kind_count = |k: MentionKind| docs.iter().flat_map(|d| &d.mentions).filter(|m| m.kind == k).count();
    io::write_jsonl(&out.join("documents.jsonl"), &docs).at("link_values")?;
    run.record(
        ManifestEntry::ok("link_values")
            .count("entities", kind_count(MentionKind::Entity))
            .count("dates", kind_count(MentionKind::Date))
            .count("quantities", kind_count(MentionKind::Quantity)),
    )
    .at("link_values")?;
    let by_id: HashMap<&str, &Document> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let lookup = |id: &str| by_id.get(id).copied();

    // align
    let store = TripleStore::from_tsv(&cfg.inputs.triples).at("align")?;
    let candidates: Vec<Triplet> = {
        use rayon::prelude::*;
        docs.par_iter().flat_map_iter(|d| extract::align(d, &store)).collect()
    };
    run.record(
        ManifestEntry::ok("align")
            .count("facts", store.len())
            .count("candidates", candidates.len()),
    )
    .at("align")?;

    // collapse
    let mut names = load_vocab(&cfg.inputs).at("collapse")?;
    let inverses = load_inverses(&cfg.inputs).at("collapse")?;
    let raw_counts = extract::pid_counts(&candidates);
    names.set_inverses(&inverses, &raw_counts);
    let collapsed = extract::collapse_all(candidates, &names);
    let unknown = collapsed.iter().filter(|t| t.unknown_pid).count();
    run.record(
        ManifestEntry::ok("collapse")
            .count("triplets", collapsed.len())
            .count("unknown_pid", unknown)
            .count("relations", extract::pid_counts(&collapsed).len()),
    )
    .at("collapse")?;

    // top_k
    let (vocab, kept) = if cfg.extract.per_language {
        let (per_lang, kept) = extract::select_top_k_per_language(collapsed, cfg.extract.top_k, &names).at("top_k")?;
        let mut entries: BTreeMap<String, extract::RelationEntry> = BTreeMap::new();
        for v in per_lang.values() {
            for e in &v.entries {
                entries.entry(e.pid.clone()).or_insert_with(|| e.clone());
            }
        }
        let mut entries: Vec<_> = entries.into_values().collect();
        entries.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.pid.cmp(&b.pid)));
        (
            RelationVocab {
                entries,
                inverse_map: names.inverse_map.clone(),
            },
            kept,
        )
    } else {
        extract::select_top_k(collapsed, cfg.extract.top_k, &names).at("top_k")?
    };
    let rel_tsv: String = vocab
        .entries
        .iter()
        .map(|e| format!("{}\t{}\n", e.pid, e.name_en))
        .collect();
    io::write_text(&out.join("relations_top.tsv"), &rel_tsv).at("top_k")?;
    run.record(
        ManifestEntry::ok("top_k")
            .count("triplets", kept.len())
            .count("relations", vocab.len()),
    )
    .at("top_k")?;

    // nli
    let nli_scorer = cfg.nli.scorer.build().at("nli")?;
    let nli = extract::nli_filter_batch(kept, &lookup, nli_scorer.as_ref(), &vocab, cfg.nli.threshold);
    let c = status_counts(&nli.triplets);
    let get = |m: &BTreeMap<Status, usize>, s: Status| m.get(&s).copied().unwrap_or(0);
    run.record(
        ManifestEntry::ok("nli")
            .count("silver", get(&c, Status::Silver))
            .count("nli_rejected", get(&c, Status::NliRejected))
            .count("failures", nli.failures.len()),
    )
    .at("nli")?;

    // critic
    let critic_scorer = cfg.critic.scorer.build().at("critic")?;
    let criticized = critic_filter_batch(
        nli.triplets,
        &lookup,
        critic_scorer.as_ref(),
        &vocab,
        cfg.critic.threshold,
    );
    let c = status_counts(&criticized.triplets);
    let critic_failures = criticized.failures.len();
    let mut failures = nli.failures;
    failures.extend(criticized.failures);
    io::write_jsonl(&out.join("scoring_failures.jsonl"), &failures).at("critic")?;
    run.record(
        ManifestEntry::ok("critic")
            .count("silver", get(&c, Status::Silver))
            .count("critic_rejected", get(&c, Status::CriticRejected))
            .count("failures", critic_failures),
    )
    .at("critic")?;
    let mut triplets = criticized.triplets;

    // typing
    let prior = match &cfg.inputs.types {
        Some(p) => EntityTypeMap::from_tsv(p).at("typing")?,
        None => EntityTypeMap::new(),
    };
    let mut typing = ManifestEntry::ok("typing").count("prior", prior.len());
    let types = match &cfg.inputs.predicted_types {
        Some(p) => {
            let predicted = EntityTypeMap::from_tsv(p).at("typing")?;
            let rep = confirm_or_replace(&prior, &predicted).at("typing")?;
            typing = typing
                .count("confirmations", rep.confirmations)
                .count("changes", rep.changes)
                .count("added", rep.added);
            rep.map
        }
        None => prior,
    };
    io::write_text(&out.join("types.tsv"), &types.to_tsv()).at("typing")?;
    run.record(typing.count("typed", types.len())).at("typing")?;

    // annotation_export
    let langs: Vec<Lang> = if cfg.annotation.langs.is_empty() {
        docs.iter()
            .map(|d| d.lang)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        cfg.annotation.langs.clone()
    };
    let page_keys = match &cfg.inputs.page_keys {
        Some(p) => PageKeys::from_tsv(p).at("annotation_export")?,
        None => PageKeys::new(),
    };
    let sampling = SamplingConfig {
        seed: cfg.annotation.seed,
        extra_per_language: cfg.annotation.extra_per_language,
        page_keys: page_keys.clone(),
    };
    let sampled = annotation::sample_for_annotation(&triplets, &lookup, &langs, &sampling).at("annotation_export")?;
    let items = annotation::hit_items(&sampled, &lookup, &vocab).at("annotation_export")?;
    let plan = annotation::assign_hits(&items, cfg.annotation.per_hit, cfg.annotation.allow_partial)
        .at("annotation_export")?;
    annotation::write_hits(&out.join("annotation").join("hits.jsonl"), &plan.hits).at("annotation_export")?;
    io::write_jsonl(&out.join("annotation").join("leftovers.jsonl"), &plan.leftovers).at("annotation_export")?;
    let in_hits: usize = plan.hits.iter().map(|h| h.items.len()).sum();
    run.record(
        ManifestEntry::ok("annotation_export")
            .count("sampled", sampled.len())
            .count("hits", plan.hits.len())
            .count("items", in_hits)
            .count("leftovers", plan.leftovers.len()),
    )
    .at("annotation_export")?;

    // aggregate
    let aggregated = match &cfg.inputs.judgments {
        Some(path) => {
            let judgments: Vec<Judgment> = io::read_jsonl(path).at("aggregate")?;
            let hit_ids: BTreeMap<String, Lang> = plan
                .hits
                .iter()
                .flat_map(|h| h.items.iter().map(|i| (i.triplet_id.clone(), i.lang)))
                .collect();
            let outcome = annotation::aggregate(&hit_ids, &judgments, cfg.annotation.required, cfg.annotation.quorum)
                .at("aggregate")?;
            triplets = annotation::apply_verdicts(triplets, &outcome).at("aggregate")?;
            let reports: Vec<annotation::AgreementReport> = langs
                .iter()
                .map(|l| annotation::agreement_report(*l, &outcome))
                .collect();
            io::write_jsonl(&out.join("annotation").join("agreement.jsonl"), &reports).at("aggregate")?;
            let gt = outcome.count(None, Verdict::GoldTrue);
            let gf = outcome.count(None, Verdict::GoldFalse);
            run.record(
                ManifestEntry::ok("aggregate")
                    .count("judgments", judgments.len())
                    .count("gold_true", gt)
                    .count("gold_false", gf)
                    .count("pending", outcome.count(None, Verdict::Pending))
                    .count("unknown", outcome.unknown.len())
                    .value("filtered_pct", annotation::filtered_pct(gt, gf))
                    .value("filtered_pct_by_lang", annotation::filtered_stats(&outcome)),
            )
            .at("aggregate")?;
            true
        }
        None => false,
    };
    io::write_jsonl(&out.join("triplets.jsonl"), &triplets).at("aggregate")?;

    // splits
    let ratios = SplitRatios::new(cfg.splits.train, cfg.splits.validation, cfg.splits.test).at("splits")?;
    let splits = dataset::assign_splits(
        docs.iter().map(|d| (d.lang, d.page_id.as_str())),
        &page_keys,
        ratios,
        cfg.splits.seed,
    )
    .at("splits")?;
    io::write_text(&out.join("splits.tsv"), &splits.to_tsv()).at("splits")?;
    let mut e = ManifestEntry::ok("splits").count("pages", splits.len());
    for s in dataset::Split::ALL {
        e = e.count(s.as_str(), splits.count(s));
    }
    run.record(e).at("splits")?;

    // linearize: silver (and gold-true) triplets into seq2seq training files
    let lang_tokens = LangTokens::builtin();
    let ctx = EncodeContext {
        vocab: &vocab,
        types: cfg.linearize.typed.then_some(&types),
        lang_tokens: &lang_tokens,
    };
    let mut per_doc: BTreeMap<&str, Vec<Triplet>> = BTreeMap::new();
    for t in &triplets {
        if matches!(t.status, Status::Silver | Status::GoldTrue) {
            per_doc.entry(t.doc_id.as_str()).or_default().push(t.clone());
        }
    }
    let mut by_split: BTreeMap<dataset::Split, Vec<TrainingRecord>> = BTreeMap::new();
    for d in &docs {
        let split = splits.get(d.lang, &d.page_id).expect("every page assigned");
        by_split.entry(split).or_default().push(TrainingRecord {
            doc: d.clone(),
            triplets: per_doc.remove(d.doc_id.as_str()).unwrap_or_default(),
        });
    }
    let mut e = ManifestEntry::ok("linearize");
    let (mut re, mut rc) = (0, 0);
    for (split, records) in &by_split {
        let samples = linearize::sample_rc_fraction(records, cfg.linearize.rc_fraction, cfg.linearize.seed, &ctx)
            .at("linearize")?;
        re += samples.iter().filter(|s| s.mode == Mode::Re).count();
        rc += samples.iter().filter(|s| s.mode == Mode::Rc).count();
        linearize::write_training_file(&out.join("linearized").join(format!("{split}.jsonl")), &samples)
            .at("linearize")?;
    }
    e = e.count("re", re).count("rc", rc);
    run.record(e).at("linearize")?;

    if aggregated {
        let ds = dataset::build_gold(&triplets, &lookup, &vocab, &types, &splits).at("build_gold")?;
        let files = dataset::write_gold(&out.join("gold"), &ds).at("build_gold")?;
        run.record(
            ManifestEntry::ok("build_gold")
                .count("records", ds.records().count())
                .count("triplets", ds.triplet_count())
                .count("files", files.len()),
        )
        .at("build_gold")?;

        let report = dataset::distribution_report(ds.records(), &cfg.dataset.rollup);
        io::write_text(
            &out.join("gold").join("distribution.json"),
            &serde_json::to_string_pretty(&report)
                .map_err(Error::from)
                .at("distribution")?,
        )
        .at("distribution")?;
        let rollup: BTreeMap<Lang, f64> = report.per_language.iter().map(|(l, d)| (*l, d.rollup_pct)).collect();
        run.record(
            ManifestEntry::ok("distribution")
                .count("languages", report.per_language.len())
                .value("rollup_pct", rollup),
        )
        .at("distribution")?;
    }
    Ok(())
}
