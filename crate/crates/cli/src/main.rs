use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use relkit::annotation::service::{self, AnnotationService, ServiceConfig};
use relkit::annotation::store::{read_annotators, JudgmentLog, SystemClock};
use relkit::annotation::{self, Judgment, RelationDescriptions, SamplingConfig};
use relkit::critic::critic_filter_batch;
use relkit::dataset::{self, GoldRecord, PageKeys, SplitAssignment, SplitRatios};
use relkit::evaluate::{self, Basis, MatchMode, ScoreOptions};
use relkit::extract::{self, InversePairs, RelationVocab, TripleStore};
use relkit::ingest::{parse_corpus, TitleMap, TitleMaps, ValueLinker};
use relkit::io;
use relkit::linearize::{self, EncodeContext, LangTokens, TrainingRecord};
use relkit::model::{Document, Lang, Status, Triplet};
use relkit::pipeline::{run_pipeline, PipelineConfig};
use relkit::scorer::{HttpScorer, MockScorer, PairScorer};
use relkit::typing::{self, confirm_or_replace, EntityTypeMap, SynsetGraph};

#[derive(Parser)]
#[command(
    name = "relkit",
    version,
    about = "Build and evaluate multilingual relation-extraction datasets"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log verbosity, e.g. `info` or `relkit=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the abstract corpus and link entities, dates and quantities.
    Ingest(IngestArgs),
    /// Align documents with the fact store, collapse inverses, keep the top-K relations.
    Extract(ExtractArgs),
    /// Entailment filter: candidates become silver or nli_rejected.
    FilterNli(FilterArgs),
    /// Critic filter: silver triplets stay silver or become critic_rejected.
    FilterCritic(FilterArgs),
    /// Reconcile an entity-type map with classifier predictions.
    TypeEntities(TypeArgs),
    /// Write classifier inputs for the typing training subset.
    TypingSubset(TypingSubsetArgs),
    /// Sample silver triplets and pack them into HITs.
    AnnotateExport(ExportArgs),
    /// Aggregate judgments into gold verdicts and agreement reports.
    Aggregate(AggregateArgs),
    /// Assign pages to train/validation/test.
    Split(SplitArgs),
    /// Build the gold dataset files and counts table.
    Build(BuildArgs),
    /// Linearize triplets into seq2seq training samples.
    Linearize(LinearizeArgs),
    /// Score predictions against gold records.
    Score(ScoreArgs),
    /// Serve HITs and collect judgments over HTTP.
    ServeAnnotation(ServeArgs),
    /// Run every stage from a TOML config.
    Run { config: PathBuf },
}

fn parse_lang_path(s: &str) -> Result<(Lang, PathBuf), String> {
    let (l, p) = s.split_once('=').ok_or("expected LANG=PATH")?;
    Ok((l.parse().map_err(|e| format!("{e}"))?, PathBuf::from(p)))
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// `LANG=titles.tsv`, repeatable.
    #[arg(long = "title-map", value_parser = parse_lang_path, required = true)]
    title_maps: Vec<(Lang, PathBuf)>,
    #[arg(long)]
    value_patterns: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    documents: PathBuf,
    #[arg(long)]
    triples: PathBuf,
    /// `pid \t name`; defaults to the bundled table.
    #[arg(long)]
    relations: Option<PathBuf>,
    #[arg(long)]
    inverses: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    top_k: usize,
    #[arg(long)]
    per_language: bool,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the selected relation table.
    #[arg(long)]
    vocab_out: PathBuf,
}

#[derive(Args)]
struct ScorerArgs {
    /// HTTP scoring endpoint.
    #[arg(long, conflicts_with = "mock_constant")]
    scorer_url: Option<String>,
    /// Use a constant mock score instead of a model.
    #[arg(long)]
    mock_constant: Option<f64>,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
}

impl ScorerArgs {
    fn build(&self) -> Result<Box<dyn PairScorer>> {
        match (&self.scorer_url, self.mock_constant) {
            (Some(url), None) => Ok(Box::new(HttpScorer::new(
                url.clone(),
                Duration::from_secs(self.timeout_secs),
                self.batch_size,
            )?)),
            (None, Some(c)) => Ok(Box::new(MockScorer::constant(c))),
            _ => bail!("pass exactly one of --scorer-url or --mock-constant"),
        }
    }
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    documents: PathBuf,
    #[arg(long)]
    triplets: PathBuf,
    /// Relation table from `extract --vocab-out`.
    #[arg(long)]
    relations: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    failures: Option<PathBuf>,
}

#[derive(Args)]
struct TypeArgs {
    #[arg(long)]
    prior: PathBuf,
    #[arg(long)]
    predicted: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TypingSubsetArgs {
    #[arg(long)]
    nodes: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    core: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    documents: PathBuf,
    #[arg(long)]
    triplets: PathBuf,
    #[arg(long)]
    relations: PathBuf,
    /// Comma-separated language codes.
    #[arg(long, value_delimiter = ',', required = true)]
    langs: Vec<Lang>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    extra_per_language: usize,
    #[arg(long)]
    page_keys: Option<PathBuf>,
    #[arg(long, default_value_t = annotation::ITEMS_PER_HIT)]
    per_hit: usize,
    #[arg(long)]
    allow_partial: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    hits: PathBuf,
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long)]
    triplets: PathBuf,
    #[arg(long, default_value_t = annotation::DEFAULT_REQUIRED)]
    required: usize,
    #[arg(long, default_value_t = annotation::DEFAULT_QUORUM)]
    quorum: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    documents: PathBuf,
    #[arg(long)]
    page_keys: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `train,validation,test`.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    ratios: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    documents: PathBuf,
    #[arg(long)]
    triplets: PathBuf,
    #[arg(long)]
    relations: PathBuf,
    #[arg(long)]
    types: PathBuf,
    #[arg(long)]
    splits: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Relation names summed into the rollup share, one per line.
    #[arg(long)]
    rollup: Option<PathBuf>,
}

#[derive(Args)]
struct LinearizeArgs {
    #[arg(long)]
    documents: PathBuf,
    #[arg(long)]
    triplets: PathBuf,
    #[arg(long)]
    relations: PathBuf,
    #[arg(long)]
    types: Option<PathBuf>,
    /// Emit `<subj>`/`<obj>` instead of entity-type tokens.
    #[arg(long)]
    untyped: bool,
    #[arg(long, default_value_t = 0.05)]
    rc_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    lang_tokens: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Boundaries,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Span,
    Surface,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredFormat {
    /// `{"doc_id", "prediction"}` lines holding decoder output.
    Raw,
    /// Lines in the dataset record schema.
    Structured,
}

#[derive(Args)]
struct ScoreArgs {
    /// Gold JSONL file or a dataset directory.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_enum, default_value = "structured")]
    format: PredFormat,
    #[arg(long, value_enum, default_value = "strict")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "span")]
    basis: BasisArg,
    /// Raw predictions use `<subj>`/`<obj>` markers.
    #[arg(long)]
    untyped: bool,
    #[arg(long)]
    per_relation: bool,
    #[arg(long)]
    per_language: bool,
    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    hits: PathBuf,
    /// `annotator_id \t qualified`.
    #[arg(long)]
    annotators: PathBuf,
    /// Append-only judgment log.
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    descriptions: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long, default_value_t = annotation::DEFAULT_REQUIRED)]
    required: usize,
    #[arg(long, default_value_t = annotation::DEFAULT_QUORUM)]
    quorum: usize,
    #[arg(long, default_value_t = 30)]
    lease_minutes: u64,
}

fn load_docs(path: &Path) -> Result<Vec<Document>> {
    io::read_jsonl(path).with_context(|| format!("reading documents from {}", path.display()))
}

fn load_triplets(path: &Path) -> Result<Vec<Triplet>> {
    io::read_jsonl(path).with_context(|| format!("reading triplets from {}", path.display()))
}

fn index(docs: &[Document]) -> HashMap<&str, &Document> {
    docs.iter().map(|d| (d.doc_id.as_str(), d)).collect()
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mut maps: TitleMaps = HashMap::new();
    for (lang, p) in &a.title_maps {
        maps.insert(*lang, TitleMap::from_tsv(p, *lang)?);
    }
    let lines = io::read_lines(&a.corpus)?;
    let out = parse_corpus(&lines, &maps);
    let linker = match &a.value_patterns {
        Some(p) => ValueLinker::from_path(p)?,
        None => ValueLinker::builtin(),
    };
    let docs: Vec<Document> = out.documents.into_iter().map(|d| linker.link_values(d)).collect();
    io::write_jsonl(&a.out, &docs)?;
    if let Some(p) = &a.diagnostics {
        io::write_jsonl(p, &out.diagnostics)?;
    }
    print_json(&out.stats)
}

fn extract(a: ExtractArgs) -> Result<()> {
    let docs = load_docs(&a.documents)?;
    let store = TripleStore::from_tsv(&a.triples)?;
    let mut names = match &a.relations {
        Some(p) => RelationVocab::from_tsv(p)?,
        None => RelationVocab::builtin(),
    };
    let inverses = match &a.inverses {
        Some(p) => InversePairs::from_tsv(p)?,
        None => InversePairs::builtin(),
    };
    let candidates: Vec<Triplet> = docs.iter().flat_map(|d| extract::align(d, &store)).collect();
    names.set_inverses(&inverses, &extract::pid_counts(&candidates));
    let collapsed = extract::collapse_all(candidates, &names);
    let (entries, kept) = if a.per_language {
        let (per_lang, kept) = extract::select_top_k_per_language(collapsed, a.top_k, &names)?;
        let mut seen = BTreeMap::new();
        for v in per_lang.values() {
            for e in &v.entries {
                seen.entry(e.pid.clone()).or_insert_with(|| e.name_en.clone());
            }
        }
        (seen.into_iter().collect::<Vec<_>>(), kept)
    } else {
        let (vocab, kept) = extract::select_top_k(collapsed, a.top_k, &names)?;
        (vocab.entries.into_iter().map(|e| (e.pid, e.name_en)).collect(), kept)
    };
    io::write_jsonl(&a.out, &kept)?;
    let tsv: String = entries.iter().map(|(p, n)| format!("{p}\t{n}\n")).collect();
    io::write_text(&a.vocab_out, &tsv)?;
    eprintln!("{} triplets over {} relations", kept.len(), entries.len());
    Ok(())
}

fn filter(a: FilterArgs, critic: bool) -> Result<()> {
    let docs = load_docs(&a.documents)?;
    let by_id = index(&docs);
    let lookup = |id: &str| by_id.get(id).copied();
    let triplets = load_triplets(&a.triplets)?;
    let vocab = RelationVocab::from_tsv(&a.relations)?;
    let scorer = a.scorer.build()?;
    let outcome = if critic {
        let t = a.threshold.unwrap_or(relkit::critic::DEFAULT_CRITIC_THRESHOLD);
        critic_filter_batch(triplets, &lookup, scorer.as_ref(), &vocab, t)
    } else {
        let t = a.threshold.unwrap_or(relkit::pipeline::DEFAULT_NLI_THRESHOLD);
        extract::nli_filter_batch(triplets, &lookup, scorer.as_ref(), &vocab, t)
    };
    io::write_jsonl(&a.out, &outcome.triplets)?;
    if let Some(p) = &a.failures {
        io::write_jsonl(p, &outcome.failures)?;
    }
    let mut counts: BTreeMap<Status, usize> = BTreeMap::new();
    for t in &outcome.triplets {
        *counts.entry(t.status).or_insert(0) += 1;
    }
    print_json(&serde_json::json!({ "statuses": counts, "failures": outcome.failures.len() }))
}

fn type_entities(a: TypeArgs) -> Result<()> {
    let prior = EntityTypeMap::from_tsv(&a.prior)?;
    let predicted = EntityTypeMap::from_tsv(&a.predicted)?;
    let rep = confirm_or_replace(&prior, &predicted)?;
    io::write_text(&a.out, &rep.map.to_tsv())?;
    print_json(&rep)
}

fn typing_subset(a: TypingSubsetArgs) -> Result<()> {
    let graph = SynsetGraph::load(&a.nodes, &a.edges, &a.core)?;
    let subset = typing::select_training_subset(&graph);
    let inputs = subset
        .iter()
        .map(|s| {
            Ok(serde_json::json!({
                "synset_id": s.synset_id,
                "input": typing::build_input(s)?,
            }))
        })
        .collect::<relkit::Result<Vec<_>>>()?;
    io::write_jsonl(&a.out, &inputs)?;
    eprintln!("{} of {} synsets selected", subset.len(), graph.len());
    Ok(())
}

fn annotate_export(a: ExportArgs) -> Result<()> {
    let docs = load_docs(&a.documents)?;
    let by_id = index(&docs);
    let lookup = |id: &str| by_id.get(id).copied();
    let triplets = load_triplets(&a.triplets)?;
    let vocab = RelationVocab::from_tsv(&a.relations)?;
    let langs = a.langs;
    let cfg = SamplingConfig {
        seed: a.seed,
        extra_per_language: a.extra_per_language,
        page_keys: match &a.page_keys {
            Some(p) => PageKeys::from_tsv(p)?,
            None => PageKeys::new(),
        },
    };
    let sampled = annotation::sample_for_annotation(&triplets, &lookup, &langs, &cfg)?;
    let items = annotation::hit_items(&sampled, &lookup, &vocab)?;
    let plan = annotation::assign_hits(&items, a.per_hit, a.allow_partial)?;
    annotation::write_hits(&a.out_dir.join("hits.jsonl"), &plan.hits)?;
    io::write_jsonl(&a.out_dir.join("leftovers.jsonl"), &plan.leftovers)?;
    print_json(&serde_json::json!({
        "sampled": sampled.len(),
        "hits": plan.hits.len(),
        "leftovers": plan.leftovers.len(),
    }))
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let hits = annotation::read_hits(&a.hits)?;
    let judgments: Vec<Judgment> = io::read_jsonl(&a.judgments)?;
    let sampled: BTreeMap<String, Lang> = hits
        .iter()
        .flat_map(|h| h.items.iter().map(|i| (i.triplet_id.clone(), i.lang)))
        .collect();
    let outcome = annotation::aggregate(&sampled, &judgments, a.required, a.quorum)?;
    let triplets = annotation::apply_verdicts(load_triplets(&a.triplets)?, &outcome)?;
    io::write_jsonl(&a.out, &triplets)?;
    let langs: std::collections::BTreeSet<Lang> = sampled.values().copied().collect();
    let reports: Vec<_> = langs
        .iter()
        .map(|l| annotation::agreement_report(*l, &outcome))
        .collect();
    io::write_jsonl(&a.report, &reports)?;
    print_json(&reports)
}

fn parse_ratios(s: &str) -> Result<SplitRatios> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .context("ratios must be three numbers")?;
    let [t, va, te] = v[..] else {
        bail!("ratios must be three numbers");
    };
    Ok(SplitRatios::new(t, va, te)?)
}

fn split(a: SplitArgs) -> Result<()> {
    let docs = load_docs(&a.documents)?;
    let keys = match &a.page_keys {
        Some(p) => PageKeys::from_tsv(p)?,
        None => PageKeys::new(),
    };
    let ratios = parse_ratios(&a.ratios)?;
    let s = dataset::assign_splits(docs.iter().map(|d| (d.lang, d.page_id.as_str())), &keys, ratios, a.seed)?;
    io::write_text(&a.out, &s.to_tsv())?;
    let counts: BTreeMap<&str, usize> = dataset::Split::ALL.iter().map(|x| (x.as_str(), s.count(*x))).collect();
    print_json(&counts)
}

fn build(a: BuildArgs) -> Result<()> {
    let docs = load_docs(&a.documents)?;
    let by_id = index(&docs);
    let lookup = |id: &str| by_id.get(id).copied();
    let triplets = load_triplets(&a.triplets)?;
    let vocab = RelationVocab::from_tsv(&a.relations)?;
    let types = EntityTypeMap::from_tsv(&a.types)?;
    let splits = SplitAssignment::from_tsv(&a.splits)?;
    let ds = dataset::build_gold(&triplets, &lookup, &vocab, &types, &splits)?;
    dataset::write_gold(&a.out_dir, &ds)?;
    let rollup: Vec<String> = match &a.rollup {
        Some(p) => io::read_lines(p)?
            .into_iter()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect(),
        None => relkit::pipeline::DatasetConfig::default().rollup,
    };
    let report = dataset::distribution_report(ds.records(), &rollup);
    io::write_text(
        &a.out_dir.join("distribution.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    eprintln!("{} records, {} triplets", ds.records().count(), ds.triplet_count());
    Ok(())
}

fn linearize_cmd(a: LinearizeArgs) -> Result<()> {
    let docs = load_docs(&a.documents)?;
    let vocab = RelationVocab::from_tsv(&a.relations)?;
    let types = match &a.types {
        Some(p) => EntityTypeMap::from_tsv(p)?,
        None => EntityTypeMap::new(),
    };
    let lang_tokens = match &a.lang_tokens {
        Some(p) => LangTokens::from_path(p)?,
        None => LangTokens::builtin(),
    };
    let ctx = EncodeContext {
        vocab: &vocab,
        types: (!a.untyped).then_some(&types),
        lang_tokens: &lang_tokens,
    };
    let mut per_doc: BTreeMap<String, Vec<Triplet>> = BTreeMap::new();
    for t in load_triplets(&a.triplets)? {
        if matches!(t.status, Status::Silver | Status::GoldTrue) {
            per_doc.entry(t.doc_id.clone()).or_default().push(t);
        }
    }
    let records: Vec<TrainingRecord> = docs
        .into_iter()
        .map(|d| {
            let triplets = per_doc.remove(&d.doc_id).unwrap_or_default();
            TrainingRecord { doc: d, triplets }
        })
        .collect();
    let samples = linearize::sample_rc_fraction(&records, a.rc_fraction, a.seed, &ctx)?;
    linearize::write_training_file(&a.out, &samples)?;
    eprintln!("{} samples", samples.len());
    Ok(())
}

fn load_gold(path: &Path) -> Result<Vec<GoldRecord>> {
    if path.is_dir() {
        Ok(dataset::read_gold_dir(path)?.records().cloned().collect())
    } else {
        Ok(io::read_jsonl(path)?)
    }
}

fn score(a: ScoreArgs) -> Result<()> {
    let gold = load_gold(&a.gold)?;
    let preds = match a.format {
        PredFormat::Structured => evaluate::load_structured(&a.pred)?,
        PredFormat::Raw => evaluate::decode_predictions(&evaluate::load_raw(&a.pred)?, &gold, !a.untyped),
    };
    let golds: Vec<evaluate::EvalDoc> = gold.iter().map(evaluate::EvalDoc::from).collect();
    let mode = match a.mode {
        ModeArg::Strict => MatchMode::Strict,
        ModeArg::Boundaries => MatchMode::Boundaries,
    };
    let basis = match a.basis {
        BasisArg::Span => Basis::Span,
        BasisArg::Surface => Basis::Surface,
    };
    let report = evaluate::score_re(&preds, &golds, mode, basis, &ScoreOptions::default());
    if a.json {
        print_json(&report)
    } else {
        print!("{}", evaluate::render_report(&report, a.per_language, a.per_relation));
        Ok(())
    }
}

fn serve(a: ServeArgs) -> Result<()> {
    let hits = annotation::read_hits(&a.hits)?;
    let annotators = read_annotators(&a.annotators)?;
    let log = JudgmentLog::open(&a.log)?;
    let descriptions = match &a.descriptions {
        Some(p) => RelationDescriptions::from_path(p)?,
        None => RelationDescriptions::builtin(),
    };
    if a.lease_minutes == 0 {
        bail!("--lease-minutes must be positive");
    }
    let cfg = ServiceConfig::new(a.required, a.quorum, Duration::from_secs(a.lease_minutes * 60))?;
    let svc = Arc::new(AnnotationService::new(
        hits,
        annotators,
        log,
        descriptions,
        cfg,
        Arc::new(SystemClock),
    )?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .with_context(|| format!("binding {}", a.addr))?;
        eprintln!("listening on {}", listener.local_addr()?);
        service::serve(listener, svc).await?;
        Ok(())
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::new(&cli.log))
        .with_writer(std::io::stderr)
        .init();
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.cmd {
        Command::Ingest(a) => ingest(a),
        Command::Extract(a) => extract(a),
        Command::FilterNli(a) => filter(a, false),
        Command::FilterCritic(a) => filter(a, true),
        Command::TypeEntities(a) => type_entities(a),
        Command::TypingSubset(a) => typing_subset(a),
        Command::AnnotateExport(a) => annotate_export(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Split(a) => split(a),
        Command::Build(a) => build(a),
        Command::Linearize(a) => linearize_cmd(a),
        Command::Score(a) => score(a),
        Command::ServeAnnotation(a) => serve(a),
        Command::Run { config } => {
            let mut cfg = PipelineConfig::from_path(&config)?;
            if cli.workers.is_some() {
                cfg.workers = cli.workers;
            }
            let manifest = run_pipeline(&cfg)?;
            for e in &manifest.entries {
                println!("{}", serde_json::to_string(e)?);
            }
            Ok(())
        }
    }
}
