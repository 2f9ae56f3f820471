//! Shared test helpers: a synthetic desk corpus for end-to-end pipeline runs
//! and a naive recount of every manifest stage from the files on disk.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relkit::extract::RelationVocab;
use relkit::model::{Document, EntityType, Lang, Mention, MentionKind, Triplet};
use relkit::typing::EntityTypeMap;
use relkit::util::unit_interval;

pub const DESK_LANGS: [&str; 3] = ["de", "en", "fr"];
pub const NLI_SEED: &str = "nli-desk";
pub const CRITIC_SEED: &str = "critic-desk";
pub const TOP_K: usize = 5;
pub const EXTRA_PER_LANGUAGE: usize = 12;
pub const SPLIT_SEED: u64 = 11;
pub const LINEARIZE_SEED: u64 = 5;
pub const RC_FRACTION: f64 = 0.3;
pub const ANNOTATORS: [&str; 3] = ["ann-a", "ann-b", "ann-c"];

const SYLLABLES: [&str; 12] = [
    "ka", "lo", "mi", "ru", "sen", "ta", "vor", "bel", "din", "gra", "pel", "zu",
];
const PIDS: [&str; 8] = ["P131", "P150", "P17", "P47", "P361", "P527", "P31", "P9999"];
const LINKERS: [&str; 5] = ["lies near", "is part of", "borders", "belongs to", "is linked with"];
const TYPES: [&str; 6] = ["location", "person", "organization", "event", "concept", "media"];

pub struct Desk {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub fail_doc: String,
    pub doc_count: usize,
}

fn suffix(lang: &str) -> &'static str {
    match lang {
        "de" => "heim",
        "fr" => "ville",
        _ => "",
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// Writes a 50-document, three-language corpus with title maps, facts, type
/// tables, page keys and a pipeline config into `dir`.
pub fn write_desk(dir: &Path, seed: u64) -> Desk {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir).unwrap();

    // Entities with distinct base names.
    let mut bases = BTreeSet::new();
    while bases.len() < 30 {
        let n = rng.random_range(2..=3);
        let name: String = (0..n).map(|_| *SYLLABLES.choose(&mut rng).unwrap()).collect();
        bases.insert(capitalize(&name));
    }
    let mut bases: Vec<String> = bases.into_iter().collect();
    bases.shuffle(&mut rng);
    let entities: Vec<(String, String)> = bases
        .iter()
        .enumerate()
        .map(|(i, b)| (format!("Q{}", 101 + i), b.clone()))
        .collect();
    let name = |lang: &str, i: usize| format!("{}{}", entities[i].1, suffix(lang));

    for lang in DESK_LANGS {
        let mut tsv = String::from("# title\tentity\n");
        for (i, (q, _)) in entities.iter().enumerate() {
            writeln!(tsv, "{}\t{q}", name(lang, i)).unwrap();
        }
        std::fs::write(dir.join(format!("titles_{lang}.tsv")), tsv).unwrap();
    }

    // Pages: 6 shared across all three languages, the rest single-language.
    let mut pages: Vec<(String, String, Option<String>)> = Vec::new();
    for k in 0..6 {
        for lang in DESK_LANGS {
            pages.push((lang.to_string(), format!("{lang}{}", 500 + k), Some(format!("K{k}"))));
        }
    }
    let mut n = 0;
    while pages.len() < 50 {
        let lang = DESK_LANGS[n % 3];
        pages.push((lang.to_string(), format!("{lang}{}", 900 + n), None));
        n += 1;
    }

    let mut corpus = String::new();
    let mut keys = String::from("# lang\tpage_id\tkey\n");
    for (lang, page, key) in &pages {
        if let Some(k) = key {
            writeln!(keys, "{lang}\t{page}\t{k}").unwrap();
        }
        let k = rng.random_range(3..=6);
        let picks: Vec<usize> = rand::seq::index::sample(&mut rng, entities.len(), k).into_vec();
        let mut text = String::new();
        for pair in picks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let linker = LINKERS.choose(&mut rng).unwrap();
            let a_link = if rng.random_bool(0.5) {
                format!("[[{}]]", name(lang, a))
            } else {
                format!("[[{}|{}]]", name(lang, a), name(lang, a))
            };
            write!(text, "{a_link} {linker} [[{}|{}]]. ", name(lang, b), name(lang, b)).unwrap();
        }
        if rng.random_bool(0.3) {
            text.push_str("It also mentions [[Nowhere Land|nowhere]] in passing.");
        }
        let rec = serde_json::json!({
            "title": name(lang, picks[0]),
            "page_id": page,
            "lang": lang,
            "text": text.trim_end(),
        });
        corpus.push_str(&rec.to_string());
        corpus.push('\n');
    }
    corpus.push_str("{not json\n");
    corpus.push_str(r#"{"title":"X","page_id":1,"lang":"en","text":"[[unclosed"}"#);
    corpus.push('\n');
    corpus.push_str(r#"{"title":"Y","page_id":2,"lang":"xx","text":"plain"}"#);
    corpus.push('\n');
    std::fs::write(dir.join("corpus.jsonl"), corpus).unwrap();
    std::fs::write(dir.join("page_keys.tsv"), keys).unwrap();

    // Facts, weighted towards a few relations so the top-k cut bites.
    let mut facts = BTreeSet::new();
    let weights = [6, 4, 5, 3, 2, 2, 1, 1];
    while facts.len() < 220 {
        let s = rng.random_range(0..entities.len());
        let o = rng.random_range(0..entities.len());
        if s == o {
            continue;
        }
        let p = *PIDS
            .iter()
            .zip(weights)
            .collect::<Vec<_>>()
            .choose_weighted(&mut rng, |x| x.1)
            .unwrap()
            .0;
        facts.insert((entities[s].0.clone(), p, entities[o].0.clone()));
    }
    let mut triples = String::new();
    for (s, p, o) in &facts {
        writeln!(triples, "{s}\t{p}\t{o}").unwrap();
    }
    std::fs::write(dir.join("triples.tsv"), triples).unwrap();

    // Prior types for every entity; predictions change some and add three.
    let mut prior = String::new();
    let mut predicted = String::new();
    for (q, _) in &entities {
        let t = *TYPES.choose(&mut rng).unwrap();
        writeln!(prior, "{q}\t{t}").unwrap();
        let p = if rng.random_bool(0.2) {
            *TYPES.choose(&mut rng).unwrap()
        } else {
            t
        };
        writeln!(predicted, "{q}\t{p}").unwrap();
    }
    for q in ["Q900", "Q901", "Q902"] {
        writeln!(predicted, "{q}\tconcept").unwrap();
    }
    std::fs::write(dir.join("types_prior.tsv"), prior).unwrap();
    std::fs::write(dir.join("types_predicted.tsv"), predicted).unwrap();

    let fail_doc = format!("{}:{}", pages[20].0, pages[20].1);
    let config = dir.join("desk.toml");
    std::fs::write(&config, desk_config(&fail_doc, None)).unwrap();
    Desk {
        dir: dir.to_path_buf(),
        config,
        fail_doc,
        doc_count: pages.len(),
    }
}

pub fn desk_config(fail_doc: &str, judgments: Option<&str>) -> String {
    let judgments = judgments.map(|j| format!("judgments = \"{j}\"\n")).unwrap_or_default();
    format!(
        r#"output_dir = "out"
workers = 2

[inputs]
corpus = "corpus.jsonl"
triples = "triples.tsv"
types = "types_prior.tsv"
predicted_types = "types_predicted.tsv"
page_keys = "page_keys.tsv"
{judgments}
[inputs.title_maps]
de = "titles_de.tsv"
en = "titles_en.tsv"
fr = "titles_fr.tsv"

[extract]
top_k = {TOP_K}

[nli]
threshold = 0.1
scorer = {{ kind = "mock", seed = "{NLI_SEED}", fail_docs = ["{fail_doc}"] }}

[critic]
threshold = 0.5
scorer = {{ kind = "mock", seed = "{CRITIC_SEED}" }}

[annotation]
langs = ["de", "en", "fr"]
seed = 7
extra_per_language = {EXTRA_PER_LANGUAGE}

[splits]
seed = {SPLIT_SEED}

[linearize]
seed = {LINEARIZE_SEED}
rc_fraction = {RC_FRACTION}
"#
    )
}

/// Writes three judgments per exported item: every tenth item (by triplet
/// id) gets a 1-2 false majority, the rest are unanimous true.
pub fn write_nine_to_one_judgments(hits_path: &Path, out: &Path) -> (usize, usize) {
    let mut ids: Vec<String> = std::fs::read_to_string(hits_path)
        .unwrap()
        .lines()
        .flat_map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["items"]
                .as_array()
                .unwrap()
                .iter()
                .map(|i| i["triplet_id"].as_str().unwrap().to_string())
                .collect::<Vec<_>>()
        })
        .collect();
    ids.sort();
    let mut body = String::new();
    let mut falses = 0;
    for (i, id) in ids.iter().enumerate() {
        let negative = i % 10 == 9;
        falses += usize::from(negative);
        for (k, a) in ANNOTATORS.iter().enumerate() {
            let verdict = !negative || k == 0;
            let j = serde_json::json!({
                "triplet_id": id,
                "annotator_id": a,
                "verdict": verdict,
                "submitted_at": format!("2024-03-01T10:{:02}:{:02}Z", (i / 60) % 60, i % 60),
            });
            body.push_str(&j.to_string());
            body.push('\n');
        }
    }
    std::fs::write(out, body).unwrap();
    (ids.len() - falses, falses)
}

// ---- brute-force recount ----

const LANG_CODES: [&str; 18] = [
    "ar", "ca", "de", "el", "en", "es", "fr", "hi", "it", "ja", "ko", "nl", "pl", "pt", "ru", "sv", "vi", "zh",
];

struct RDoc {
    doc_id: String,
    lang: String,
    page_id: String,
    /// (start, end, surface, entity id) in char offsets.
    mentions: Vec<(usize, usize, String, String)>,
}

fn read_pairs(path: &Path) -> Vec<(String, String)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split('\t');
            (it.next().unwrap().to_string(), it.next().unwrap().to_string())
        })
        .collect()
}

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// Recomputes every manifest count from the desk inputs with plain loops.
/// `judgments` is the judgment file when the run aggregated one.
pub fn recount(desk: &Desk, judgments: Option<&Path>) -> BTreeMap<(String, String), usize> {
    let dir = &desk.dir;
    let mut out = BTreeMap::new();
    let mut put = |stage: &str, key: &str, n: usize| {
        out.insert((stage.to_string(), key.to_string()), n);
    };

    let titles: HashMap<String, HashMap<String, String>> = DESK_LANGS
        .iter()
        .map(|l| {
            (
                l.to_string(),
                read_pairs(&dir.join(format!("titles_{l}.tsv"))).into_iter().collect(),
            )
        })
        .collect();

    // ingest
    let link_re = regex::Regex::new(r"\[\[([^\]]*)\]\]").unwrap();
    let (mut records, mut malformed, mut unknown_lang, mut links, mut unresolved) = (0, 0, 0, 0, 0);
    let mut docs: Vec<RDoc> = Vec::new();
    for line in std::fs::read_to_string(dir.join("corpus.jsonl")).unwrap().lines() {
        if line.trim().is_empty() {
            continue;
        }
        records += 1;
        let Ok(v) = serde_json::from_str::<serde_json::Value>(line) else {
            malformed += 1;
            continue;
        };
        let lang = v["lang"].as_str().unwrap().to_string();
        if !LANG_CODES.contains(&lang.as_str()) {
            unknown_lang += 1;
            continue;
        }
        let raw = v["text"].as_str().unwrap();
        if link_re.replace_all(raw, "").contains("[[") {
            malformed += 1;
            continue;
        }
        let page_id = match &v["page_id"] {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let mut plain_len = 0;
        let mut last = 0;
        let mut mentions = Vec::new();
        for cap in link_re.captures_iter(raw) {
            let m = cap.get(0).unwrap();
            plain_len += raw[last..m.start()].chars().count();
            let inner = &cap[1];
            let (target, surface) = inner.split_once('|').unwrap_or((inner, inner));
            links += 1;
            match titles[&lang].get(target) {
                Some(q) => mentions.push((
                    plain_len,
                    plain_len + surface.chars().count(),
                    surface.to_string(),
                    q.clone(),
                )),
                None => unresolved += 1,
            }
            plain_len += surface.chars().count();
            last = m.end();
        }
        docs.push(RDoc {
            doc_id: format!("{lang}:{page_id}"),
            lang,
            page_id,
            mentions,
        });
    }
    put("ingest", "records", records);
    put("ingest", "documents", docs.len());
    put("ingest", "malformed", malformed);
    put("ingest", "unknown_lang", unknown_lang);
    put("ingest", "links", links);
    put("ingest", "links_unresolved", unresolved);

    put("link_values", "entities", docs.iter().map(|d| d.mentions.len()).sum());
    put("link_values", "dates", 0);
    put("link_values", "quantities", 0);

    // align
    let facts: BTreeSet<(String, String, String)> = std::fs::read_to_string(dir.join("triples.tsv"))
        .unwrap()
        .lines()
        .map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            (c[0].to_string(), c[1].to_string(), c[2].to_string())
        })
        .collect();
    put("align", "facts", facts.len());
    // (doc index, subj mention, obj mention, pid, aligned id)
    let mut cands: Vec<(usize, usize, usize, String, String)> = Vec::new();
    for (di, d) in docs.iter().enumerate() {
        for a in 0..d.mentions.len() {
            for b in 0..d.mentions.len() {
                if a == b {
                    continue;
                }
                for (s, p, o) in &facts {
                    if *s == d.mentions[a].3 && *o == d.mentions[b].3 {
                        cands.push((di, a, b, p.clone(), format!("{}#{a}:{p}:{b}", d.doc_id)));
                    }
                }
            }
        }
    }
    put("align", "candidates", cands.len());

    // collapse
    let names: HashMap<String, String> = read_pairs(&data_file("relations.tsv")).into_iter().collect();
    let inverse_pairs = read_pairs(&data_file("inverses.tsv"));
    let mut raw: HashMap<&str, usize> = HashMap::new();
    for c in &cands {
        *raw.entry(c.3.as_str()).or_insert(0) += 1;
    }
    let mut canon: HashMap<String, (String, bool)> = HashMap::new();
    for (a, b) in &inverse_pairs {
        if a == b {
            continue;
        }
        let (ca, cb) = (
            raw.get(a.as_str()).copied().unwrap_or(0),
            raw.get(b.as_str()).copied().unwrap_or(0),
        );
        let (keep, other) = if ca > cb || (ca == cb && a <= b) {
            (a, b)
        } else {
            (b, a)
        };
        canon.insert(keep.clone(), (keep.clone(), false));
        canon.insert(other.clone(), (keep.clone(), true));
    }
    let mut seen = HashSet::new();
    let mut collapsed = Vec::new();
    for (di, a, b, p, id) in cands {
        let (a, b, p) = match canon.get(&p) {
            Some((c, true)) => (b, a, c.clone()),
            Some((c, false)) => (a, b, c.clone()),
            None => (a, b, p),
        };
        if seen.insert((di, a, b, p.clone())) {
            collapsed.push((di, a, b, p, id));
        }
    }
    put("collapse", "triplets", collapsed.len());
    put(
        "collapse",
        "unknown_pid",
        collapsed
            .iter()
            .filter(|c| !names.contains_key(&c.3) && !canon.contains_key(&c.3))
            .count(),
    );
    put(
        "collapse",
        "relations",
        collapsed.iter().map(|c| &c.3).collect::<HashSet<_>>().len(),
    );

    // top_k
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &collapsed {
        *freq.entry(c.3.as_str()).or_insert(0) += 1;
    }
    let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
    ranked.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(y.0)));
    let top: HashSet<String> = ranked.iter().take(TOP_K).map(|x| x.0.to_string()).collect();
    let kept: Vec<_> = collapsed.into_iter().filter(|c| top.contains(&c.3)).collect();
    put("top_k", "triplets", kept.len());
    put("top_k", "relations", top.len());

    // nli and critic
    let name_of = |p: &str| names.get(p).cloned().unwrap_or_else(|| p.to_string());
    let mut silver: Vec<(usize, usize, usize, String, String)> = Vec::new();
    let (mut nli_rejected, mut nli_failures) = (0, 0);
    for (di, a, b, p, id) in &kept {
        let d = &docs[*di];
        if d.doc_id == desk.fail_doc {
            nli_failures += 1;
            continue;
        }
        let hyp = format!("{} <sep> {} <sep> {}", d.mentions[*a].2, name_of(p), d.mentions[*b].2);
        if unit_interval(&[NLI_SEED, &d.doc_id, &hyp]) >= 0.1 {
            silver.push((*di, *a, *b, p.clone(), id.clone()));
        } else {
            nli_rejected += 1;
        }
    }
    put("nli", "silver", silver.len());
    put("nli", "nli_rejected", nli_rejected);
    put("nli", "failures", nli_failures);
    let before = silver.len();
    silver.retain(|(di, a, b, p, _)| {
        let d = &docs[*di];
        let hyp = format!("{} {} {}", d.mentions[*a].2, name_of(p), d.mentions[*b].2);
        unit_interval(&[CRITIC_SEED, &d.doc_id, &hyp]) >= 0.5
    });
    put("critic", "silver", silver.len());
    put("critic", "critic_rejected", before - silver.len());
    put("critic", "failures", 0);

    // typing
    let prior: HashMap<String, String> = read_pairs(&dir.join("types_prior.tsv")).into_iter().collect();
    let predicted: HashMap<String, String> = read_pairs(&dir.join("types_predicted.tsv")).into_iter().collect();
    put("typing", "prior", prior.len());
    put(
        "typing",
        "confirmations",
        prior.iter().filter(|(k, v)| predicted[*k] == **v).count(),
    );
    put(
        "typing",
        "changes",
        prior.iter().filter(|(k, v)| predicted[*k] != **v).count(),
    );
    put(
        "typing",
        "added",
        predicted.keys().filter(|k| !prior.contains_key(*k)).count(),
    );
    put("typing", "typed", predicted.len());

    // annotation_export
    let page_keys: HashMap<(String, String), String> = std::fs::read_to_string(dir.join("page_keys.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            ((c[0].to_string(), c[1].to_string()), c[2].to_string())
        })
        .collect();
    let key_of = |d: &RDoc| {
        page_keys
            .get(&(d.lang.clone(), d.page_id.clone()))
            .cloned()
            .unwrap_or(d.page_id.clone())
    };
    let mut langs_of_key: HashMap<String, BTreeSet<String>> = HashMap::new();
    for (di, ..) in &silver {
        langs_of_key
            .entry(key_of(&docs[*di]))
            .or_default()
            .insert(docs[*di].lang.clone());
    }
    let mut shared_by_lang: BTreeMap<String, usize> = BTreeMap::new();
    let mut rest_by_lang: BTreeMap<String, usize> = BTreeMap::new();
    for (di, ..) in &silver {
        let d = &docs[*di];
        if langs_of_key[&key_of(d)].len() == DESK_LANGS.len() {
            *shared_by_lang.entry(d.lang.clone()).or_insert(0) += 1;
        } else {
            *rest_by_lang.entry(d.lang.clone()).or_insert(0) += 1;
        }
    }
    let mut sampled = 0;
    let (mut hits, mut leftovers) = (0, 0);
    for lang in DESK_LANGS {
        let n = shared_by_lang.get(lang).copied().unwrap_or(0)
            + rest_by_lang.get(lang).copied().unwrap_or(0).min(EXTRA_PER_LANGUAGE);
        sampled += n;
        hits += n / 10;
        leftovers += n % 10;
    }
    put("annotation_export", "sampled", sampled);
    put("annotation_export", "hits", hits);
    put("annotation_export", "items", hits * 10);
    put("annotation_export", "leftovers", leftovers);

    // aggregate: the judged triplets come from the judgment file itself.
    let mut verdicts: HashMap<String, bool> = HashMap::new();
    if let Some(jpath) = judgments {
        let mut votes: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        let mut n = 0;
        for l in std::fs::read_to_string(jpath).unwrap().lines() {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            n += 1;
            let e = votes.entry(v["triplet_id"].as_str().unwrap().to_string()).or_default();
            if v["verdict"].as_bool().unwrap() {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
        let gt = votes.values().filter(|(t, _)| *t >= 2).count();
        let gf = votes.len() - gt;
        put("aggregate", "judgments", n);
        put("aggregate", "gold_true", gt);
        put("aggregate", "gold_false", gf);
        put("aggregate", "pending", hits * 10 - votes.len());
        put("aggregate", "unknown", 0);
        verdicts = votes.into_iter().map(|(k, (t, _))| (k, t >= 2)).collect();
    }

    // splits
    let ratios = [0.8, 0.1, 0.1];
    let mut split_counts = [0usize; 3];
    let mut split_of: HashMap<usize, usize> = HashMap::new();
    for (di, d) in docs.iter().enumerate() {
        let u = unit_interval(&[&SPLIT_SEED.to_string(), "split", &key_of(d)]);
        let s = if u < ratios[0] {
            0
        } else if u < ratios[0] + ratios[1] {
            1
        } else {
            2
        };
        split_counts[s] += 1;
        split_of.insert(di, s);
    }
    put("splits", "pages", docs.len());
    put("splits", "train", split_counts[0]);
    put("splits", "validation", split_counts[1]);
    put("splits", "test", split_counts[2]);

    // linearize: silver triplets minus those judged false.
    let mut docs_with_triplets: BTreeMap<usize, usize> = BTreeMap::new();
    for (di, .., id) in &silver {
        if verdicts.get(id) == Some(&false) {
            continue;
        }
        *docs_with_triplets.entry(*di).or_insert(0) += 1;
    }
    let rc = docs_with_triplets
        .keys()
        .filter(|di| unit_interval(&[&LINEARIZE_SEED.to_string(), "rc", &docs[**di].doc_id]) < RC_FRACTION)
        .count();
    put("linearize", "re", docs.len() - rc);
    put("linearize", "rc", rc);

    if judgments.is_some() {
        let mut gold_docs: BTreeSet<usize> = BTreeSet::new();
        let mut gold_parts: BTreeSet<(usize, String)> = BTreeSet::new();
        let mut gold_triplets = 0;
        for (di, .., id) in &silver {
            if verdicts.get(id) == Some(&true) {
                gold_triplets += 1;
                gold_docs.insert(*di);
                gold_parts.insert((split_of[di], docs[*di].lang.clone()));
            }
        }
        put("build_gold", "records", gold_docs.len());
        put("build_gold", "triplets", gold_triplets);
        put("build_gold", "files", gold_parts.len() + 1);
        put(
            "distribution",
            "languages",
            gold_docs.iter().map(|d| &docs[*d].lang).collect::<BTreeSet<_>>().len(),
        );
    }
    out
}

// ---- random linearization documents ----

const WORD_CHARS: &[char] = &[
    'a', 'b', 'k', 'o', 'r', 'Z', 'Q', 'é', 'ß', 'ø', 'ж', '中', '7', '<', '>', '/', '_', '#', '@', '.', ',', '\'', '-',
];
const TRICKY_WORDS: [&str; 8] = [
    "<per>",
    "<triplet>",
    "</s>",
    "tp_XX",
    "<",
    "<loc",
    "a</b>",
    "<relation>",
];

fn random_word(rng: &mut ChaCha8Rng) -> String {
    if rng.random_bool(0.1) {
        return TRICKY_WORDS.choose(rng).unwrap().to_string();
    }
    let n = rng.random_range(1..=6);
    (0..n).map(|_| *WORD_CHARS.choose(rng).unwrap()).collect()
}

/// A document with 2..=9 mentions, up to five subjects and up to four
/// triplets per subject, entity types drawn from the whole tagset.
pub fn random_linear_doc(rng: &mut ChaCha8Rng, vocab: &RelationVocab) -> (Document, Vec<Triplet>, EntityTypeMap) {
    let n_mentions = rng.random_range(2..=9);
    let mut text = String::new();
    let mut mentions = Vec::new();
    let mut types = EntityTypeMap::new();
    for i in 0..n_mentions {
        if i > 0 || rng.random_bool(0.5) {
            text.push_str(if rng.random_bool(0.5) { " and then " } else { ", " });
        }
        let words: Vec<String> = (0..rng.random_range(1..=3)).map(|_| random_word(rng)).collect();
        let surface = words.join(" ");
        let start = text.chars().count();
        text.push_str(&surface);
        let end = text.chars().count();
        let m = match rng.random_range(0..10) {
            0 => Mention::value(MentionKind::Date, start, end, surface, "2001-01-01"),
            1 => Mention::value(MentionKind::Quantity, start, end, surface, "7"),
            _ => {
                let id = format!("E{i}");
                types.insert(id.clone(), *EntityType::ALL.choose(rng).unwrap());
                Mention::entity(start, end, surface, id)
            }
        };
        mentions.push(m);
    }
    text.push('.');
    let doc = Document {
        doc_id: format!("doc-{}", rng.random::<u32>()),
        page_id: "1".into(),
        lang: *Lang::ALL.choose(rng).unwrap(),
        title: "t".into(),
        text,
        mentions,
    };
    let entity_idx: Vec<usize> = (0..n_mentions)
        .filter(|i| doc.mentions[*i].kind == MentionKind::Entity)
        .collect();
    let n_subj = rng.random_range(0..=5.min(entity_idx.len()));
    let subjects: Vec<usize> = entity_idx.choose_multiple(rng, n_subj).copied().collect();
    let mut triplets = Vec::new();
    for s in subjects {
        let objects: Vec<usize> = (0..n_mentions).filter(|o| *o != s).collect();
        let k = rng.random_range(1..=4.min(objects.len()));
        for o in objects.choose_multiple(rng, k) {
            let pid = &vocab.entries.choose(rng).unwrap().pid;
            triplets.push(Triplet::candidate(
                format!("t{}", triplets.len()),
                &doc,
                s,
                *o,
                pid.clone(),
            ));
        }
    }
    (doc, triplets, types)
}

/// Applies `n` random byte edits (flip, insert, delete) and decodes lossily.
pub fn mutate(rng: &mut ChaCha8Rng, s: &str, n: usize) -> String {
    let mut b = s.as_bytes().to_vec();
    for _ in 0..n {
        let pos = rng.random_range(0..=b.len());
        match rng.random_range(0..3) {
            0 if pos < b.len() => b[pos] = rng.random(),
            1 => b.insert(pos, *b"<>/ tp_XX".choose(rng).unwrap()),
            _ if pos < b.len() => {
                b.remove(pos);
            }
            _ => b.push(rng.random()),
        }
    }
    String::from_utf8_lossy(&b).into_owned()
}
