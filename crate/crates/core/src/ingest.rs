//! Corpus ingestion: abstract records with inline `[[Target|surface]]` links
//! become [`Document`]s with entity mentions; [`ValueLinker`] then adds date
//! and quantity mentions from per-language pattern tables.

use std::collections::{BTreeMap, HashMap};
use std::ops::AddAssign;
use std::path::Path;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::model::{Document, Lang, Mention, MentionKind};

/// Title to entity id lookup for one language.
#[derive(Debug, Clone, Default)]
pub struct TitleMap {
    pub lang: Option<Lang>,
    entries: HashMap<String, String>,
}

impl TitleMap {
    pub fn new(lang: Lang) -> Self {
        TitleMap {
            lang: Some(lang),
            entries: HashMap::new(),
        }
    }

    /// Adds an entry; a title may only ever map to one entity id.
    pub fn insert(&mut self, title: &str, entity_id: &str) -> Result<()> {
        let key = normalize_title(title);
        match self.entries.get(&key) {
            Some(existing) if existing != entity_id => Err(Error::Invariant(format!(
                "title {title:?} maps to both {existing} and {entity_id}"
            ))),
            _ => {
                self.entries.insert(key, entity_id.to_string());
                Ok(())
            }
        }
    }

    /// Loads a two-column `title \t entity_id` file.
    pub fn from_tsv(path: &Path, lang: Lang) -> Result<Self> {
        let mut map = TitleMap::new(lang);
        for row in io::read_tsv(path, 2)? {
            map.insert(&row[0], row[1].trim())?;
        }
        Ok(map)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resolves a link target. Section anchors are ignored and the first
    /// letter is case-insensitive, as with wiki titles.
    pub fn resolve(&self, target: &str) -> Option<&str> {
        let key = normalize_title(target);
        if let Some(id) = self.entries.get(&key) {
            return Some(id);
        }
        let mut chars = key.chars();
        let first = chars.next()?;
        let upper: String = first.to_uppercase().chain(chars).collect();
        self.entries.get(&upper).map(String::as_str)
    }
}

fn normalize_title(t: &str) -> String {
    let t = t.split('#').next().unwrap_or_default().replace('_', " ");
    crate::util::normalize_surface(&t)
}

pub type TitleMaps = HashMap<Lang, TitleMap>;

/// One input line of the abstract corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub title: String,
    #[serde(deserialize_with = "string_or_number")]
    pub page_id: String,
    pub lang: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
}

fn string_or_number<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(serde::de::Error::custom(format!(
            "expected string or number, found {other}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Malformed,
    UnknownLanguage,
}

/// Why a corpus line was skipped. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records: usize,
    pub documents: usize,
    pub malformed: usize,
    pub unknown_lang: usize,
    pub links: usize,
    pub links_unresolved: usize,
}

impl AddAssign for IngestStats {
    fn add_assign(&mut self, o: Self) {
        self.records += o.records;
        self.documents += o.documents;
        self.malformed += o.malformed;
        self.unknown_lang += o.unknown_lang;
        self.links += o.links;
        self.links_unresolved += o.links_unresolved;
    }
}

#[derive(Debug, Default)]
pub struct IngestOutput {
    pub documents: Vec<Document>,
    pub diagnostics: Vec<Diagnostic>,
    pub stats: IngestStats,
}

struct RawLink<'a> {
    start: usize,
    end: usize,
    surface: &'a str,
    target: &'a str,
}

/// Strips link markup, returning the plain text and the links with character
/// offsets into it.
fn strip_links(raw: &str) -> std::result::Result<(String, Vec<RawLink<'_>>), String> {
    let mut text = String::with_capacity(raw.len());
    let mut chars = 0usize;
    let mut links = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find("[[") {
        let before = &rest[..open];
        text.push_str(before);
        chars += before.chars().count();
        let after = &rest[open + 2..];
        let close = after
            .find("]]")
            .ok_or_else(|| format!("unclosed link at byte {}", raw.len() - rest.len() + open))?;
        let inner = &after[..close];
        if inner.contains("[[") {
            return Err("nested link markup".into());
        }
        let (target, surface) = inner.split_once('|').unwrap_or((inner, inner));
        let lead = surface.chars().take_while(|c| c.is_whitespace()).count();
        let trimmed = surface.trim();
        text.push_str(surface);
        if !trimmed.is_empty() {
            let start = chars + lead;
            links.push(RawLink {
                start,
                end: start + trimmed.chars().count(),
                surface: trimmed,
                target: target.trim(),
            });
        }
        chars += surface.chars().count();
        rest = &after[close + 2..];
    }
    text.push_str(rest);
    Ok((text, links))
}

enum RecordOutcome {
    Parsed(Document, IngestStats),
    Skipped(Diagnostic, IngestStats),
}

/// Parses one corpus line. `line_no` is 1-based and only used for
/// diagnostics.
fn parse_record(line_no: usize, line: &str, maps: &TitleMaps) -> RecordOutcome {
    let mut stats = IngestStats {
        records: 1,
        ..Default::default()
    };
    let skip = |kind, message: String, mut stats: IngestStats| {
        match kind {
            DiagnosticKind::Malformed => stats.malformed += 1,
            DiagnosticKind::UnknownLanguage => stats.unknown_lang += 1,
        }
        RecordOutcome::Skipped(
            Diagnostic {
                line: line_no,
                kind,
                message,
            },
            stats,
        )
    };
    let rec: CorpusRecord = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => return skip(DiagnosticKind::Malformed, e.to_string(), stats),
    };
    let lang: Lang = match rec.lang.parse() {
        Ok(l) => l,
        Err(_) => {
            return skip(
                DiagnosticKind::UnknownLanguage,
                format!("unknown language code {:?}", rec.lang),
                stats,
            )
        }
    };
    let (text, links) = match strip_links(&rec.text) {
        Ok(v) => v,
        Err(msg) => return skip(DiagnosticKind::Malformed, msg, stats),
    };
    let map = maps.get(&lang);
    let mut mentions = Vec::with_capacity(links.len());
    for link in &links {
        stats.links += 1;
        match map.and_then(|m| m.resolve(link.target)) {
            Some(id) => mentions.push(Mention::entity(link.start, link.end, link.surface, id)),
            None => stats.links_unresolved += 1,
        }
    }
    stats.documents = 1;
    let doc_id = rec.doc_id.unwrap_or_else(|| format!("{}:{}", lang, rec.page_id));
    RecordOutcome::Parsed(
        Document {
            doc_id,
            page_id: rec.page_id,
            lang,
            title: rec.title,
            text,
            mentions,
        },
        stats,
    )
}

/// Parses a line-delimited corpus. Records are independent and parsed in
/// parallel; output order follows input order. Blank lines are ignored.
pub fn parse_corpus<S: AsRef<str> + Sync>(lines: &[S], maps: &TitleMaps) -> IngestOutput {
    let outcomes: Vec<Option<RecordOutcome>> = lines
        .par_iter()
        .enumerate()
        .map(|(i, line)| {
            let line = line.as_ref();
            (!line.trim().is_empty()).then(|| parse_record(i + 1, line, maps))
        })
        .collect();
    let mut out = IngestOutput::default();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            RecordOutcome::Parsed(doc, stats) => {
                out.documents.push(doc);
                out.stats += stats;
            }
            RecordOutcome::Skipped(diag, stats) => {
                out.diagnostics.push(diag);
                out.stats += stats;
            }
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct PatternFile {
    #[serde(default)]
    global: GlobalSpec,
    languages: BTreeMap<String, LangSpec>,
}

#[derive(Debug, Default, Deserialize)]
struct GlobalSpec {
    #[serde(default)]
    extra: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct LangSpec {
    months: Vec<String>,
    orders: Vec<String>,
    day_suffix: Option<String>,
    day_month_sep: Option<String>,
    month_year_sep: Option<String>,
    decimal_sep: String,
    group_sep: String,
    #[serde(default)]
    extra: Vec<String>,
}

#[derive(Debug)]
struct LangPatterns {
    months: HashMap<String, u32>,
    dates: Vec<Regex>,
    number: Regex,
    decimal_sep: String,
    group_sep: String,
}

/// Regex-based date and quantity linker with one pattern table per language.
#[derive(Debug)]
pub struct ValueLinker {
    langs: HashMap<Lang, LangPatterns>,
}

const DEFAULT_PATTERNS: &str = include_str!("../data/value_patterns.toml");

impl ValueLinker {
    /// The pattern tables shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml_str(DEFAULT_PATTERNS).expect("shipped value patterns are valid")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn from_toml_str(src: &str) -> Result<Self> {
        let file: PatternFile = toml::from_str(src).map_err(|e| Error::Config(format!("value patterns: {e}")))?;
        let mut langs = HashMap::new();
        for (code, spec) in file.languages {
            let lang: Lang = code.parse()?;
            langs.insert(lang, compile_lang(lang, spec, &file.global.extra)?);
        }
        Ok(ValueLinker { langs })
    }

    pub fn supports(&self, lang: Lang) -> bool {
        self.langs.contains_key(&lang)
    }

    /// Adds date and quantity mentions. Matches overlapping any existing
    /// mention are discarded, so entity links always win and re-running is a
    /// no-op.
    pub fn link_values(&self, mut doc: Document) -> Document {
        let Some(p) = self.langs.get(&doc.lang) else {
            return doc;
        };
        let text = doc.text.as_str();
        if !text.bytes().any(|b| b.is_ascii_digit()) {
            return doc;
        }
        let char_at = byte_to_char_index(text);
        let mut taken: Vec<(usize, usize)> = doc.mentions.iter().map(|m| (m.start, m.end)).collect();
        let mut added = Vec::new();

        let mut dates = Vec::new();
        for re in &p.dates {
            for caps in re.captures_iter(text) {
                let whole = caps.get(0).expect("group 0");
                if let Some(literal) = date_literal(&caps, &p.months) {
                    dates.push((char_at[whole.start()], char_at[whole.end()], literal));
                }
            }
        }
        dates.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        for (start, end, literal) in dates {
            if claim(&mut taken, start, end) {
                added.push(value_mention(text, MentionKind::Date, start, end, literal));
            }
        }

        for m in p.number.find_iter(text) {
            let prev = text[..m.start()].chars().next_back();
            let next = text[m.end()..].chars().next();
            if prev.is_some_and(|c| c.is_alphanumeric() || c == '_') || next.is_some_and(|c| c.is_ascii_alphabetic()) {
                continue;
            }
            let (start, end) = (char_at[m.start()], char_at[m.end()]);
            let raw = m.as_str();
            let (kind, literal) = classify_number(raw, &p.decimal_sep, &p.group_sep);
            if claim(&mut taken, start, end) {
                added.push(value_mention(text, kind, start, end, literal));
            }
        }

        if !added.is_empty() {
            doc.mentions.extend(added);
            doc.mentions.sort_by_key(|m| m.start);
        }
        doc
    }
}

fn compile_lang(lang: Lang, spec: LangSpec, global: &[String]) -> Result<LangPatterns> {
    let bad = |e: regex::Error| Error::Config(format!("value patterns for {lang}: {e}"));
    if !spec.months.is_empty() && spec.months.len() != 12 {
        return Err(Error::Config(format!(
            "value patterns for {lang}: expected 12 months, found {}",
            spec.months.len()
        )));
    }
    let mut months = HashMap::new();
    let mut forms = Vec::new();
    for (i, entry) in spec.months.iter().enumerate() {
        for form in entry.split('|') {
            let form = form.trim().to_lowercase();
            months.insert(form.clone(), i as u32 + 1);
            forms.push(form);
        }
    }
    // Longest alternatives first so "sept" wins over "sep".
    forms.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
    let month_alt = forms.iter().map(|f| regex::escape(f)).collect::<Vec<_>>().join("|");

    let suffix = spec
        .day_suffix
        .as_deref()
        .map(|s| format!("(?:{s})?"))
        .unwrap_or_default();
    let dm_sep = spec.day_month_sep.as_deref().unwrap_or(r"\s+");
    let my_sep = spec.month_year_sep.as_deref().unwrap_or(r"\s+");

    let mut dates = Vec::new();
    if !forms.is_empty() {
        for order in &spec.orders {
            let pat = match order.as_str() {
                "dmy" => format!(
                    r"(?i)\b(?P<day>[0-9]{{1,2}}){suffix}{dm_sep}(?P<month>{month_alt})\.?{my_sep}(?P<year>[0-9]{{3,4}})\b"
                ),
                "mdy" => format!(
                    r"(?i)\b(?P<month>{month_alt})\.?\s+(?P<day>[0-9]{{1,2}}){suffix},?\s+(?P<year>[0-9]{{3,4}})\b"
                ),
                other => {
                    return Err(Error::Config(format!(
                        "value patterns for {lang}: unknown order {other:?}"
                    )))
                }
            };
            dates.push(Regex::new(&pat).map_err(bad)?);
        }
    }
    for extra in global.iter().chain(&spec.extra) {
        let re = Regex::new(extra).map_err(bad)?;
        let names: Vec<&str> = re.capture_names().flatten().collect();
        if !names.contains(&"year") || !names.contains(&"month") {
            return Err(Error::Config(format!(
                "value patterns for {lang}: extra pattern {extra:?} needs `year` and `month` groups"
            )));
        }
        dates.push(re);
    }

    let g = regex::escape(&spec.group_sep);
    let d = regex::escape(&spec.decimal_sep);
    let number = Regex::new(&format!(
        r"[0-9]{{1,3}}(?:{g}[0-9]{{3}})+(?:{d}[0-9]+)?|[0-9]+(?:{d}[0-9]+)?"
    ))
    .map_err(bad)?;

    Ok(LangPatterns {
        months,
        dates,
        number,
        decimal_sep: spec.decimal_sep,
        group_sep: spec.group_sep,
    })
}

fn date_literal(caps: &regex::Captures<'_>, months: &HashMap<String, u32>) -> Option<String> {
    let year: u32 = caps.name("year")?.as_str().parse().ok()?;
    let month_raw = caps.name("month")?.as_str();
    let month = match month_raw.parse::<u32>() {
        Ok(m) => m,
        Err(_) => *months.get(&month_raw.to_lowercase())?,
    };
    if !(1..=12).contains(&month) {
        return None;
    }
    match caps.name("day") {
        Some(d) => {
            let day: u32 = d.as_str().parse().ok()?;
            (1..=31)
                .contains(&day)
                .then(|| format!("{year:04}-{month:02}-{day:02}"))
        }
        None => Some(format!("{year:04}-{month:02}")),
    }
}

/// A bare four-digit integer in 1000..=2099 is a year; anything else is a
/// quantity normalized to a plain decimal string.
fn classify_number(raw: &str, decimal_sep: &str, group_sep: &str) -> (MentionKind, String) {
    if raw.len() == 4 && raw.bytes().all(|b| b.is_ascii_digit()) {
        let y: u32 = raw.parse().unwrap_or(0);
        if (1000..=2099).contains(&y) {
            return (MentionKind::Date, raw.to_string());
        }
    }
    let plain = raw.replace(group_sep, "").replace(decimal_sep, ".");
    (MentionKind::Quantity, crate::util::normalize_literal(&plain))
}

fn claim(taken: &mut Vec<(usize, usize)>, start: usize, end: usize) -> bool {
    if start >= end || taken.iter().any(|&(s, e)| s < end && start < e) {
        return false;
    }
    taken.push((start, end));
    true
}

fn value_mention(text: &str, kind: MentionKind, start: usize, end: usize, literal: String) -> Mention {
    let surface = crate::model::char_slice(text, start, end).unwrap_or_default();
    Mention::value(kind, start, end, surface, literal)
}

/// `out[b]` is the character index of byte offset `b` (valid at char
/// boundaries and at `text.len()`).
fn byte_to_char_index(text: &str) -> Vec<usize> {
    let mut out = vec![0; text.len() + 1];
    let mut n = 0;
    for (b, _) in text.char_indices() {
        out[b] = n;
        n += 1;
    }
    out[text.len()] = n;
    out
}
