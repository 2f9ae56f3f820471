//! Triplet linearization for seq2seq training and its inverse.
//!
//! Extraction (RE) targets group triplets by subject:
//!
//! ```text
//! tp_XX<triplet> S <ts> O1 <to1> R1 <ts> O2 <to2> R2 <triplet> S2 ...
//! ```
//!
//! where `<ts>`/`<to>` are the subject and object type tokens (`<subj>` and
//! `<obj>` in untyped mode). Classification (RC) targets hold exactly one
//! triplet introduced by `<relation>`, and the RC input marks the subject
//! with `# … #` and the object with `@ … @`.
//!
//! Surfaces and relation names never contain a raw tag: any `<name>` inside
//! them gets a U+2060 WORD JOINER after the `<`, removed again on decode.
//! See `docs/linearization.md` for the full grammar.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::RelationVocab;
use crate::io;
use crate::model::{Document, EntityType, Lang, Mention, Triplet};
use crate::typing::EntityTypeMap;

pub const TARGET_PREFIX: &str = "tp_XX";
pub const TRIPLET_TOKEN: &str = "<triplet>";
pub const RELATION_TOKEN: &str = "<relation>";
pub const SUBJ_TOKEN: &str = "<subj>";
pub const OBJ_TOKEN: &str = "<obj>";

const JOINER: char = '\u{2060}';

/// Type token for each tagset label.
pub fn type_token(t: EntityType) -> &'static str {
    match t {
        EntityType::Location => "<loc>",
        EntityType::Person => "<per>",
        EntityType::Organization => "<org>",
        EntityType::Number => "<num>",
        EntityType::Time => "<time>",
        EntityType::Date => "<date>",
        EntityType::Event => "<event>",
        EntityType::CelestialBody => "<celestial>",
        EntityType::Media => "<media>",
        EntityType::Disease => "<dis>",
        EntityType::Concept => "<concept>",
        EntityType::Miscellaneous => "<misc>",
        EntityType::Unknown => "<unk>",
    }
}

pub fn type_from_token(token: &str) -> Option<EntityType> {
    EntityType::ALL.into_iter().find(|t| type_token(*t) == token)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "RC")]
    Rc,
}

/// One training line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearizedSample {
    pub input: String,
    pub target: String,
    pub mode: Mode,
    pub lang: Lang,
}

/// Language code to source-language token.
#[derive(Debug, Clone)]
pub struct LangTokens {
    tokens: HashMap<Lang, String>,
}

const DEFAULT_LANG_TOKENS: &str = include_str!("../data/lang_tokens.tsv");

impl LangTokens {
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LANG_TOKENS).expect("shipped language tokens are valid")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&s)
    }

    fn parse(src: &str) -> Result<Self> {
        let mut tokens = HashMap::new();
        for line in src.lines() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (code, tok) = line
                .split_once('\t')
                .ok_or_else(|| Error::Config(format!("bad language token line {line:?}")))?;
            tokens.insert(code.trim().parse()?, tok.trim().to_string());
        }
        Ok(LangTokens { tokens })
    }

    pub fn token(&self, lang: Lang) -> String {
        self.tokens
            .get(&lang)
            .cloned()
            .unwrap_or_else(|| format!("{}_XX", lang.as_str()))
    }
}

/// A triplet in surface form, as it appears in a target string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinearTriplet {
    pub subject: String,
    pub subject_type: Option<EntityType>,
    pub object: String,
    pub object_type: Option<EntityType>,
    pub relation: String,
}

/// Everything the encoder needs besides the document: relation names, the
/// entity-type map (`None` selects untyped mode) and language tokens.
pub struct EncodeContext<'a> {
    pub vocab: &'a RelationVocab,
    pub types: Option<&'a EntityTypeMap>,
    pub lang_tokens: &'a LangTokens,
}

impl EncodeContext<'_> {
    fn mention_type(&self, m: &Mention) -> Option<EntityType> {
        self.types.map(|t| crate::dataset::mention_type(m, t))
    }
}

fn mention<'d>(doc: &'d Document, idx: usize, t: &Triplet) -> Result<&'d Mention> {
    let m = doc.mentions.get(idx).ok_or_else(|| {
        Error::Encode(format!(
            "{}: mention {idx} not in document {}",
            t.triplet_id, doc.doc_id
        ))
    })?;
    if m.surface.trim().is_empty() || doc.char_slice(m.start, m.end) != Some(m.surface.as_str()) {
        return Err(Error::Encode(format!(
            "{}: surface {:?} not found at {}..{} in {}",
            t.triplet_id, m.surface, m.start, m.end, doc.doc_id
        )));
    }
    Ok(m)
}

/// Triplets of `doc` in target order (subject first-mention offset, then
/// object offset), converted to surface form.
pub fn linear_triplets(doc: &Document, triplets: &[Triplet], ctx: &EncodeContext<'_>) -> Result<Vec<LinearTriplet>> {
    let mut resolved = Vec::with_capacity(triplets.len());
    for t in triplets {
        if t.doc_id != doc.doc_id {
            return Err(Error::Encode(format!(
                "{} belongs to {}, not {}",
                t.triplet_id, t.doc_id, doc.doc_id
            )));
        }
        let s = mention(doc, t.subj, t)?;
        let o = mention(doc, t.obj, t)?;
        resolved.push((s, o, t));
    }
    resolved.sort_by_key(|(s, o, _)| (s.start, o.start));
    Ok(resolved
        .into_iter()
        .map(|(s, o, t)| LinearTriplet {
            subject: s.surface.clone(),
            subject_type: ctx.mention_type(s),
            object: o.surface.clone(),
            object_type: ctx.mention_type(o),
            relation: ctx.vocab.name(&t.pid).to_string(),
        })
        .collect())
}

fn subj_marker(t: Option<EntityType>) -> &'static str {
    t.map(type_token).unwrap_or(SUBJ_TOKEN)
}

fn obj_marker(t: Option<EntityType>) -> &'static str {
    t.map(type_token).unwrap_or(OBJ_TOKEN)
}

/// Renders an RE target from triplets already in target order. Consecutive
/// triplets sharing subject surface and type form one group.
pub fn render_re_target(triplets: &[LinearTriplet]) -> String {
    let mut groups: Vec<String> = Vec::new();
    let mut prev: Option<(&str, Option<EntityType>)> = None;
    for t in triplets {
        let key = (t.subject.as_str(), t.subject_type);
        let sm = subj_marker(t.subject_type);
        let body = format!(
            "{} {} {}",
            escape(&t.object),
            obj_marker(t.object_type),
            escape(&t.relation)
        );
        if prev == Some(key) {
            let g = groups.last_mut().expect("group exists");
            g.push(' ');
            g.push_str(sm);
            g.push(' ');
            g.push_str(&body);
        } else {
            groups.push(format!("{TRIPLET_TOKEN} {} {sm} {body}", escape(&t.subject)));
        }
        prev = Some(key);
    }
    format!("{TARGET_PREFIX}{}", groups.join(" "))
}

/// Renders an RC target for a single triplet.
pub fn render_rc_target(t: &LinearTriplet) -> String {
    format!(
        "{TARGET_PREFIX}{RELATION_TOKEN} {} {} {} {} {}",
        escape(&t.subject),
        subj_marker(t.subject_type),
        escape(&t.object),
        obj_marker(t.object_type),
        escape(&t.relation)
    )
}

/// Encodes a document and its triplets as an extraction sample.
pub fn encode_re(doc: &Document, triplets: &[Triplet], ctx: &EncodeContext<'_>) -> Result<LinearizedSample> {
    // Consecutive equal subjects only group when they are the same mention.
    let ordered = linear_triplets(doc, triplets, ctx)?;
    let mut subj_starts: Vec<usize> = triplets.iter().map(|t| doc.mentions[t.subj].start).collect();
    subj_starts.sort_unstable();
    let target = render_grouped(&ordered, &subj_starts);
    Ok(LinearizedSample {
        input: format!("{} {}", ctx.lang_tokens.token(doc.lang), doc.text),
        target,
        mode: Mode::Re,
        lang: doc.lang,
    })
}

fn render_grouped(ordered: &[LinearTriplet], subj_starts: &[usize]) -> String {
    // Split into runs of the same subject mention, then render each run.
    let mut out = String::from(TARGET_PREFIX);
    let mut i = 0;
    let mut first = true;
    while i < ordered.len() {
        let mut j = i + 1;
        while j < ordered.len() && subj_starts[j] == subj_starts[i] {
            j += 1;
        }
        let group = render_re_target(&ordered[i..j]);
        if !first {
            out.push(' ');
        }
        out.push_str(&group[TARGET_PREFIX.len()..]);
        first = false;
        i = j;
    }
    out
}

/// Encodes one triplet as a classification sample: the input marks the
/// subject `# … #` and the object `@ … @`.
pub fn encode_rc(doc: &Document, t: &Triplet, ctx: &EncodeContext<'_>) -> Result<LinearizedSample> {
    let s = mention(doc, t.subj, t)?;
    let o = mention(doc, t.obj, t)?;
    if s.overlaps(o.start, o.end) {
        return Err(Error::Encode(format!(
            "{}: subject and object spans overlap",
            t.triplet_id
        )));
    }
    let marked = mark_spans(&doc.text, (s.start, s.end), (o.start, o.end));
    let lt = LinearTriplet {
        subject: s.surface.clone(),
        subject_type: ctx.mention_type(s),
        object: o.surface.clone(),
        object_type: ctx.mention_type(o),
        relation: ctx.vocab.name(&t.pid).to_string(),
    };
    Ok(LinearizedSample {
        input: format!("{} {}", ctx.lang_tokens.token(doc.lang), marked),
        target: render_rc_target(&lt),
        mode: Mode::Rc,
        lang: doc.lang,
    })
}

/// Inserts `# ` / ` #` around the subject and `@ ` / ` @` around the object.
/// Spans are character offsets and must not overlap.
pub fn mark_spans(text: &str, subj: (usize, usize), obj: (usize, usize)) -> String {
    let mut inserts: Vec<(usize, &str)> = vec![(subj.0, "# "), (subj.1, " #"), (obj.0, "@ "), (obj.1, " @")];
    inserts.sort_by_key(|(pos, _)| *pos);
    let mut out = String::with_capacity(text.len() + 8);
    let mut next = inserts.into_iter().peekable();
    for (i, c) in text.chars().enumerate() {
        while let Some((_, s)) = next.next_if(|(p, _)| *p == i) {
            out.push_str(s);
        }
        out.push(c);
    }
    for (_, s) in next {
        out.push_str(s);
    }
    out
}

/// Whether `chars[i..]` starts a tag body `[a-z][a-z_]*` closed by `>` (or
/// running to the end of input when `open_ok`). Returns the body length.
fn tag_body_len(chars: &[char], i: usize, open_ok: bool) -> Option<usize> {
    let first = *chars.get(i)?;
    if !first.is_ascii_lowercase() {
        return None;
    }
    let mut j = i + 1;
    while j < chars.len() && (chars[j].is_ascii_lowercase() || chars[j] == '_') {
        j += 1;
    }
    match chars.get(j) {
        Some('>') => Some(j - i),
        None if open_ok => Some(j - i),
        _ => None,
    }
}

/// Whether the text after a `<` at `j` could be read as a tag, a closing tag
/// or a truncated tag at the end of input.
fn needs_guard(chars: &[char], j: usize) -> bool {
    match chars.get(j) {
        None => true,
        Some('/') => j + 1 == chars.len() || tag_body_len(chars, j + 1, true).is_some(),
        Some(_) => tag_body_len(chars, j, true).is_some(),
    }
}

/// Adds one joiner after any `<` that (after existing joiners) would read as
/// a tag or an unterminated tag at the end of the string.
pub fn escape(s: &str) -> String {
    if !s.contains('<') {
        return s.to_string();
    }
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len() + 3);
    for (i, &c) in chars.iter().enumerate() {
        out.push(c);
        if c == '<' {
            let mut j = i + 1;
            while chars.get(j) == Some(&JOINER) {
                j += 1;
            }
            if needs_guard(&chars, j) {
                out.push(JOINER);
            }
        }
    }
    out
}

/// Inverse of [`escape`].
pub fn unescape(s: &str) -> String {
    if !s.contains(JOINER) {
        return s.to_string();
    }
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        out.push(c);
        i += 1;
        if c == '<' && chars.get(i) == Some(&JOINER) {
            let mut j = i;
            while chars.get(j) == Some(&JOINER) {
                j += 1;
            }
            if needs_guard(&chars, j) {
                i += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "issue", content = "detail", rename_all = "snake_case")]
pub enum DecodeIssue {
    MissingPrefix,
    /// Text outside any triplet.
    StrayText(String),
    /// A tag where none was expected.
    StrayTag(String),
    UnknownTypeToken(String),
    /// A triplet missing a field, dropped.
    Incomplete(String),
    /// Trailing unterminated tag or unverified relation, dropped.
    Fragment(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoded {
    pub triplets: Vec<LinearTriplet>,
    pub issues: Vec<DecodeIssue>,
}

#[derive(Debug, Clone, Default)]
pub struct DecodeOptions {
    pub typed: bool,
    /// When set, a final triplet whose relation is not in this set is treated
    /// as a truncated fragment.
    pub relation_names: Option<HashSet<String>>,
}

/// Decodes a target string. Never fails: malformed input yields a partial
/// parse plus diagnostics.
pub fn decode(target: &str, typed: bool) -> Decoded {
    decode_with(
        target,
        &DecodeOptions {
            typed,
            relation_names: None,
        },
    )
}

enum Tok {
    Text(String),
    Tag(String),
}

const IGNORED_TAGS: [&str; 3] = ["s", "pad", "eos"];

fn tokenize(s: &str, issues: &mut Vec<DecodeIssue>) -> Vec<Tok> {
    let chars: Vec<char> = s.chars().collect();
    let mut toks = Vec::new();
    let mut text = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '<' {
            if let Some(n) = tag_body_len(&chars, i + 1, false) {
                if !text.is_empty() {
                    toks.push(Tok::Text(std::mem::take(&mut text)));
                }
                let body: String = chars[i + 1..i + 1 + n].iter().collect();
                if !IGNORED_TAGS.contains(&body.as_str()) {
                    toks.push(Tok::Tag(body));
                }
                i += n + 2;
                continue;
            }
            if needs_guard(&chars, i + 1) && !chars[i + 1..].contains(&'>') {
                // Unterminated tag running to the end of the input.
                let frag: String = chars[i..].iter().collect();
                issues.push(DecodeIssue::Fragment(frag));
                break;
            }
        }
        if c == '<' && i + 1 < chars.len() && chars[i + 1] == '/' {
            // `</s>` and friends.
            if let Some(n) = tag_body_len(&chars, i + 2, false) {
                i += n + 3;
                continue;
            }
        }
        text.push(c);
        i += 1;
    }
    if !text.is_empty() {
        toks.push(Tok::Text(text));
    }
    toks
}

#[derive(PartialEq)]
enum Field {
    Outside,
    Subject,
    Object,
    Relation,
}

struct Parser<'o> {
    opts: &'o DecodeOptions,
    out: Decoded,
    field: Field,
    subject: String,
    subject_type: Option<EntityType>,
    object: String,
    object_type: Option<EntityType>,
    relation: String,
}

impl Parser<'_> {
    fn marker_type(&mut self, body: &str) -> Option<EntityType> {
        if !self.opts.typed {
            return None;
        }
        let tok = format!("<{body}>");
        match type_from_token(&tok) {
            Some(t) => Some(t),
            None => {
                self.out.issues.push(DecodeIssue::UnknownTypeToken(tok));
                Some(EntityType::Unknown)
            }
        }
    }

    fn emit(&mut self) {
        let (s, o, r) = (self.subject.trim(), self.object.trim(), self.relation.trim());
        if s.is_empty() || o.is_empty() || r.is_empty() {
            self.out
                .issues
                .push(DecodeIssue::Incomplete(format!("{s} | {o} | {r}")));
            return;
        }
        self.out.triplets.push(LinearTriplet {
            subject: unescape(s),
            subject_type: self.subject_type,
            object: unescape(o),
            object_type: self.object_type,
            relation: unescape(r),
        });
    }

    /// Called when the current triplet is interrupted by a new group.
    fn flush_partial(&mut self) {
        match self.field {
            Field::Relation => self.emit(),
            Field::Outside => {}
            _ => {
                let partial = format!("{} {}", self.subject.trim(), self.object.trim());
                if !partial.trim().is_empty() {
                    self.out
                        .issues
                        .push(DecodeIssue::Incomplete(partial.trim().to_string()));
                }
            }
        }
    }

    fn tag(&mut self, body: &str) {
        if body == "triplet" || body == "relation" {
            self.flush_partial();
            self.subject.clear();
            self.object.clear();
            self.relation.clear();
            self.subject_type = None;
            self.object_type = None;
            self.field = Field::Subject;
            return;
        }
        match self.field {
            Field::Outside => self.out.issues.push(DecodeIssue::StrayTag(format!("<{body}>"))),
            Field::Subject => {
                self.subject_type = self.marker_type(body);
                self.object.clear();
                self.field = Field::Object;
            }
            Field::Object => {
                self.object_type = self.marker_type(body);
                self.relation.clear();
                self.field = Field::Relation;
            }
            Field::Relation => {
                self.emit();
                // Marker introducing the next object of the same subject.
                self.subject_type = self.marker_type(body);
                self.object.clear();
                self.object_type = None;
                self.field = Field::Object;
            }
        }
    }

    fn text(&mut self, t: &str) {
        match self.field {
            Field::Outside => {
                if !t.trim().is_empty() {
                    self.out.issues.push(DecodeIssue::StrayText(t.trim().to_string()));
                }
            }
            Field::Subject => self.subject.push_str(t),
            Field::Object => self.object.push_str(t),
            Field::Relation => self.relation.push_str(t),
        }
    }

    fn finish(mut self) -> Decoded {
        if self.field == Field::Relation {
            let rel = self.relation.trim();
            let verified = match &self.opts.relation_names {
                Some(names) => names.contains(&unescape(rel)),
                None => true,
            };
            if verified {
                self.emit();
            } else if !rel.is_empty() {
                self.out.issues.push(DecodeIssue::Fragment(rel.to_string()));
            } else {
                self.emit();
            }
        } else {
            self.flush_partial();
        }
        self.out
    }
}

pub fn decode_with(target: &str, opts: &DecodeOptions) -> Decoded {
    let mut issues = Vec::new();
    let trimmed = target.trim_start();
    let body = match trimmed.strip_prefix(TARGET_PREFIX) {
        Some(rest) => rest,
        None => {
            issues.push(DecodeIssue::MissingPrefix);
            trimmed
        }
    };
    let toks = tokenize(body, &mut issues);
    let mut p = Parser {
        opts,
        out: Decoded {
            triplets: Vec::new(),
            issues,
        },
        field: Field::Outside,
        subject: String::new(),
        subject_type: None,
        object: String::new(),
        object_type: None,
        relation: String::new(),
    };
    for tok in toks {
        match tok {
            Tok::Tag(b) => p.tag(&b),
            Tok::Text(t) => p.text(&t),
        }
    }
    p.finish()
}

/// A document with its triplets, the unit of the training file.
#[derive(Debug, Clone)]
pub struct TrainingRecord {
    pub doc: Document,
    pub triplets: Vec<Triplet>,
}

/// Encodes every record as RE, except a seeded `fraction` of records that are
/// turned into RC samples around one uniformly chosen triplet. Selection is a
/// per-record Bernoulli draw from a stable hash of `(seed, doc_id)`, so it is
/// independent of record order. Records without triplets always stay RE.
pub fn sample_rc_fraction(
    records: &[TrainingRecord],
    fraction: f64,
    seed: u64,
    ctx: &EncodeContext<'_>,
) -> Result<Vec<LinearizedSample>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::arg(format!("fraction {fraction} must be in [0, 1]")));
    }
    let seed = seed.to_string();
    records
        .iter()
        .map(|r| {
            let draw = crate::util::unit_interval(&[&seed, "rc", &r.doc.doc_id]);
            if draw < fraction && !r.triplets.is_empty() {
                let pick = crate::util::stable_hash(&[&seed, "rc-triplet", &r.doc.doc_id]) % r.triplets.len() as u64;
                encode_rc(&r.doc, &r.triplets[pick as usize], ctx)
            } else {
                encode_re(&r.doc, &r.triplets, ctx)
            }
        })
        .collect()
}

pub fn write_training_file(path: &Path, samples: &[LinearizedSample]) -> Result<usize> {
    io::write_jsonl(path, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MentionKind;

    fn span_of(text: &str, s: &str) -> (usize, usize) {
        let b = text.find(s).unwrap();
        let a = text[..b].chars().count();
        (a, a + s.chars().count())
    }

    fn can_verboom() -> (Document, Vec<Triplet>, RelationVocab, EntityTypeMap) {
        let text = "Can Verboom és una masia amb elements gòtics i barrocs de Premià de Dalt ( Maresme ) protegida com a bé cultural d'interès local.";
        let m = |s: &str, id: &str| {
            let (a, b) = span_of(text, s);
            Mention::entity(a, b, s, id)
        };
        let doc = Document {
            doc_id: "ca:1".into(),
            page_id: "1".into(),
            lang: Lang::Ca,
            title: "Can Verboom".into(),
            text: text.into(),
            mentions: vec![
                m("Can Verboom", "Q1"),
                m("Premià de Dalt", "Q2"),
                m("bé cultural d'interès local", "Q3"),
            ],
        };
        let ts = vec![
            Triplet::candidate("t2", &doc, 0, 2, "P1435"),
            Triplet::candidate("t1", &doc, 0, 1, "P131"),
        ];
        let vocab = RelationVocab::from_names([
            ("P131", "located in the administrative territorial entity"),
            ("P1435", "heritage designation"),
        ]);
        let types: EntityTypeMap = [
            ("Q1".to_string(), EntityType::Location),
            ("Q2".to_string(), EntityType::Location),
            ("Q3".to_string(), EntityType::Location),
        ]
        .into_iter()
        .collect();
        (doc, ts, vocab, types)
    }

    const CAN_VERBOOM_TARGET: &str = "tp_XX<triplet> Can Verboom <loc> Premià de Dalt <loc> located in the administrative territorial entity <loc> bé cultural d'interès local <loc> heritage designation";

    #[test]
    fn can_verboom_re_target() {
        let (doc, ts, vocab, types) = can_verboom();
        let lt = LangTokens::builtin();
        let ctx = EncodeContext {
            vocab: &vocab,
            types: Some(&types),
            lang_tokens: &lt,
        };
        let s = encode_re(&doc, &ts, &ctx).unwrap();
        assert_eq!(s.target, CAN_VERBOOM_TARGET);
        assert!(s.input.starts_with("ca_XX Can Verboom"));
        assert_eq!(s.mode, Mode::Re);
    }

    #[test]
    fn can_verboom_decodes() {
        let d = decode(CAN_VERBOOM_TARGET, true);
        assert!(d.issues.is_empty(), "{:?}", d.issues);
        let got: Vec<_> = d
            .triplets
            .iter()
            .map(|t| (t.subject.as_str(), t.relation.as_str(), t.object.as_str()))
            .collect();
        assert_eq!(
            got,
            vec![
                (
                    "Can Verboom",
                    "located in the administrative territorial entity",
                    "Premià de Dalt"
                ),
                ("Can Verboom", "heritage designation", "bé cultural d'interès local"),
            ]
        );
        assert!(d.triplets.iter().all(|t| t.subject_type == Some(EntityType::Location)));
    }

    #[test]
    fn empty_triplets_give_bare_prefix() {
        let (doc, _, vocab, types) = can_verboom();
        let lt = LangTokens::builtin();
        let ctx = EncodeContext {
            vocab: &vocab,
            types: Some(&types),
            lang_tokens: &lt,
        };
        assert_eq!(encode_re(&doc, &[], &ctx).unwrap().target, "tp_XX");
        assert!(decode("tp_XX", true).triplets.is_empty());
    }

    #[test]
    fn untyped_mode_uses_subj_obj_markers() {
        let (doc, ts, vocab, _) = can_verboom();
        let lt = LangTokens::builtin();
        let ctx = EncodeContext {
            vocab: &vocab,
            types: None,
            lang_tokens: &lt,
        };
        let s = encode_re(&doc, &ts, &ctx).unwrap();
        assert_eq!(
            s.target,
            "tp_XX<triplet> Can Verboom <subj> Premià de Dalt <obj> located in the administrative territorial entity <subj> bé cultural d'interès local <obj> heritage designation"
        );
        let d = decode(&s.target, false);
        assert_eq!(d.triplets.len(), 2);
        assert!(d.triplets.iter().all(|t| t.subject_type.is_none()));
    }

    #[test]
    fn two_subjects_two_groups() {
        let text = "Ana met Bob in Rome and Bob lives in Oslo";
        let doc = Document {
            doc_id: "en:2".into(),
            page_id: "2".into(),
            lang: Lang::En,
            title: "Ana".into(),
            text: text.into(),
            mentions: vec![
                Mention::entity(0, 3, "Ana", "Q1"),
                Mention::entity(8, 11, "Bob", "Q2"),
                Mention::entity(15, 19, "Rome", "Q3"),
                Mention::entity(37, 41, "Oslo", "Q4"),
            ],
        };
        let vocab = RelationVocab::from_names([("P1", "knows"), ("P2", "residence")]);
        let types: EntityTypeMap = [
            ("Q1".to_string(), EntityType::Person),
            ("Q2".to_string(), EntityType::Person),
            ("Q3".to_string(), EntityType::Location),
            ("Q4".to_string(), EntityType::Location),
        ]
        .into_iter()
        .collect();
        let ts = vec![
            Triplet::candidate("b", &doc, 1, 3, "P2"),
            Triplet::candidate("a", &doc, 0, 1, "P1"),
        ];
        let lt = LangTokens::builtin();
        let ctx = EncodeContext {
            vocab: &vocab,
            types: Some(&types),
            lang_tokens: &lt,
        };
        let s = encode_re(&doc, &ts, &ctx).unwrap();
        assert_eq!(
            s.target,
            "tp_XX<triplet> Ana <per> Bob <per> knows <triplet> Bob <per> Oslo <loc> residence"
        );
        assert_eq!(s.input, format!("en_XX {text}"));
    }

    fn mumbai() -> (Document, Triplet, RelationVocab, EntityTypeMap) {
        let text = "Mumbai Mirror is een Engelstalige tabloid, die verschijnt in de Indiase stad Mumbai. Het is hier met een oplage van zo'n 700.000 exemplaren de belangrijkste krant. Het dagblad verscheen voor het eerst op 30 mei 2005,";
        let (da, db) = span_of(text, "30 mei 2005");
        let doc = Document {
            doc_id: "nl:1".into(),
            page_id: "1".into(),
            lang: Lang::Nl,
            title: "Mumbai Mirror".into(),
            text: text.into(),
            mentions: vec![
                Mention::entity(0, 13, "Mumbai Mirror", "Q6935225"),
                Mention::value(MentionKind::Date, da, db, "30 mei 2005", "2005-05-30"),
            ],
        };
        let t = Triplet::candidate("t", &doc, 0, 1, "P571");
        let vocab = RelationVocab::from_names([("P571", "inception")]);
        let types: EntityTypeMap = [("Q6935225".to_string(), EntityType::Media)].into_iter().collect();
        (doc, t, vocab, types)
    }

    #[test]
    fn mumbai_rc_sample() {
        let (doc, t, vocab, types) = mumbai();
        let lt = LangTokens::builtin();
        let ctx = EncodeContext {
            vocab: &vocab,
            types: Some(&types),
            lang_tokens: &lt,
        };
        let s = encode_rc(&doc, &t, &ctx).unwrap();
        assert_eq!(
            s.target,
            "tp_XX<relation> Mumbai Mirror <media> 30 mei 2005 <date> inception"
        );
        assert!(s.input.starts_with("nl_XX # Mumbai Mirror # is een"));
        assert!(s.input.ends_with("voor het eerst op @ 30 mei 2005 @,"));
        assert_eq!(s.mode, Mode::Rc);
        let d = decode(&s.target, true);
        assert_eq!(d.triplets.len(), 1);
        assert_eq!(d.triplets[0].object_type, Some(EntityType::Date));
    }

    #[test]
    fn marking_is_invertible() {
        let text = "Ab cd ef";
        let marked = mark_spans(text, (0, 2), (6, 8));
        assert_eq!(marked, "# Ab # cd @ ef @");
        let stripped = marked
            .replacen("# ", "", 1)
            .replacen(" #", "", 1)
            .replacen("@ ", "", 1)
            .replacen(" @", "", 1);
        assert_eq!(stripped, text);
    }

    #[test]
    fn overlapping_rc_spans_are_rejected() {
        let (mut doc, _, vocab, types) = mumbai();
        doc.mentions[1] = Mention::entity(7, 13, "Mirror", "Q2");
        let t = Triplet::candidate("t", &doc, 0, 1, "P571");
        let lt = LangTokens::builtin();
        let ctx = EncodeContext {
            vocab: &vocab,
            types: Some(&types),
            lang_tokens: &lt,
        };
        assert!(encode_rc(&doc, &t, &ctx).is_err());
    }

    #[test]
    fn missing_surface_is_encoding_error() {
        let (mut doc, ts, vocab, types) = can_verboom();
        doc.mentions[1].surface = "Premià".into();
        let lt = LangTokens::builtin();
        let ctx = EncodeContext {
            vocab: &vocab,
            types: Some(&types),
            lang_tokens: &lt,
        };
        assert!(matches!(encode_re(&doc, &ts, &ctx), Err(Error::Encode(_))));
    }

    #[test]
    fn escaping_round_trips_and_hides_tags() {
        for s in [
            "plain",
            "a <loc> b",
            "<triplet>",
            "x <\u{2060}loc> y",
            "<\u{2060}\u{2060}obj>",
            "1 < 2",
            "ends with <ab",
            "<",
            "<A>",
            "a</b>c",
            "ends </",
            "x</s>",
        ] {
            let e = escape(s);
            assert_eq!(unescape(&e), s, "{s:?}");
            let mut issues = Vec::new();
            let toks = tokenize(&e, &mut issues);
            assert!(toks.iter().all(|t| matches!(t, Tok::Text(_))), "{s:?}");
            assert!(issues.is_empty(), "{s:?}");
        }
    }

    #[test]
    fn surfaces_with_tags_round_trip() {
        let t = LinearTriplet {
            subject: "The <loc> band".into(),
            subject_type: Some(EntityType::Organization),
            object: "<triplet>".into(),
            object_type: Some(EntityType::Media),
            relation: "notable work".into(),
        };
        let target = render_re_target(std::slice::from_ref(&t));
        assert_eq!(decode(&target, true).triplets, vec![t]);
    }

    #[test]
    fn decode_tolerates_garbage() {
        for s in [
            "",
            "garbage",
            "<triplet>",
            "tp_XX<loc>",
            "tp_XX<triplet> a <zzz> b <loc> c",
            "<<>>",
            "tp_XX<relation>",
        ] {
            let _ = decode(s, true);
            let _ = decode(s, false);
        }
        let d = decode("tp_XX<triplet> a <zzz> b <loc> c", true);
        assert_eq!(d.triplets.len(), 1);
        assert_eq!(d.triplets[0].subject_type, Some(EntityType::Unknown));
        assert!(d.issues.contains(&DecodeIssue::UnknownTypeToken("<zzz>".into())));
        let d = decode("<s>tp_XX<triplet> a <per> b <loc> c</s>", true);
        assert_eq!(d.triplets.len(), 1);
        assert!(d.issues.contains(&DecodeIssue::MissingPrefix) || d.issues.is_empty());
    }

    #[test]
    fn truncated_relation_is_a_fragment() {
        let names: HashSet<String> = [
            "located in the administrative territorial entity",
            "heritage designation",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let opts = DecodeOptions {
            typed: true,
            relation_names: Some(names),
        };
        let cut = &CAN_VERBOOM_TARGET[..CAN_VERBOOM_TARGET.len() - 6];
        let d = decode_with(cut, &opts);
        assert_eq!(d.triplets.len(), 1);
        assert_eq!(
            d.triplets[0].relation,
            "located in the administrative territorial entity"
        );
        assert!(matches!(d.issues.last(), Some(DecodeIssue::Fragment(f)) if f == "heritage desig"));

        let mut prev = 0;
        for (i, _) in CAN_VERBOOM_TARGET
            .char_indices()
            .chain([(CAN_VERBOOM_TARGET.len(), ' ')])
        {
            let n = decode_with(&CAN_VERBOOM_TARGET[..i], &opts).triplets.len();
            assert!(n >= prev, "count dropped at {i}");
            prev = n;
        }
        assert_eq!(prev, 2);
    }

    #[test]
    fn rc_fraction_extremes_and_determinism() {
        let (doc, ts, vocab, types) = can_verboom();
        let lt = LangTokens::builtin();
        let ctx = EncodeContext {
            vocab: &vocab,
            types: Some(&types),
            lang_tokens: &lt,
        };
        let mut records: Vec<TrainingRecord> = (0..40)
            .map(|i| {
                let mut d = doc.clone();
                d.doc_id = format!("ca:{i}");
                let ts = ts
                    .iter()
                    .map(|t| Triplet {
                        doc_id: d.doc_id.clone(),
                        ..t.clone()
                    })
                    .collect();
                TrainingRecord { doc: d, triplets: ts }
            })
            .collect();
        records[0].triplets.clear();
        let none = sample_rc_fraction(&records, 0.0, 1, &ctx).unwrap();
        assert!(none.iter().all(|s| s.mode == Mode::Re));
        let all = sample_rc_fraction(&records, 1.0, 1, &ctx).unwrap();
        assert_eq!(all[0].mode, Mode::Re);
        assert!(all[1..].iter().all(|s| s.mode == Mode::Rc));
        let a = sample_rc_fraction(&records, 0.3, 9, &ctx).unwrap();
        assert_eq!(a, sample_rc_fraction(&records, 0.3, 9, &ctx).unwrap());
        assert!(sample_rc_fraction(&records, 1.5, 9, &ctx).is_err());
    }
}
