//! Domain types shared by every stage: languages, mentions, documents,
//! triplets and the entity tagset.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The eighteen corpus languages, keyed by ISO-639-1 code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    Ar,
    Ca,
    De,
    El,
    En,
    Es,
    Fr,
    Hi,
    It,
    Ja,
    Ko,
    Nl,
    Pl,
    Pt,
    Ru,
    Sv,
    Vi,
    Zh,
}

impl Lang {
    pub const ALL: [Lang; 18] = [
        Lang::Ar,
        Lang::Ca,
        Lang::De,
        Lang::El,
        Lang::En,
        Lang::Es,
        Lang::Fr,
        Lang::Hi,
        Lang::It,
        Lang::Ja,
        Lang::Ko,
        Lang::Nl,
        Lang::Pl,
        Lang::Pt,
        Lang::Ru,
        Lang::Sv,
        Lang::Vi,
        Lang::Zh,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Lang::Ar => "ar",
            Lang::Ca => "ca",
            Lang::De => "de",
            Lang::El => "el",
            Lang::En => "en",
            Lang::Es => "es",
            Lang::Fr => "fr",
            Lang::Hi => "hi",
            Lang::It => "it",
            Lang::Ja => "ja",
            Lang::Ko => "ko",
            Lang::Nl => "nl",
            Lang::Pl => "pl",
            Lang::Pt => "pt",
            Lang::Ru => "ru",
            Lang::Sv => "sv",
            Lang::Vi => "vi",
            Lang::Zh => "zh",
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Lang::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::arg(format!("unknown language code {s:?}")))
    }
}

/// The 13-label entity tagset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityType {
    #[serde(rename = "location")]
    Location,
    #[serde(rename = "person")]
    Person,
    #[serde(rename = "number")]
    Number,
    #[serde(rename = "time")]
    Time,
    #[serde(rename = "organization")]
    Organization,
    #[serde(rename = "date")]
    Date,
    #[serde(rename = "event")]
    Event,
    #[serde(rename = "celestial body")]
    CelestialBody,
    #[serde(rename = "media")]
    Media,
    #[serde(rename = "disease")]
    Disease,
    #[serde(rename = "concept")]
    Concept,
    #[serde(rename = "miscellaneous")]
    Miscellaneous,
    #[serde(rename = "unknown")]
    Unknown,
}

impl EntityType {
    pub const ALL: [EntityType; 13] = [
        EntityType::Location,
        EntityType::Person,
        EntityType::Number,
        EntityType::Time,
        EntityType::Organization,
        EntityType::Date,
        EntityType::Event,
        EntityType::CelestialBody,
        EntityType::Media,
        EntityType::Disease,
        EntityType::Concept,
        EntityType::Miscellaneous,
        EntityType::Unknown,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EntityType::Location => "location",
            EntityType::Person => "person",
            EntityType::Number => "number",
            EntityType::Time => "time",
            EntityType::Organization => "organization",
            EntityType::Date => "date",
            EntityType::Event => "event",
            EntityType::CelestialBody => "celestial body",
            EntityType::Media => "media",
            EntityType::Disease => "disease",
            EntityType::Concept => "concept",
            EntityType::Miscellaneous => "miscellaneous",
            EntityType::Unknown => "unknown",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntityType::ALL
            .iter()
            .copied()
            .find(|t| t.label() == s)
            .ok_or_else(|| Error::arg(format!("label {s:?} is not in the entity tagset")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionKind {
    Entity,
    Date,
    Quantity,
}

/// A linked span of a document. Offsets are Unicode scalar-value indices,
/// half-open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub kind: MentionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal: Option<String>,
}

impl Mention {
    pub fn entity(start: usize, end: usize, surface: impl Into<String>, id: impl Into<String>) -> Self {
        Mention {
            start,
            end,
            surface: surface.into(),
            kind: MentionKind::Entity,
            entity_id: Some(id.into()),
            literal: None,
        }
    }

    pub fn value(
        kind: MentionKind,
        start: usize,
        end: usize,
        surface: impl Into<String>,
        literal: impl Into<String>,
    ) -> Self {
        Mention {
            start,
            end,
            surface: surface.into(),
            kind,
            entity_id: None,
            literal: Some(literal.into()),
        }
    }

    /// Entity id or normalized literal, whichever this mention carries.
    pub fn value_key(&self) -> &str {
        self.entity_id
            .as_deref()
            .or(self.literal.as_deref())
            .unwrap_or_default()
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub page_id: String,
    pub lang: Lang,
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub mentions: Vec<Mention>,
}

impl Document {
    /// Slice `text` by character offsets.
    pub fn char_slice(&self, start: usize, end: usize) -> Option<&str> {
        char_slice(&self.text, start, end)
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Checks every mention invariant: bounds, surface/slice equality, kind
    /// payload, ordering and non-overlap.
    pub fn validate(&self) -> Result<()> {
        let len = self.char_len();
        let mut prev_end = 0usize;
        for (i, m) in self.mentions.iter().enumerate() {
            let fail = |msg: &str| Err(Error::Invariant(format!("{} mention {i}: {msg}", self.doc_id)));
            if m.surface.is_empty() || m.start >= m.end || m.end > len {
                return fail("empty or out-of-bounds span");
            }
            if self.char_slice(m.start, m.end) != Some(m.surface.as_str()) {
                return fail("surface does not equal the text slice");
            }
            let payload_ok = match m.kind {
                MentionKind::Entity => m.entity_id.is_some() && m.literal.is_none(),
                MentionKind::Date | MentionKind::Quantity => m.literal.is_some() && m.entity_id.is_none(),
            };
            if !payload_ok {
                return fail("kind does not match entity_id/literal payload");
            }
            if i > 0 && m.start < prev_end {
                return fail("mentions overlap or are unsorted");
            }
            prev_end = m.end;
        }
        Ok(())
    }
}

pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b_start = indices.nth(start)?;
    let b_end = if end == start {
        b_start
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[b_start..b_end])
}

/// Triplet lifecycle. Transitions only move forward, see [`Status::can_become`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Candidate,
    Silver,
    GoldTrue,
    GoldFalse,
    CriticRejected,
    NliRejected,
}

impl Status {
    pub fn can_become(self, to: Status) -> bool {
        use Status::*;
        matches!(
            (self, to),
            (Candidate, NliRejected)
                | (Candidate, Silver)
                | (Silver, Silver)
                | (Silver, CriticRejected)
                | (Silver, GoldTrue)
                | (Silver, GoldFalse)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub triplet_id: String,
    pub doc_id: String,
    pub lang: Lang,
    /// Index into the document's mention list.
    pub subj: usize,
    pub obj: usize,
    pub pid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entail_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic_score: Option<f64>,
    pub status: Status,
    /// Set when the relation id was not found in the vocabulary while
    /// collapsing inverses.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unknown_pid: bool,
}

impl Triplet {
    pub fn candidate(
        triplet_id: impl Into<String>,
        doc: &Document,
        subj: usize,
        obj: usize,
        pid: impl Into<String>,
    ) -> Self {
        Triplet {
            triplet_id: triplet_id.into(),
            doc_id: doc.doc_id.clone(),
            lang: doc.lang,
            subj,
            obj,
            pid: pid.into(),
            entail_score: None,
            critic_score: None,
            status: Status::Candidate,
            unknown_pid: false,
        }
    }

    pub fn transition(&mut self, to: Status) -> Result<()> {
        if !self.status.can_become(to) {
            return Err(Error::Transition {
                triplet_id: self.triplet_id.clone(),
                from: self.status,
                to,
            });
        }
        self.status = to;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_slice_handles_multibyte_text() {
        let t = "Premià de Dalt";
        assert_eq!(char_slice(t, 0, 6), Some("Premià"));
        assert_eq!(char_slice(t, 7, 14), Some("de Dalt"));
        assert_eq!(char_slice(t, 14, 14), Some(""));
        assert_eq!(char_slice(t, 10, 15), None);
    }

    #[test]
    fn status_moves_forward_only() {
        assert!(Status::Candidate.can_become(Status::Silver));
        assert!(Status::Silver.can_become(Status::GoldFalse));
        assert!(!Status::NliRejected.can_become(Status::Silver));
        assert!(!Status::GoldFalse.can_become(Status::Silver));
        assert!(!Status::CriticRejected.can_become(Status::GoldTrue));
        assert!(!Status::Candidate.can_become(Status::GoldTrue));
    }

    #[test]
    fn tagset_labels_round_trip() {
        for t in EntityType::ALL {
            assert_eq!(t.label().parse::<EntityType>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.label()));
        }
        assert!("animal".parse::<EntityType>().is_err());
    }

    #[test]
    fn validate_rejects_overlap_and_bad_surface() {
        let mut doc = Document {
            doc_id: "d".into(),
            page_id: "p".into(),
            lang: Lang::En,
            title: "t".into(),
            text: "Buenos Aires, Argentina".into(),
            mentions: vec![
                Mention::entity(0, 12, "Buenos Aires", "Q1486"),
                Mention::entity(14, 23, "Argentina", "Q414"),
            ],
        };
        doc.validate().unwrap();
        doc.mentions[1].start = 10;
        assert!(doc.validate().is_err());
        doc.mentions[1] = Mention::entity(14, 23, "argentina", "Q414");
        assert!(doc.validate().is_err());
    }
}
