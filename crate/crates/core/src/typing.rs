//! Entity typing support. The type classifier itself is external; this
//! module builds its inputs, picks the training subset from the synset graph
//! and maintains the entity-type map.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::model::EntityType;
use crate::scorer::ScorerError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Synset {
    pub synset_id: String,
    pub lemma: String,
    pub description: String,
    /// Undirected union of hypernym and hyponym edges.
    pub neighbors: Vec<String>,
    /// Member of the manually curated core set.
    pub in_core: bool,
    /// Knowledge-base entity linked one-to-one to this synset, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_id: Option<String>,
}

/// Loaded synset graph. Edges are stored symmetrically whatever direction the
/// edge file lists them in.
#[derive(Debug, Clone, Default)]
pub struct SynsetGraph {
    pub synsets: Vec<Synset>,
    index: HashMap<String, usize>,
}

impl SynsetGraph {
    pub fn new(nodes: Vec<Synset>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, s) in nodes.iter().enumerate() {
            if index.insert(s.synset_id.clone(), i).is_some() {
                return Err(Error::Invariant(format!("duplicate synset {}", s.synset_id)));
            }
        }
        let mut g = SynsetGraph { synsets: nodes, index };
        let edges: Vec<(String, String)> = g
            .synsets
            .iter()
            .flat_map(|s| s.neighbors.iter().map(move |n| (s.synset_id.clone(), n.clone())))
            .collect();
        for s in &mut g.synsets {
            s.neighbors.clear();
        }
        for (a, b) in edges {
            g.add_edge(&a, &b);
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, a: &str, b: &str) {
        if a == b {
            return;
        }
        for (x, y) in [(a, b), (b, a)] {
            if let Some(&i) = self.index.get(x) {
                let n = &mut self.synsets[i].neighbors;
                if !n.iter().any(|v| v == y) {
                    n.push(y.to_string());
                }
            }
        }
    }

    /// Loads `nodes` (`synset_id \t lemma \t description [\t entity_id]`),
    /// `edges` (`synset_id \t synset_id`) and the core-set id list (one id
    /// per line).
    pub fn load(nodes: &Path, edges: &Path, core: &Path) -> Result<Self> {
        let core_ids: HashSet<String> = io::read_lines(core)?
            .into_iter()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let mut synsets = Vec::new();
        for (i, line) in io::read_lines(nodes)?.into_iter().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 && f.len() != 4 {
                return Err(Error::format(nodes, i + 1, "expected 3 or 4 columns"));
            }
            synsets.push(Synset {
                synset_id: f[0].to_string(),
                lemma: f[1].to_string(),
                description: f[2].to_string(),
                neighbors: Vec::new(),
                in_core: core_ids.contains(f[0]),
                entity_id: f.get(3).map(|s| s.to_string()).filter(|s| !s.is_empty()),
            });
        }
        let mut g = SynsetGraph::new(synsets)?;
        for row in io::read_tsv(edges, 2)? {
            g.add_edge(&row[0], &row[1]);
        }
        Ok(g)
    }

    pub fn get(&self, id: &str) -> Option<&Synset> {
        self.index.get(id).map(|&i| &self.synsets[i])
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }
}

const CLS: &str = "[CLS]";
const SEP: &str = "[SEP]";

/// `[CLS] <lemma> [SEP] <description> [SEP]`.
pub fn build_input(s: &Synset) -> Result<String> {
    for (what, v) in [("lemma", &s.lemma), ("description", &s.description)] {
        if v.trim().is_empty() {
            return Err(Error::arg(format!("{}: empty {what}", s.synset_id)));
        }
        if v.contains(CLS) || v.contains(SEP) {
            return Err(Error::arg(format!("{}: {what} contains a marker token", s.synset_id)));
        }
    }
    Ok(format!("{CLS} {} {SEP} {} {SEP}", s.lemma, s.description))
}

/// Inverse of [`build_input`]: recovers `(lemma, description)`.
pub fn parse_input(input: &str) -> Option<(String, String)> {
    let body = input.strip_prefix("[CLS] ")?.strip_suffix(" [SEP]")?;
    let (lemma, desc) = body.split_once(" [SEP] ")?;
    if desc.contains(SEP) {
        return None;
    }
    Some((lemma.to_string(), desc.to_string()))
}

/// Synsets within graph distance 1 of the core set: core members and their
/// direct neighbours.
pub fn select_training_subset(graph: &SynsetGraph) -> Vec<Synset> {
    graph
        .synsets
        .iter()
        .filter(|s| s.in_core || s.neighbors.iter().any(|n| graph.get(n).is_some_and(|ns| ns.in_core)))
        .cloned()
        .collect()
}

/// Seeded shuffle then split; the first `round(len * ratio)` items train.
pub fn split_train_val<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::arg(format!("ratio {ratio} must be in (0, 1)")));
    }
    let mut shuffled = items.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let cut = (items.len() as f64 * ratio).round() as usize;
    let val = shuffled.split_off(cut.min(shuffled.len()));
    Ok((shuffled, val))
}

/// Entity id to label map.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityTypeMap {
    pub entries: BTreeMap<String, EntityType>,
}

impl EntityTypeMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Type of `entity_id`; entities absent from the map are `unknown`.
    pub fn type_of(&self, entity_id: &str) -> EntityType {
        self.entries.get(entity_id).copied().unwrap_or(EntityType::Unknown)
    }

    pub fn insert(&mut self, entity_id: impl Into<String>, t: EntityType) {
        self.entries.insert(entity_id.into(), t);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Loads `entity_id \t label`; labels outside the tagset are rejected.
    pub fn from_tsv(path: &Path) -> Result<Self> {
        let mut m = EntityTypeMap::new();
        for (i, row) in io::read_tsv(path, 2)?.into_iter().enumerate() {
            let t: EntityType = row[1]
                .trim()
                .parse()
                .map_err(|e: Error| Error::format(path, i + 1, e.to_string()))?;
            m.insert(row[0].trim(), t);
        }
        Ok(m)
    }

    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}\t{}\n", v.label()))
            .collect()
    }
}

impl FromIterator<(String, EntityType)> for EntityTypeMap {
    fn from_iter<I: IntoIterator<Item = (String, EntityType)>>(iter: I) -> Self {
        EntityTypeMap {
            entries: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypingReport {
    #[serde(skip)]
    pub map: EntityTypeMap,
    pub confirmations: usize,
    pub changes: usize,
    /// Entities only present in the prediction.
    pub added: usize,
}

/// The prediction wins for every key; agreement with the prior label counts
/// as a confirmation, disagreement as a change. Keys only in `predicted` are
/// added and counted separately.
pub fn confirm_or_replace(prior: &EntityTypeMap, predicted: &EntityTypeMap) -> Result<TypingReport> {
    let mut confirmations = 0;
    let mut changes = 0;
    for (k, old) in &prior.entries {
        match predicted.entries.get(k) {
            Some(new) if new == old => confirmations += 1,
            Some(_) => changes += 1,
            None => {
                return Err(Error::arg(format!("prediction missing for entity {k}")));
            }
        }
    }
    let added = predicted
        .entries
        .keys()
        .filter(|k| !prior.entries.contains_key(*k))
        .count();
    Ok(TypingReport {
        map: predicted.clone(),
        confirmations,
        changes,
        added,
    })
}

/// External type classifier: one label per `[CLS] … [SEP]` input.
pub trait TypeClassifier: Send + Sync {
    fn classify(&self, inputs: &[String]) -> Result<Vec<EntityType>, ScorerError>;
}

/// Lookup-table classifier for tests; unseen inputs get `fallback`.
#[derive(Debug, Clone, Default)]
pub struct TableClassifier {
    pub table: HashMap<String, EntityType>,
    pub fallback: Option<EntityType>,
}

impl TypeClassifier for TableClassifier {
    fn classify(&self, inputs: &[String]) -> Result<Vec<EntityType>, ScorerError> {
        Ok(inputs
            .iter()
            .map(|i| {
                self.table
                    .get(i)
                    .copied()
                    .or(self.fallback)
                    .unwrap_or(EntityType::Unknown)
            })
            .collect())
    }
}

/// Runs the classifier over every synset linked to an entity and returns the
/// predicted map.
pub fn predict_types(graph: &SynsetGraph, classifier: &dyn TypeClassifier) -> Result<EntityTypeMap> {
    let linked: Vec<&Synset> = graph.synsets.iter().filter(|s| s.entity_id.is_some()).collect();
    let inputs = linked.iter().map(|s| build_input(s)).collect::<Result<Vec<_>>>()?;
    let labels = classifier.classify(&inputs)?;
    if labels.len() != inputs.len() {
        return Err(ScorerError::Protocol(format!(
            "classifier returned {} labels for {} inputs",
            labels.len(),
            inputs.len()
        ))
        .into());
    }
    Ok(linked
        .iter()
        .zip(labels)
        .map(|(s, t)| (s.entity_id.clone().expect("filtered"), t))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syn(id: &str, core: bool, neighbors: &[&str]) -> Synset {
        Synset {
            synset_id: id.into(),
            lemma: format!("lemma {id}"),
            description: format!("gloss of {id}"),
            neighbors: neighbors.iter().map(|s| s.to_string()).collect(),
            in_core: core,
            entity_id: None,
        }
    }

    #[test]
    fn input_template() {
        let mut s = syn("bn:1", false, &[]);
        s.lemma = "Telefe".into();
        s.description = "Argentine TV channel".into();
        let input = build_input(&s).unwrap();
        assert_eq!(input, "[CLS] Telefe [SEP] Argentine TV channel [SEP]");
        assert_eq!(
            parse_input(&input),
            Some(("Telefe".to_string(), "Argentine TV channel".to_string()))
        );
        s.lemma = "Buenos  Aires".into();
        assert!(build_input(&s).unwrap().starts_with("[CLS] Buenos  Aires [SEP]"));
    }

    #[test]
    fn input_rejects_empty_fields() {
        let mut s = syn("bn:1", false, &[]);
        s.lemma = " ".into();
        assert!(build_input(&s).is_err());
        let mut s = syn("bn:1", false, &[]);
        s.description = String::new();
        assert!(build_input(&s).is_err());
    }

    #[test]
    fn subset_keeps_distance_at_most_one() {
        // core - hypo - hypo2 chain plus an isolated node.
        let g = SynsetGraph::new(vec![
            syn("core", true, &["hypo"]),
            syn("hypo", false, &["hypo2"]),
            syn("hypo2", false, &[]),
            syn("lonely", false, &[]),
        ])
        .unwrap();
        let ids: Vec<_> = select_training_subset(&g).into_iter().map(|s| s.synset_id).collect();
        assert_eq!(ids, vec!["core", "hypo"]);
        // Edges are symmetric once loaded.
        assert_eq!(g.get("hypo").unwrap().neighbors, vec!["core", "hypo2"]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let items: Vec<u32> = (0..10).collect();
        let (tr, va) = split_train_val(&items, 0.8, 7).unwrap();
        assert_eq!((tr.len(), va.len()), (8, 2));
        assert_eq!(split_train_val(&items, 0.8, 7).unwrap(), (tr.clone(), va.clone()));
        let (tr2, va2) = split_train_val(&items, 0.8, 8).unwrap();
        assert_eq!((tr2.len(), va2.len()), (8, 2));
        let mut all: Vec<u32> = tr.into_iter().chain(va).collect();
        all.sort();
        assert_eq!(all, items);
        let empty: Vec<u32> = vec![];
        assert_eq!(split_train_val(&empty, 0.8, 1).unwrap(), (vec![], vec![]));
        assert!(split_train_val(&items, 1.0, 1).is_err());
    }

    #[test]
    fn confirm_and_replace() {
        let prior: EntityTypeMap = [("Q1".to_string(), EntityType::Person)].into_iter().collect();
        let same = prior.clone();
        let r = confirm_or_replace(&prior, &same).unwrap();
        assert_eq!((r.confirmations, r.changes, r.added), (1, 0, 0));

        let pred: EntityTypeMap = [
            ("Q1".to_string(), EntityType::Media),
            ("Q2".to_string(), EntityType::Location),
        ]
        .into_iter()
        .collect();
        let r = confirm_or_replace(&prior, &pred).unwrap();
        assert_eq!((r.confirmations, r.changes, r.added), (0, 1, 1));
        assert_eq!(r.map.type_of("Q1"), EntityType::Media);
        assert_eq!(r.map.type_of("Q404"), EntityType::Unknown);
    }

    #[test]
    fn missing_prediction_is_an_error() {
        let prior: EntityTypeMap = [("Q1".to_string(), EntityType::Person)].into_iter().collect();
        assert!(confirm_or_replace(&prior, &EntityTypeMap::new()).is_err());
    }

    #[test]
    fn predict_with_table_classifier() {
        let mut s = syn("bn:1", true, &[]);
        s.entity_id = Some("Q1".into());
        let input = build_input(&s).unwrap();
        let g = SynsetGraph::new(vec![s, syn("bn:2", false, &[])]).unwrap();
        let c = TableClassifier {
            table: HashMap::from([(input, EntityType::Organization)]),
            fallback: None,
        };
        let m = predict_types(&g, &c).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.type_of("Q1"), EntityType::Organization);
    }
}
