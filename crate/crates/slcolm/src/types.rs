//! Domain types: samples, triples, predictions, and the relation schema.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. Entities and triples compare by exact string match after trimming
//! surrounding whitespace; no fuzzy or span-based matching.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A probability in [0, 1], quantized to at most six fractional decimal
/// digits so that the decimal-string serialization round-trips bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Prob(f64);

impl Prob {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::BadProbability { value });
        }
        Ok(Prob((value * 1e6).round() / 1e6))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Decimal rendering with trailing zeros trimmed, e.g. `0.9998`, `1`.
    pub fn to_decimal_string(self) -> String {
        let mut s = format!("{:.6}", self.0);
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
        s
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl Serialize for Prob {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_decimal_string())
    }
}

impl<'de> Deserialize<'de> for Prob {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        // Accept both "0.9998" and 0.9998; our own files always write strings.
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let v = match Raw::deserialize(deserializer)? {
            Raw::Num(n) => n,
            Raw::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|e| D::Error::custom(format!("bad probability {s:?}: {e}")))?,
        };
        Prob::new(v).map_err(D::Error::custom)
    }
}

/// A typed entity mention, compared by `(etype, surface)` after trimming.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub etype: String,
    pub surface: String,
}

impl Entity {
    pub fn new(etype: impl Into<String>, surface: impl Into<String>) -> Self {
        Entity {
            etype: etype.into().trim().to_string(),
            surface: surface.into().trim().to_string(),
        }
    }
}

/// A directed relation triple over entity surface strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl Triple {
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
    ) -> Self {
        Triple {
            head: head.into().trim().to_string(),
            relation: relation.into().trim().to_string(),
            tail: tail.into().trim().to_string(),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

/// Canonical comparison key for a triple: fields trimmed, order-sensitive.
/// Two triples are the same prediction iff their keys are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripleKey(pub String, pub String, pub String);

pub fn triple_key(t: &Triple) -> TripleKey {
    TripleKey(
        t.head.trim().to_string(),
        t.relation.trim().to_string(),
        t.tail.trim().to_string(),
    )
}

/// An entity with the predictor's confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntity {
    pub entity: Entity,
    pub prob: Prob,
}

/// A triple with the predictor's confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTriple {
    pub triple: Triple,
    pub prob: Prob,
}

/// One annotated text. Gold annotations are sets: duplicates collapse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub gold_entities: BTreeSet<Entity>,
    pub gold_triples: BTreeSet<Triple>,
}

impl Sample {
    /// Distinct relation types appearing in the gold triples.
    pub fn gold_relations(&self) -> BTreeSet<String> {
        self.gold_triples
            .iter()
            .map(|t| t.relation.clone())
            .collect()
    }
}

/// Train/dev/test splits with pairwise-disjoint sample ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub train: Vec<Sample>,
    pub dev: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Corpus {
    pub fn iter_all(&self) -> impl Iterator<Item = &Sample> {
        self.train.iter().chain(self.dev.iter()).chain(self.test.iter())
    }

    pub fn find(&self, id: &str) -> Option<&Sample> {
        self.iter_all().find(|s| s.id == id)
    }
}

/// Per-sample output of the small fine-tuned model: scored entities and
/// triples. Duplicate triples collapse to the highest probability.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlmPrediction {
    pub sample_id: String,
    pub entities: Vec<ScoredEntity>,
    pub triples: Vec<ScoredTriple>,
}

impl SlmPrediction {
    pub fn empty(sample_id: impl Into<String>) -> Self {
        SlmPrediction {
            sample_id: sample_id.into(),
            entities: Vec::new(),
            triples: Vec::new(),
        }
    }

    /// Insert a scored triple, keeping the max probability on duplicates.
    pub fn push_triple(&mut self, st: ScoredTriple) {
        let key = triple_key(&st.triple);
        if let Some(existing) = self
            .triples
            .iter_mut()
            .find(|e| triple_key(&e.triple) == key)
        {
            if st.prob.value() > existing.prob.value() {
                existing.prob = st.prob;
            }
        } else {
            self.triples.push(st);
        }
    }

    pub fn plain_triples(&self) -> Vec<Triple> {
        self.triples.iter().map(|st| st.triple.clone()).collect()
    }
}

/// Fallback relation name for anything outside the declared label set.
pub const OTHER_RELATION: &str = "Other";

/// One relation type: canonical name, prompt label, prose definition,
/// trigger lexicon, and the coarse domain it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationType {
    pub name: String,
    /// Label used in prompt text (typically the Chinese form); defaults to
    /// `name` when absent.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub definition: String,
    #[serde(default)]
    pub triggers: Vec<String>,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub domain: String,
}

impl RelationType {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }
}

/// An entity type with its prompt label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityType {
    pub name: String,
    #[serde(default)]
    pub label: Option<String>,
}

impl EntityType {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }
}

/// The declared relation and entity types, with lookup tables that resolve
/// canonical names, prompt labels, and aliases interchangeably.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationSchema {
    pub relations: Vec<RelationType>,
    pub entity_types: Vec<EntityType>,
    relation_lookup: BTreeMap<String, usize>,
    entity_lookup: BTreeMap<String, usize>,
}

impl RelationSchema {
    /// Build a schema, ensuring an `Other` fallback type exists.
    pub fn new(mut relations: Vec<RelationType>, entity_types: Vec<EntityType>) -> Result<Self> {
        for r in &relations {
            if r.name != OTHER_RELATION && r.definition.trim().is_empty() {
                return Err(Error::MissingDefinition(r.name.clone()));
            }
        }
        if !relations.iter().any(|r| r.name == OTHER_RELATION) {
            relations.push(RelationType {
                name: OTHER_RELATION.to_string(),
                label: Some("其他".to_string()),
                definition: String::new(),
                triggers: Vec::new(),
                aliases: Vec::new(),
                domain: String::new(),
            });
        }

        let mut relation_lookup = BTreeMap::new();
        for (i, r) in relations.iter().enumerate() {
            if relation_lookup.insert(r.name.clone(), i).is_some() {
                return Err(Error::DuplicateRelation(r.name.clone()));
            }
        }
        // Labels and aliases resolve too; collisions with a canonical name of
        // a different relation are rejected.
        for (i, r) in relations.iter().enumerate() {
            for key in std::iter::once(r.label().to_string()).chain(r.aliases.iter().cloned()) {
                match relation_lookup.get(&key) {
                    Some(&j) if j != i => return Err(Error::DuplicateRelation(key)),
                    _ => {
                        relation_lookup.insert(key, i);
                    }
                }
            }
        }

        let mut entity_lookup = BTreeMap::new();
        for (i, e) in entity_types.iter().enumerate() {
            entity_lookup.insert(e.name.clone(), i);
            entity_lookup.insert(e.label().to_string(), i);
        }

        Ok(RelationSchema {
            relations,
            entity_types,
            relation_lookup,
            entity_lookup,
        })
    }

    /// Resolve a relation name, prompt label, or alias to its canonical name.
    pub fn resolve_relation(&self, name: &str) -> Option<&RelationType> {
        self.relation_lookup
            .get(name.trim())
            .map(|&i| &self.relations[i])
    }

    pub fn relation(&self, canonical: &str) -> Option<&RelationType> {
        self.resolve_relation(canonical)
    }

    /// Resolve an entity type name or label to its canonical name.
    pub fn resolve_entity_type(&self, name: &str) -> Option<&EntityType> {
        self.entity_lookup
            .get(name.trim())
            .map(|&i| &self.entity_types[i])
    }

    /// Declaration position of a canonical relation name; used to keep
    /// prompt orderings stable.
    pub fn relation_order(&self, canonical: &str) -> usize {
        self.relations
            .iter()
            .position(|r| r.name == canonical)
            .unwrap_or(usize::MAX)
    }

    /// Prompt label for a canonical relation name (falls back to the name).
    pub fn label_for<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.relation(canonical).map(|r| r.label()).unwrap_or(canonical)
    }

    /// Prompt label for a canonical entity type name.
    pub fn entity_label_for<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.resolve_entity_type(canonical)
            .map(|e| e.label())
            .unwrap_or(canonical)
    }

    /// Relation names in declaration order, `Other` included.
    pub fn relation_names(&self) -> Vec<&str> {
        self.relations.iter().map(|r| r.name.as_str()).collect()
    }
}

/// Parsed answer from the large model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub sample_id: String,
    pub explanation: String,
    pub entities: Vec<Entity>,
    pub triples: Vec<Triple>,
    pub raw: String,
    /// Set when no well-formed answer block could be extracted, or labels
    /// had to be coerced to the fallback type.
    pub warnings: Vec<String>,
}
