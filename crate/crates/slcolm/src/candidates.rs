//! Candidate relation type selection and coverage-rate measurement.
//!
//! Two selectors feed the definitions block of the prompt: the gold relation
//! types of the most similar training sample, and a trigger-word lexicon
//! matched by plain substring (the texts are unsegmented, so no tokenizer).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::SimilarityIndex;
use crate::types::{RelationSchema, Sample, OTHER_RELATION};

/// How candidate relations are chosen for a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateMode {
    Similarity,
    Trigger,
    Both,
    /// No definitions block at all.
    None,
}

/// Which selector produced a candidate relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Similarity,
    Trigger,
    Both,
}

/// Candidate relations for one sample, ordered by schema declaration order
/// so prompts stay stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub sample_id: String,
    pub relations: Vec<String>,
    pub provenance: BTreeMap<String, Provenance>,
}

impl CandidateSet {
    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

/// Gold relation types of the single most similar training sample.
pub fn candidates_by_similarity(
    sample: &Sample,
    train_index: &SimilarityIndex,
) -> BTreeSet<String> {
    match train_index.nearest(&sample.text, &sample.id) {
        Some(neighbor) => neighbor.gold_relations(),
        None => BTreeSet::new(),
    }
}

/// Every relation with a trigger word occurring as a substring of the text.
/// A trigger listed under several relation types adds all of them; the
/// fallback type is never auto-included.
pub fn candidates_by_trigger(sample: &Sample, schema: &RelationSchema) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for relation in &schema.relations {
        if relation.name == OTHER_RELATION {
            continue;
        }
        if relation
            .triggers
            .iter()
            .any(|w| !w.is_empty() && sample.text.contains(w.as_str()))
        {
            out.insert(relation.name.clone());
        }
    }
    out
}

/// Combine the selectors per `mode` and record per-relation provenance.
pub fn candidate_set(
    sample: &Sample,
    train_index: Option<&SimilarityIndex>,
    schema: &RelationSchema,
    mode: CandidateMode,
) -> CandidateSet {
    let by_sim = match mode {
        CandidateMode::Similarity | CandidateMode::Both => train_index
            .map(|idx| candidates_by_similarity(sample, idx))
            .unwrap_or_default(),
        _ => BTreeSet::new(),
    };
    let by_trig = match mode {
        CandidateMode::Trigger | CandidateMode::Both => candidates_by_trigger(sample, schema),
        _ => BTreeSet::new(),
    };

    let mut provenance = BTreeMap::new();
    for name in &by_sim {
        provenance.insert(name.clone(), Provenance::Similarity);
    }
    for name in &by_trig {
        provenance
            .entry(name.clone())
            .and_modify(|p| *p = Provenance::Both)
            .or_insert(Provenance::Trigger);
    }

    let mut relations: Vec<String> = provenance.keys().cloned().collect();
    relations.sort_by_key(|name| schema.relation_order(name));

    CandidateSet {
        sample_id: sample.id.clone(),
        relations,
        provenance,
    }
}

/// Micro coverage over distinct `(sample, gold relation type)` pairs:
/// covered pairs / total pairs × 100. Samples with no gold triples
/// contribute nothing.
pub fn coverage_rate(
    candidates: &BTreeMap<String, CandidateSet>,
    samples: &[Sample],
) -> Result<f64> {
    let mut total = 0usize;
    let mut covered = 0usize;
    for sample in samples {
        let gold = sample.gold_relations();
        if gold.is_empty() {
            continue;
        }
        let cand = candidates
            .get(&sample.id)
            .ok_or_else(|| Error::MissingCandidates(sample.id.clone()))?;
        for relation in gold {
            total += 1;
            if cand.relations.iter().any(|r| *r == relation) {
                covered += 1;
            }
        }
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(covered as f64 / total as f64 * 100.0)
}

/// Coverage per selection mode, mirroring the mode → rate table layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rates: BTreeMap<String, f64>,
}

/// Coverage of all three selection modes over `samples`.
pub fn coverage_report(
    samples: &[Sample],
    train_index: &SimilarityIndex,
    schema: &RelationSchema,
) -> Result<CoverageReport> {
    let mut rates = BTreeMap::new();
    for (label, mode) in [
        ("similarity", CandidateMode::Similarity),
        ("trigger", CandidateMode::Trigger),
        ("both", CandidateMode::Both),
    ] {
        let sets: BTreeMap<String, CandidateSet> = samples
            .iter()
            .map(|s| {
                (
                    s.id.clone(),
                    candidate_set(s, Some(train_index), schema, mode),
                )
            })
            .collect();
        rates.insert(label.to_string(), coverage_rate(&sets, samples)?);
    }
    Ok(CoverageReport { rates })
}
