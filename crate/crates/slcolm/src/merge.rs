//! Fusing the SLM and LLM triple sets into the final per-sample prediction.
//!
//! Five modes:
//!
//! - 0: LLM triples only.
//! - 1: union of both sets (probabilities dropped).
//! - 2: LLM triples plus SLM triples with probability strictly above the
//!   threshold.
//! - 3: SLM triples outside the worst-relation set, LLM triples inside it,
//!   plus LLM triples of relation types the SLM predicted nothing for.
//! - 4: relation types as discrete units: every relation predicted by the
//!   SLM is taken wholesale from the SLM; relations only the LLM predicted
//!   come wholesale from the LLM.
//!
//! Entities are never merged: the merged output carries the SLM's entity
//! set unchanged.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::score_triples;
use crate::types::{Sample, ScoredTriple, SlmPrediction, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum MergeMode {
    LlmOnly,
    Union,
    Threshold,
    WorstSwap,
    RelationUnits,
}

impl MergeMode {
    pub const ALL: [MergeMode; 5] = [
        MergeMode::LlmOnly,
        MergeMode::Union,
        MergeMode::Threshold,
        MergeMode::WorstSwap,
        MergeMode::RelationUnits,
    ];

    pub fn index(self) -> u8 {
        match self {
            MergeMode::LlmOnly => 0,
            MergeMode::Union => 1,
            MergeMode::Threshold => 2,
            MergeMode::WorstSwap => 3,
            MergeMode::RelationUnits => 4,
        }
    }
}

impl TryFrom<u8> for MergeMode {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(MergeMode::LlmOnly),
            1 => Ok(MergeMode::Union),
            2 => Ok(MergeMode::Threshold),
            3 => Ok(MergeMode::WorstSwap),
            4 => Ok(MergeMode::RelationUnits),
            other => Err(format!("merge mode must be 0..=4, got {other}")),
        }
    }
}

impl From<MergeMode> for u8 {
    fn from(m: MergeMode) -> u8 {
        m.index()
    }
}

pub const DEFAULT_PROB_THRESHOLD: f64 = 0.6;
pub const DEFAULT_WORST_K: usize = 10;

/// Fusion policy; `worst_set` must be resolved (see [`worst_relations`])
/// before merging in mode 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergePolicy {
    pub mode: MergeMode,
    #[serde(default = "default_threshold")]
    pub prob_threshold: f64,
    #[serde(default = "default_worst_k")]
    pub worst_k: usize,
    #[serde(default)]
    pub worst_set: Vec<String>,
}

fn default_threshold() -> f64 {
    DEFAULT_PROB_THRESHOLD
}
fn default_worst_k() -> usize {
    DEFAULT_WORST_K
}

impl MergePolicy {
    pub fn new(mode: MergeMode) -> Self {
        MergePolicy {
            mode,
            prob_threshold: DEFAULT_PROB_THRESHOLD,
            worst_k: DEFAULT_WORST_K,
            worst_set: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prob_threshold) {
            return Err(Error::Config(format!(
                "prob_threshold {} out of [0, 1]",
                self.prob_threshold
            )));
        }
        if self.mode == MergeMode::WorstSwap && self.worst_set.is_empty() {
            return Err(Error::Config(
                "merge mode 3 requires a resolved worst_set".into(),
            ));
        }
        Ok(())
    }
}

/// Which side a merged triple came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripleSource {
    Slm,
    Llm,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedPrediction {
    pub triples: BTreeSet<Triple>,
    pub provenance: BTreeMap<Triple, TripleSource>,
}

fn relations_of_scored(triples: &[ScoredTriple]) -> BTreeSet<&str> {
    triples.iter().map(|t| t.triple.relation.as_str()).collect()
}

/// Apply the fusion policy to one sample's SLM triples `y_star` and LLM
/// triples `y_prime`. Pure and order-insensitive.
pub fn merge(y_star: &[ScoredTriple], y_prime: &[Triple], policy: &MergePolicy) -> MergedPrediction {
    let slm_kept: Vec<&Triple> = match policy.mode {
        MergeMode::LlmOnly => Vec::new(),
        MergeMode::Union => y_star.iter().map(|st| &st.triple).collect(),
        MergeMode::Threshold => y_star
            .iter()
            .filter(|st| st.prob.value() > policy.prob_threshold)
            .map(|st| &st.triple)
            .collect(),
        MergeMode::WorstSwap => {
            let worst: BTreeSet<&str> = policy.worst_set.iter().map(|s| s.as_str()).collect();
            y_star
                .iter()
                .filter(|st| !worst.contains(st.triple.relation.as_str()))
                .map(|st| &st.triple)
                .collect()
        }
        MergeMode::RelationUnits => y_star.iter().map(|st| &st.triple).collect(),
    };

    let llm_kept: Vec<&Triple> = match policy.mode {
        MergeMode::LlmOnly | MergeMode::Union | MergeMode::Threshold => y_prime.iter().collect(),
        MergeMode::WorstSwap => {
            let worst: BTreeSet<&str> = policy.worst_set.iter().map(|s| s.as_str()).collect();
            let slm_relations = relations_of_scored(y_star);
            y_prime
                .iter()
                .filter(|t| {
                    worst.contains(t.relation.as_str())
                        || !slm_relations.contains(t.relation.as_str())
                })
                .collect()
        }
        MergeMode::RelationUnits => {
            let slm_relations = relations_of_scored(y_star);
            y_prime
                .iter()
                .filter(|t| !slm_relations.contains(t.relation.as_str()))
                .collect()
        }
    };

    let mut triples = BTreeSet::new();
    let mut provenance = BTreeMap::new();
    for t in slm_kept {
        triples.insert(t.clone());
        provenance.insert(t.clone(), TripleSource::Slm);
    }
    for t in llm_kept {
        triples.insert(t.clone());
        provenance
            .entry(t.clone())
            .and_modify(|s| *s = TripleSource::Both)
            .or_insert(TripleSource::Llm);
    }
    MergedPrediction { triples, provenance }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstRelations {
    /// Ascending SLM F1; ties broken by fewer gold instances, then name.
    pub relations: Vec<String>,
    pub warning: Option<String>,
}

/// Rank the `k` relation types the SLM handles worst on the dev split.
/// Relations without dev gold are excluded; when fewer than `k` relation
/// types exist, all are returned with a warning.
pub fn worst_relations(
    slm_dev: &BTreeMap<String, SlmPrediction>,
    dev: &[Sample],
    k: usize,
) -> Result<WorstRelations> {
    let pred: BTreeMap<String, BTreeSet<Triple>> = dev
        .iter()
        .map(|s| {
            let triples = slm_dev
                .get(&s.id)
                .map(|p| p.plain_triples().into_iter().collect())
                .unwrap_or_default();
            (s.id.clone(), triples)
        })
        .collect();
    let report = score_triples(&pred, dev)?;

    let mut ranked: Vec<(&String, f64, usize)> = report
        .per_relation
        .iter()
        .filter(|(_, score)| score.gold_count > 0)
        .map(|(name, score)| (name, score.prf.f1, score.gold_count))
        .collect();
    ranked.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("f1 is finite")
            .then_with(|| a.2.cmp(&b.2))
            .then_with(|| a.0.cmp(b.0))
    });

    let warning = if ranked.len() < k {
        Some(format!(
            "dev gold covers only {} relation types, fewer than the requested {k}",
            ranked.len()
        ))
    } else {
        None
    };
    Ok(WorstRelations {
        relations: ranked.into_iter().take(k).map(|(n, _, _)| n.clone()).collect(),
        warning,
    })
}
