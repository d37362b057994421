//! Triple- and entity-level scoring with per-relation breakdowns, plus the
//! improvement and long-tail reports.
//!
//! Matching is exact on the normalized `(head, relation, tail)` key within
//! the same sample, one-to-one: a gold triple is consumed by at most one
//! prediction. Micro aggregates tp/fp/fn over all samples; macro averages
//! per-relation P/R/F1 over the relation types with gold support in the
//! evaluated split. False positives of zero-support relations still count
//! against micro.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::DatasetStats;
use crate::types::{Entity, Sample, Triple};

/// Precision / recall / F1 in [0, 1]. Conventions: P is 0 when nothing was
/// predicted, R is 0 when there is no gold, F is 0 when P + R is 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

/// Percentage with two decimals, rounded half-up (`0.12345` → `12.35`).
pub fn percent(fraction: f64) -> f64 {
    (fraction * 10_000.0 + 0.5).floor() / 100.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScore {
    pub prf: Prf,
    pub gold_count: usize,
    pub pred_count: usize,
    pub counts: MatchCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro: Prf,
    pub macro_: Prf,
    pub per_relation: BTreeMap<String, RelationScore>,
    pub counts: MatchCounts,
    #[serde(default)]
    pub entity_micro: Option<Prf>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn relation_f1(&self, relation: &str) -> f64 {
        self.per_relation
            .get(relation)
            .map(|r| r.prf.f1)
            .unwrap_or(0.0)
    }

    /// Aligned plain-text rendering: micro/macro header plus one row per
    /// relation, percentages at two decimals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>8} {:>8} {:>8} {:>6} {:>6}\n",
            "relation", "P", "R", "F1", "gold", "pred"
        ));
        for (name, score) in &self.per_relation {
            out.push_str(&format!(
                "{:<24} {:>8.2} {:>8.2} {:>8.2} {:>6} {:>6}\n",
                name,
                percent(score.prf.precision),
                percent(score.prf.recall),
                percent(score.prf.f1),
                score.gold_count,
                score.pred_count,
            ));
        }
        out.push_str(&format!(
            "{:<24} {:>8.2} {:>8.2} {:>8.2}\n",
            "micro",
            percent(self.micro.precision),
            percent(self.micro.recall),
            percent(self.micro.f1)
        ));
        out.push_str(&format!(
            "{:<24} {:>8.2} {:>8.2} {:>8.2}\n",
            "macro",
            percent(self.macro_.precision),
            percent(self.macro_.recall),
            percent(self.macro_.f1)
        ));
        if let Some(prf) = &self.entity_micro {
            out.push_str(&format!(
                "{:<24} {:>8.2} {:>8.2} {:>8.2}\n",
                "entities (micro)",
                percent(prf.precision),
                percent(prf.recall),
                percent(prf.f1)
            ));
        }
        out
    }
}

fn relation_of(t: &Triple) -> &str {
    &t.relation
}

/// Score predicted triple sets against the gold annotations of `samples`.
/// Samples missing from `pred` count as empty predictions; predictions for
/// samples outside the split are an error.
pub fn score_triples(
    pred: &BTreeMap<String, BTreeSet<Triple>>,
    samples: &[Sample],
) -> Result<EvalReport> {
    let ids: BTreeSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    if let Some(orphan) = pred.keys().find(|id| !ids.contains(id.as_str())) {
        return Err(Error::MissingGold(orphan.clone()));
    }

    let empty = BTreeSet::new();
    let mut table: BTreeMap<String, RelationScore> = BTreeMap::new();
    for sample in samples {
        let predicted = pred.get(&sample.id).unwrap_or(&empty);
        for t in predicted {
            let entry = table
                .entry(relation_of(t).to_string())
                .or_insert_with(|| RelationScore {
                    prf: Prf::default(),
                    gold_count: 0,
                    pred_count: 0,
                    counts: MatchCounts::default(),
                });
            entry.pred_count += 1;
            if sample.gold_triples.contains(t) {
                entry.counts.tp += 1;
            } else {
                entry.counts.fp += 1;
            }
        }
        for t in &sample.gold_triples {
            let entry = table
                .entry(relation_of(t).to_string())
                .or_insert_with(|| RelationScore {
                    prf: Prf::default(),
                    gold_count: 0,
                    pred_count: 0,
                    counts: MatchCounts::default(),
                });
            entry.gold_count += 1;
            if !predicted.contains(t) {
                entry.counts.fn_ += 1;
            }
        }
    }

    let mut totals = MatchCounts::default();
    let mut macro_sum = Prf::default();
    let mut supported = 0usize;
    for score in table.values_mut() {
        score.prf = Prf::from_counts(score.counts.tp, score.counts.fp, score.counts.fn_);
        totals.tp += score.counts.tp;
        totals.fp += score.counts.fp;
        totals.fn_ += score.counts.fn_;
        if score.gold_count > 0 {
            supported += 1;
            macro_sum.precision += score.prf.precision;
            macro_sum.recall += score.prf.recall;
            macro_sum.f1 += score.prf.f1;
        }
    }
    let macro_ = if supported > 0 {
        Prf {
            precision: macro_sum.precision / supported as f64,
            recall: macro_sum.recall / supported as f64,
            f1: macro_sum.f1 / supported as f64,
        }
    } else {
        Prf::default()
    };

    Ok(EvalReport {
        micro: Prf::from_counts(totals.tp, totals.fp, totals.fn_),
        macro_,
        per_relation: table,
        counts: totals,
        entity_micro: None,
        warnings: Vec::new(),
    })
}

/// Micro P/R/F1 over `(etype, surface)` entity pairs, same exact-match
/// one-to-one rule as triples.
pub fn score_entities(
    pred: &BTreeMap<String, BTreeSet<Entity>>,
    samples: &[Sample],
) -> Result<Prf> {
    let ids: BTreeSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    if let Some(orphan) = pred.keys().find(|id| !ids.contains(id.as_str())) {
        return Err(Error::MissingGold(orphan.clone()));
    }
    let empty = BTreeSet::new();
    let mut counts = MatchCounts::default();
    for sample in samples {
        let predicted = pred.get(&sample.id).unwrap_or(&empty);
        counts.tp += predicted.intersection(&sample.gold_entities).count();
        counts.fp += predicted.difference(&sample.gold_entities).count();
        counts.fn_ += sample.gold_entities.difference(predicted).count();
    }
    Ok(Prf::from_counts(counts.tp, counts.fp, counts.fn_))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub relation: String,
    pub f1_a: f64,
    pub f1_b: f64,
    pub delta: f64,
}

/// Per-relation F1 deltas from report `a` to report `b`, largest gain first,
/// top `m` rows. Relations absent from one report score 0 there.
pub fn improvement_report(a: &EvalReport, b: &EvalReport, top_m: usize) -> Vec<ImprovementRow> {
    let mut relations: BTreeSet<&String> = a.per_relation.keys().collect();
    relations.extend(b.per_relation.keys());
    let mut rows: Vec<ImprovementRow> = relations
        .into_iter()
        .map(|name| {
            let f1_a = a.relation_f1(name);
            let f1_b = b.relation_f1(name);
            ImprovementRow {
                relation: name.clone(),
                f1_a,
                f1_b,
                delta: f1_b - f1_a,
            }
        })
        .collect();
    rows.sort_by(|x, y| {
        y.delta
            .partial_cmp(&x.delta)
            .expect("deltas are finite")
            .then_with(|| x.relation.cmp(&y.relation))
    });
    rows.truncate(top_m);
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongTailRow {
    pub relation: String,
    pub train_count: usize,
    pub f1: f64,
    pub tail: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongTailReport {
    pub rows: Vec<LongTailRow>,
    pub warnings: Vec<String>,
}

/// Join per-relation F1 with training frequency, rarest relations first.
pub fn long_tail_report(report: &EvalReport, stats: &DatasetStats) -> LongTailReport {
    let mut warnings = Vec::new();
    let mut rows: Vec<LongTailRow> = report
        .per_relation
        .keys()
        .map(|name| {
            let train_count = stats.per_relation_train_counts.get(name).copied();
            if train_count.is_none() && !stats.per_relation_counts.contains_key(name) {
                warnings.push(format!("relation {name:?} absent from dataset stats"));
            }
            LongTailRow {
                relation: name.clone(),
                train_count: train_count.unwrap_or(0),
                f1: report.relation_f1(name),
                tail: stats.tail_relations.contains(name),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.train_count
            .cmp(&b.train_count)
            .then_with(|| a.relation.cmp(&b.relation))
    });
    LongTailReport { rows, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, gold: &[(&str, &str, &str)]) -> Sample {
        Sample {
            id: id.into(),
            text: "text".into(),
            gold_entities: BTreeSet::new(),
            gold_triples: gold
                .iter()
                .map(|(h, r, t)| Triple::new(*h, *r, *t))
                .collect(),
        }
    }

    fn pred(entries: &[(&str, &[(&str, &str, &str)])]) -> BTreeMap<String, BTreeSet<Triple>> {
        entries
            .iter()
            .map(|(id, triples)| {
                (
                    id.to_string(),
                    triples
                        .iter()
                        .map(|(h, r, t)| Triple::new(*h, *r, *t))
                        .collect(),
                )
            })
            .collect()
    }

    #[test]
    fn perfect_match_scores_one() {
        let samples = vec![sample("s1", &[("A", "Kill", "B")])];
        let report = score_triples(&pred(&[("s1", &[("A", "Kill", "B")])]), &samples).unwrap();
        assert_eq!(report.micro.precision, 1.0);
        assert_eq!(report.micro.recall, 1.0);
        assert_eq!(report.micro.f1, 1.0);
        assert_eq!(report.macro_.f1, 1.0);
    }

    #[test]
    fn hand_computed_micro_and_macro() {
        // gold: (A,Kill,B), (C,Father,D); pred: (A,Kill,B), (A,Kill,C)
        let samples = vec![sample("s1", &[("A", "Kill", "B"), ("C", "Father", "D")])];
        let report = score_triples(
            &pred(&[("s1", &[("A", "Kill", "B"), ("A", "Kill", "C")])]),
            &samples,
        )
        .unwrap();
        assert_eq!(report.micro.precision, 0.5);
        assert_eq!(report.micro.recall, 0.5);
        assert_eq!(report.micro.f1, 0.5);
        // Kill: P=1/2, R=1/1 → F=2/3; Father: 0 → macro F = mean(2/3, 0) = 1/3
        assert!((report.macro_.f1 - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.per_relation["Kill"].counts.tp, 1);
        assert_eq!(report.per_relation["Kill"].counts.fp, 1);
        assert_eq!(report.per_relation["Father"].counts.fn_, 1);
    }

    #[test]
    fn empty_predictions_score_zero() {
        let samples = vec![sample("s1", &[("A", "Kill", "B")])];
        let report = score_triples(&BTreeMap::new(), &samples).unwrap();
        assert_eq!(report.micro.precision, 0.0);
        assert_eq!(report.micro.recall, 0.0);
        assert_eq!(report.micro.f1, 0.0);
    }

    #[test]
    fn zero_support_relations_count_in_micro_not_macro() {
        let samples = vec![sample("s1", &[("A", "Kill", "B")])];
        let report = score_triples(
            &pred(&[("s1", &[("A", "Kill", "B"), ("X", "Ghost", "Y")])]),
            &samples,
        )
        .unwrap();
        // Ghost has no gold: fp hits micro precision, macro averages Kill only
        assert_eq!(report.micro.precision, 0.5);
        assert_eq!(report.macro_.f1, 1.0);
        assert_eq!(report.per_relation["Ghost"].gold_count, 0);
    }

    #[test]
    fn prediction_for_unknown_sample_is_missing_gold() {
        let samples = vec![sample("s1", &[])];
        let err = score_triples(&pred(&[("ghost", &[])]), &samples).unwrap_err();
        assert!(matches!(err, Error::MissingGold(id) if id == "ghost"));
    }

    #[test]
    fn micro_is_order_insensitive() {
        let mut samples = vec![
            sample("s1", &[("A", "Kill", "B")]),
            sample("s2", &[("C", "Father", "D"), ("E", "Kill", "F")]),
        ];
        let p = pred(&[
            ("s1", &[("A", "Kill", "B")]),
            ("s2", &[("C", "Father", "D")]),
        ]);
        let forward = score_triples(&p, &samples).unwrap();
        samples.reverse();
        let backward = score_triples(&p, &samples).unwrap();
        assert_eq!(forward.micro, backward.micro);
        assert_eq!(forward.macro_, backward.macro_);
    }

    #[test]
    fn entity_scoring_matches_on_type_and_surface() {
        let mut s = sample("s1", &[]);
        s.gold_entities = BTreeSet::from([Entity::new("Person", "甲")]);
        let samples = vec![s];

        let exact: BTreeMap<String, BTreeSet<Entity>> = BTreeMap::from([(
            "s1".to_string(),
            BTreeSet::from([Entity::new("Person", "甲")]),
        )]);
        assert_eq!(score_entities(&exact, &samples).unwrap().f1, 1.0);

        // same surface, wrong type: one fp and one fn
        let wrong: BTreeMap<String, BTreeSet<Entity>> = BTreeMap::from([(
            "s1".to_string(),
            BTreeSet::from([Entity::new("Office", "甲")]),
        )]);
        let prf = score_entities(&wrong, &samples).unwrap();
        assert_eq!(prf.precision, 0.0);
        assert_eq!(prf.recall, 0.0);
    }

    #[test]
    fn improvement_rows_sorted_by_delta() {
        let samples = vec![
            sample("s1", &[("A", "Kill", "B")]),
            sample("s2", &[("C", "Father", "D")]),
        ];
        let a = score_triples(&pred(&[("s1", &[("A", "Kill", "B")])]), &samples).unwrap();
        let b = score_triples(
            &pred(&[
                ("s1", &[("A", "Kill", "B")]),
                ("s2", &[("C", "Father", "D")]),
            ]),
            &samples,
        )
        .unwrap();

        let rows = improvement_report(&a, &b, 10);
        assert_eq!(rows[0].relation, "Father");
        assert_eq!(rows[0].delta, 1.0);
        assert_eq!(rows[1].delta, 0.0);

        let same = improvement_report(&a, &a, 10);
        assert!(same.iter().all(|r| r.delta == 0.0));
    }

    #[test]
    fn long_tail_rows_sorted_by_train_count() {
        let samples = vec![sample("s1", &[("A", "Kill", "B"), ("C", "Rare", "D")])];
        let report = score_triples(&pred(&[("s1", &[("A", "Kill", "B")])]), &samples).unwrap();
        let stats = DatasetStats {
            n_samples: 1,
            n_chars: 4,
            n_triples: 2,
            per_relation_counts: BTreeMap::from([("Kill".into(), 150), ("Rare".into(), 3)]),
            per_relation_train_counts: BTreeMap::from([("Kill".into(), 150), ("Rare".into(), 3)]),
            tail_relations: BTreeSet::from(["Rare".to_string()]),
            tail_threshold: 100,
        };
        let tail = long_tail_report(&report, &stats);
        assert_eq!(tail.rows[0].relation, "Rare");
        assert!(tail.rows[0].tail);
        assert_eq!(tail.rows[0].f1, 0.0);
        assert!(!tail.rows[1].tail);
        assert!(tail.warnings.is_empty());
    }

    #[test]
    fn percent_rounds_half_up() {
        assert_eq!(percent(0.123456), 12.35);
        assert_eq!(percent(0.12344), 12.34);
        assert_eq!(percent(0.5), 50.0);
        assert_eq!(percent(0.66665), 66.67);
        assert_eq!(percent(1.0), 100.0);
    }

    #[test]
    fn report_reparses_with_identical_counts() {
        let samples = vec![sample("s1", &[("A", "Kill", "B"), ("C", "Father", "D")])];
        let report = score_triples(
            &pred(&[("s1", &[("A", "Kill", "B"), ("X", "Kill", "Y")])]),
            &samples,
        )
        .unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let reparsed: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, reparsed);
        // micro P is reconstructable from the stored per-relation counts
        let tp: usize = reparsed.per_relation.values().map(|r| r.counts.tp).sum();
        let fp: usize = reparsed.per_relation.values().map(|r| r.counts.fp).sum();
        assert_eq!(
            reparsed.micro.precision,
            tp as f64 / (tp + fp) as f64
        );
    }
}
