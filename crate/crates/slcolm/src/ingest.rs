//! Loading and validating the corpus, SLM prediction files, and the relation
//! schema, plus dataset statistics.
//!
//! File formats (all UTF-8, probabilities as decimal strings):
//!
//! Corpus records, one JSON object per line in `{train,dev,test}.jsonl`.
//! Entities are grouped by type and relations by relation name, mirroring the
//! grouped structure the prompts use:
//!
//! ```text
//! {"id":"dev-0001","text":"以夏侯淵为都護將軍。",
//!  "entities":{"人物":["夏侯淵"],"職官":["都護將軍"]},
//!  "relations":{"任職":[["夏侯淵","都護將軍"]]}}
//! ```
//!
//! Prediction records, one JSON object per line in `{dev,test}.jsonl`:
//!
//! ```text
//! {"sample_id":"dev-0001",
//!  "entities":{"人物":[["夏侯淵","0.9998"]]},
//!  "relations":{"任職":[[["夏侯淵","都護將軍"],"0.9976"]]}}
//! ```
//!
//! Relation names and entity types in files may use canonical names, prompt
//! labels, or declared aliases; everything is resolved to canonical names on
//! load.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    Corpus, Entity, EntityType, Prob, RelationSchema, RelationType, Sample, ScoredEntity,
    ScoredTriple, SlmPrediction, Triple,
};

/// Counts over a loaded corpus, plus the tail-relation flags used by the
/// long-tail reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_samples: usize,
    pub n_chars: usize,
    pub n_triples: usize,
    /// Gold triple count per relation over the whole corpus.
    pub per_relation_counts: BTreeMap<String, usize>,
    /// Gold triple count per relation over the train split only.
    pub per_relation_train_counts: BTreeMap<String, usize>,
    /// Relations whose corpus-wide count falls below `tail_threshold`.
    pub tail_relations: BTreeSet<String>,
    pub tail_threshold: usize,
}

pub const DEFAULT_TAIL_THRESHOLD: usize = 100;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawProb {
    Num(f64),
    Text(String),
}

impl RawProb {
    fn to_prob(&self) -> Result<Prob> {
        let v = match self {
            RawProb::Num(n) => *n,
            RawProb::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::BadProbability { value: f64::NAN })?,
        };
        Prob::new(v)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSampleRecord {
    id: String,
    text: String,
    #[serde(default)]
    entities: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    relations: BTreeMap<String, Vec<(String, String)>>,
}

#[derive(Debug, Deserialize)]
struct RawPredictionRecord {
    sample_id: String,
    #[serde(default)]
    entities: BTreeMap<String, Vec<(String, RawProb)>>,
    #[serde(default)]
    relations: BTreeMap<String, Vec<((String, String), RawProb)>>,
}

fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedRecord {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

fn parse_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let content = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: T =
            serde_json::from_str(line).map_err(|e| malformed(path, lineno, e.to_string()))?;
        out.push((lineno, record));
    }
    Ok(out)
}

fn sample_from_raw(
    raw: RawSampleRecord,
    schema: &RelationSchema,
    path: &Path,
    line: usize,
) -> Result<Sample> {
    if raw.text.is_empty() {
        return Err(malformed(path, line, "empty text"));
    }
    let mut gold_entities = BTreeSet::new();
    for (etype, surfaces) in raw.entities {
        let canonical = schema
            .resolve_entity_type(&etype)
            .ok_or_else(|| Error::UnknownEntityType(etype.clone()))?
            .name
            .clone();
        for surface in surfaces {
            if surface.trim().is_empty() {
                return Err(malformed(path, line, "empty entity surface"));
            }
            gold_entities.insert(Entity::new(canonical.clone(), surface));
        }
    }
    let mut gold_triples = BTreeSet::new();
    for (relation, pairs) in raw.relations {
        let canonical = schema
            .resolve_relation(&relation)
            .ok_or_else(|| Error::UnknownRelation(relation.clone()))?
            .name
            .clone();
        for (head, tail) in pairs {
            if head.trim().is_empty() || tail.trim().is_empty() {
                return Err(malformed(path, line, "empty triple argument"));
            }
            gold_triples.insert(Triple::new(head, canonical.clone(), tail));
        }
    }
    Ok(Sample {
        id: raw.id,
        text: raw.text,
        gold_entities,
        gold_triples,
    })
}

fn load_split(path: &Path, schema: &RelationSchema, seen: &mut BTreeSet<String>) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for (line, raw) in parse_lines::<RawSampleRecord>(path)? {
        let sample = sample_from_raw(raw, schema, path, line)?;
        if !seen.insert(sample.id.clone()) {
            return Err(Error::DuplicateId(sample.id));
        }
        samples.push(sample);
    }
    Ok(samples)
}

/// Load `train.jsonl`, `dev.jsonl`, `test.jsonl` from `dir`, validating every
/// record against the schema and rejecting duplicate ids across splits.
pub fn load_corpus(dir: impl AsRef<Path>, schema: &RelationSchema) -> Result<Corpus> {
    let dir = dir.as_ref();
    let mut seen = BTreeSet::new();
    Ok(Corpus {
        train: load_split(&dir.join("train.jsonl"), schema, &mut seen)?,
        dev: load_split(&dir.join("dev.jsonl"), schema, &mut seen)?,
        test: load_split(&dir.join("test.jsonl"), schema, &mut seen)?,
    })
}

fn sample_to_raw(sample: &Sample) -> RawSampleRecord {
    let mut entities: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for e in &sample.gold_entities {
        entities.entry(e.etype.clone()).or_default().push(e.surface.clone());
    }
    let mut relations: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    for t in &sample.gold_triples {
        relations
            .entry(t.relation.clone())
            .or_default()
            .push((t.head.clone(), t.tail.clone()));
    }
    RawSampleRecord {
        id: sample.id.clone(),
        text: sample.text.clone(),
        entities,
        relations,
    }
}

fn write_split(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut out = String::new();
    for sample in samples {
        out.push_str(&serde_json::to_string(&sample_to_raw(sample))?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Inverse of [`load_corpus`]: canonical names, one record per line.
pub fn write_corpus(dir: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_split(&dir.join("train.jsonl"), &corpus.train)?;
    write_split(&dir.join("dev.jsonl"), &corpus.dev)?;
    write_split(&dir.join("test.jsonl"), &corpus.test)?;
    Ok(())
}

/// Load one prediction file and return a prediction for every sample in
/// `dev ∪ test`: samples without a record get an empty prediction (the SLM
/// may legitimately predict nothing).
pub fn load_slm_predictions(
    path: impl AsRef<Path>,
    corpus: &Corpus,
    schema: &RelationSchema,
) -> Result<BTreeMap<String, SlmPrediction>> {
    let path = path.as_ref();
    let known: BTreeSet<&str> = corpus
        .dev
        .iter()
        .chain(corpus.test.iter())
        .map(|s| s.id.as_str())
        .collect();

    let mut map: BTreeMap<String, SlmPrediction> = known
        .iter()
        .map(|id| (id.to_string(), SlmPrediction::empty(*id)))
        .collect();

    for (line, raw) in parse_lines::<RawPredictionRecord>(path)? {
        if !known.contains(raw.sample_id.as_str()) {
            return Err(Error::OrphanPrediction(raw.sample_id));
        }
        let pred = map.get_mut(&raw.sample_id).expect("id validated above");
        for (etype, items) in &raw.entities {
            let canonical = schema
                .resolve_entity_type(etype)
                .ok_or_else(|| Error::UnknownEntityType(etype.clone()))?
                .name
                .clone();
            for (surface, prob) in items {
                if surface.trim().is_empty() {
                    return Err(malformed(path, line, "empty entity surface"));
                }
                pred.entities.push(ScoredEntity {
                    entity: Entity::new(canonical.clone(), surface.clone()),
                    prob: prob.to_prob()?,
                });
            }
        }
        for (relation, items) in &raw.relations {
            let canonical = schema
                .resolve_relation(relation)
                .ok_or_else(|| Error::UnknownRelation(relation.clone()))?
                .name
                .clone();
            for ((head, tail), prob) in items {
                pred.push_triple(ScoredTriple {
                    triple: Triple::new(head.clone(), canonical.clone(), tail.clone()),
                    prob: prob.to_prob()?,
                });
            }
        }
    }
    Ok(map)
}

/// Serialize predictions back to the line format; empty predictions are
/// omitted (absence means "predicted nothing").
pub fn write_slm_predictions(
    path: impl AsRef<Path>,
    preds: &BTreeMap<String, SlmPrediction>,
) -> Result<()> {
    let mut out = String::new();
    for (id, pred) in preds {
        if pred.entities.is_empty() && pred.triples.is_empty() {
            continue;
        }
        let mut entities: BTreeMap<String, Vec<(String, Prob)>> = BTreeMap::new();
        for se in &pred.entities {
            entities
                .entry(se.entity.etype.clone())
                .or_default()
                .push((se.entity.surface.clone(), se.prob));
        }
        let mut relations: BTreeMap<String, Vec<((String, String), Prob)>> = BTreeMap::new();
        for st in &pred.triples {
            relations
                .entry(st.triple.relation.clone())
                .or_default()
                .push(((st.triple.head.clone(), st.triple.tail.clone()), st.prob));
        }
        #[derive(Serialize)]
        struct Line<'a> {
            sample_id: &'a str,
            entities: BTreeMap<String, Vec<(String, Prob)>>,
            relations: BTreeMap<String, Vec<((String, String), Prob)>>,
        }
        out.push_str(&serde_json::to_string(&Line {
            sample_id: id,
            entities,
            relations,
        })?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SchemaFile {
    #[serde(default)]
    entity_types: Vec<EntityType>,
    relations: Vec<RelationType>,
}

/// Load the relation schema (single JSON document). An `Other` fallback type
/// is appended when missing.
pub fn load_schema(path: impl AsRef<Path>) -> Result<RelationSchema> {
    let content = fs::read_to_string(path.as_ref())?;
    let file: SchemaFile = serde_json::from_str(&content)?;
    RelationSchema::new(file.relations, file.entity_types)
}

pub fn write_schema(path: impl AsRef<Path>, schema: &RelationSchema) -> Result<()> {
    let file = SchemaFile {
        entity_types: schema.entity_types.clone(),
        relations: schema.relations.clone(),
    };
    fs::write(path.as_ref(), serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// Count samples, characters, and gold triples; flag tail relations below
/// `tail_threshold`.
pub fn compute_stats(corpus: &Corpus, tail_threshold: usize) -> DatasetStats {
    let mut per_relation_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_relation_train_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut n_samples = 0usize;
    let mut n_chars = 0usize;
    let mut n_triples = 0usize;

    for sample in corpus.iter_all() {
        n_samples += 1;
        n_chars += sample.text.chars().count();
        for t in &sample.gold_triples {
            n_triples += 1;
            *per_relation_counts.entry(t.relation.clone()).or_default() += 1;
        }
    }
    for sample in &corpus.train {
        for t in &sample.gold_triples {
            *per_relation_train_counts.entry(t.relation.clone()).or_default() += 1;
        }
    }

    let tail_relations = per_relation_counts
        .iter()
        .filter(|(_, &c)| c < tail_threshold)
        .map(|(name, _)| name.clone())
        .collect();

    DatasetStats {
        n_samples,
        n_chars,
        n_triples,
        per_relation_counts,
        per_relation_train_counts,
        tail_relations,
        tail_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::OTHER_RELATION;
    use tempfile::TempDir;

    fn test_schema() -> RelationSchema {
        RelationSchema::new(
            vec![
                RelationType {
                    name: "Title/Office Holding".into(),
                    label: Some("任職".into()),
                    definition: "任職是指人物承擔了某官職，或者得到封號或者諡號。".into(),
                    triggers: vec!["為".into(), "拜".into()],
                    aliases: vec![],
                    domain: "Politics".into(),
                },
                RelationType {
                    name: "Kill".into(),
                    label: Some("殺害".into()),
                    definition: "殺害是指一方導致另一方死亡。".into(),
                    triggers: vec!["殺".into(), "刺殺".into(), "斬".into()],
                    aliases: vec![],
                    domain: "War".into(),
                },
            ],
            vec![
                EntityType {
                    name: "Person".into(),
                    label: Some("人物".into()),
                },
                EntityType {
                    name: "Office".into(),
                    label: Some("職官".into()),
                },
            ],
        )
        .unwrap()
    }

    fn write_corpus_files(dir: &Path, train: &str, dev: &str, test: &str) {
        fs::write(dir.join("train.jsonl"), train).unwrap();
        fs::write(dir.join("dev.jsonl"), dev).unwrap();
        fs::write(dir.join("test.jsonl"), test).unwrap();
    }

    #[test]
    fn empty_test_split_is_fine() {
        let dir = TempDir::new().unwrap();
        write_corpus_files(
            dir.path(),
            r#"{"id":"t1","text":"以夏侯淵为都護將軍。","entities":{"人物":["夏侯淵"]},"relations":{}}"#,
            "",
            "",
        );
        let corpus = load_corpus(dir.path(), &test_schema()).unwrap();
        assert_eq!(corpus.train.len(), 1);
        assert!(corpus.test.is_empty());
    }

    #[test]
    fn relation_alias_resolves_to_canonical() {
        let dir = TempDir::new().unwrap();
        write_corpus_files(
            dir.path(),
            r#"{"id":"t1","text":"以夏侯淵为都護將軍。","entities":{"人物":["夏侯淵"],"職官":["都護將軍"]},"relations":{"任職":[["夏侯淵","都護將軍"]]}}"#,
            "",
            "",
        );
        let corpus = load_corpus(dir.path(), &test_schema()).unwrap();
        let t = corpus.train[0].gold_triples.iter().next().unwrap();
        assert_eq!(t.relation, "Title/Office Holding");
    }

    #[test]
    fn duplicate_id_across_splits_rejected() {
        let dir = TempDir::new().unwrap();
        write_corpus_files(
            dir.path(),
            r#"{"id":"x","text":"甲殺乙。","entities":{},"relations":{}}"#,
            r#"{"id":"x","text":"丙殺丁。","entities":{},"relations":{}}"#,
            "",
        );
        let err = load_corpus(dir.path(), &test_schema()).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "x"));
    }

    #[test]
    fn unknown_relation_rejected_but_other_accepted() {
        let dir = TempDir::new().unwrap();
        write_corpus_files(
            dir.path(),
            r#"{"id":"t1","text":"甲與乙。","entities":{},"relations":{"Nonexistent":[["甲","乙"]]}}"#,
            "",
            "",
        );
        let err = load_corpus(dir.path(), &test_schema()).unwrap_err();
        assert!(matches!(err, Error::UnknownRelation(_)));

        write_corpus_files(
            dir.path(),
            r#"{"id":"t1","text":"甲與乙。","entities":{},"relations":{"其他":[["甲","乙"]]}}"#,
            "",
            "",
        );
        let corpus = load_corpus(dir.path(), &test_schema()).unwrap();
        let t = corpus.train[0].gold_triples.iter().next().unwrap();
        assert_eq!(t.relation, OTHER_RELATION);
    }

    #[test]
    fn prediction_entity_type_label_maps_to_canonical() {
        let dir = TempDir::new().unwrap();
        write_corpus_files(
            dir.path(),
            "",
            r#"{"id":"d1","text":"以夏侯淵为都護將軍。","entities":{},"relations":{}}"#,
            "",
        );
        let corpus = load_corpus(dir.path(), &test_schema()).unwrap();
        let pred_path = dir.path().join("dev_pred.jsonl");
        fs::write(
            &pred_path,
            r#"{"sample_id":"d1","entities":{"人物":[["夏侯淵","0.9998"]]},"relations":{}}"#,
        )
        .unwrap();
        let preds = load_slm_predictions(&pred_path, &corpus, &test_schema()).unwrap();
        let p = &preds["d1"];
        assert_eq!(p.entities[0].entity, Entity::new("Person", "夏侯淵"));
        assert_eq!(p.entities[0].prob.to_decimal_string(), "0.9998");
    }

    #[test]
    fn out_of_range_probability_rejected() {
        let dir = TempDir::new().unwrap();
        write_corpus_files(
            dir.path(),
            "",
            r#"{"id":"d1","text":"某句。","entities":{},"relations":{}}"#,
            "",
        );
        let corpus = load_corpus(dir.path(), &test_schema()).unwrap();
        let pred_path = dir.path().join("p.jsonl");
        fs::write(
            &pred_path,
            r#"{"sample_id":"d1","entities":{"人物":[["甲",1.5]]},"relations":{}}"#,
        )
        .unwrap();
        let err = load_slm_predictions(&pred_path, &corpus, &test_schema()).unwrap_err();
        assert!(matches!(err, Error::BadProbability { .. }));
    }

    #[test]
    fn duplicate_prediction_triples_keep_max_prob() {
        let dir = TempDir::new().unwrap();
        write_corpus_files(
            dir.path(),
            "",
            r#"{"id":"d1","text":"甲殺乙。","entities":{},"relations":{}}"#,
            "",
        );
        let corpus = load_corpus(dir.path(), &test_schema()).unwrap();
        let pred_path = dir.path().join("p.jsonl");
        fs::write(
            &pred_path,
            r#"{"sample_id":"d1","entities":{},"relations":{"Kill":[[["甲","乙"],"0.4"],[["甲","乙"],"0.9"]]}}"#,
        )
        .unwrap();
        let preds = load_slm_predictions(&pred_path, &corpus, &test_schema()).unwrap();
        assert_eq!(preds["d1"].triples.len(), 1);
        assert_eq!(preds["d1"].triples[0].prob.value(), 0.9);
    }

    #[test]
    fn orphan_prediction_rejected_and_missing_entry_is_empty() {
        let dir = TempDir::new().unwrap();
        write_corpus_files(
            dir.path(),
            "",
            r#"{"id":"d1","text":"甲殺乙。","entities":{},"relations":{}}"#,
            "",
        );
        let corpus = load_corpus(dir.path(), &test_schema()).unwrap();

        let pred_path = dir.path().join("p.jsonl");
        fs::write(&pred_path, r#"{"sample_id":"ghost","entities":{},"relations":{}}"#).unwrap();
        let err = load_slm_predictions(&pred_path, &corpus, &test_schema()).unwrap_err();
        assert!(matches!(err, Error::OrphanPrediction(id) if id == "ghost"));

        fs::write(&pred_path, "").unwrap();
        let preds = load_slm_predictions(&pred_path, &corpus, &test_schema()).unwrap();
        assert_eq!(preds["d1"], SlmPrediction::empty("d1"));
    }

    #[test]
    fn schema_file_round_trip_and_other_appended() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("schema.json");
        fs::write(
            &path,
            r#"{"entity_types":[{"name":"Person","label":"人物"}],
                "relations":[{"name":"Kill","label":"殺害",
                              "definition":"殺害是指一方導致另一方死亡。",
                              "triggers":["殺","刺殺","斬"]}]}"#,
        )
        .unwrap();
        let schema = load_schema(&path).unwrap();
        assert!(schema.relation(OTHER_RELATION).is_some());
        let kill = schema.relation("Kill").unwrap();
        assert_eq!(kill.triggers, vec!["殺", "刺殺", "斬"]);

        let out = dir.path().join("schema-out.json");
        write_schema(&out, &schema).unwrap();
        assert_eq!(load_schema(&out).unwrap(), schema);
    }

    #[test]
    fn stats_count_triples_per_relation() {
        let dir = TempDir::new().unwrap();
        write_corpus_files(
            dir.path(),
            r#"{"id":"t1","text":"甲殺乙，又殺丙。","entities":{},"relations":{"Kill":[["甲","乙"],["甲","丙"]]}}"#,
            "",
            "",
        );
        let corpus = load_corpus(dir.path(), &test_schema()).unwrap();
        let stats = compute_stats(&corpus, DEFAULT_TAIL_THRESHOLD);
        assert_eq!(stats.n_samples, 1);
        assert_eq!(stats.n_triples, 2);
        assert_eq!(stats.per_relation_counts["Kill"], 2);
        assert_eq!(stats.n_chars, "甲殺乙，又殺丙。".chars().count());
        // Both relations present fall below the default threshold here.
        assert!(stats.tail_relations.contains("Kill"));
    }

    #[test]
    fn stats_totals_match_brute_force_recount() {
        let dir = TempDir::new().unwrap();
        write_corpus_files(
            dir.path(),
            r#"{"id":"t1","text":"甲殺乙。","entities":{},"relations":{"Kill":[["甲","乙"]]}}
{"id":"t2","text":"丙拜太守。","entities":{},"relations":{"任職":[["丙","太守"]]}}"#,
            r#"{"id":"d1","text":"丁殺戊。","entities":{},"relations":{"Kill":[["丁","戊"]]}}"#,
            "",
        );
        let corpus = load_corpus(dir.path(), &test_schema()).unwrap();
        let stats = compute_stats(&corpus, 100);

        let brute_triples: usize = corpus.iter_all().map(|s| s.gold_triples.len()).sum();
        let brute_chars: usize = corpus.iter_all().map(|s| s.text.chars().count()).sum();
        assert_eq!(stats.n_triples, brute_triples);
        assert_eq!(stats.n_chars, brute_chars);
        assert_eq!(
            stats.per_relation_counts.values().sum::<usize>(),
            stats.n_triples
        );
        assert_eq!(stats.per_relation_train_counts["Kill"], 1);
    }

    #[test]
    fn corpus_round_trip() {
        let dir = TempDir::new().unwrap();
        write_corpus_files(
            dir.path(),
            r#"{"id":"t1","text":"甲殺乙。","entities":{"人物":["甲","乙"]},"relations":{"Kill":[["甲","乙"]]}}"#,
            r#"{"id":"d1","text":"丙拜太守。","entities":{"人物":["丙"],"職官":["太守"]},"relations":{"任職":[["丙","太守"]]}}"#,
            "",
        );
        let schema = test_schema();
        let corpus = load_corpus(dir.path(), &schema).unwrap();

        let out = TempDir::new().unwrap();
        write_corpus(out.path(), &corpus).unwrap();
        let reloaded = load_corpus(out.path(), &schema).unwrap();
        assert_eq!(corpus, reloaded);
    }
}
