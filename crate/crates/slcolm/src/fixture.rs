//! Synthetic corpus generation with a long-tail relation distribution and a
//! scripted SLM whose per-relation recall/precision is configurable, so tail
//! failure can be simulated offline.
//!
//! Generation is a pure function of `(spec, schema, seed)`: two runs with the
//! same inputs produce byte-identical files.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest;
use crate::types::{
    Corpus, Entity, EntityType, Prob, RelationSchema, RelationType, Sample, ScoredEntity,
    ScoredTriple, SlmPrediction, Triple,
};

const PERSONS: &[&str] = &[
    "曹操", "劉備", "孫權", "夏侯淵", "董卓", "袁紹", "呂布", "關羽", "張飛", "趙雲", "周瑜",
    "魯肅", "諸葛亮", "司馬懿", "郭嘉", "荀彧", "黃忠", "馬超", "姜維", "鄧艾", "陸遜", "甘寧",
    "太史慈", "張遼", "徐晃", "龐德", "法正", "嚴顏", "魏延", "王允",
];
const OFFICES: &[&str] = &[
    "都護將軍", "左將軍", "中軍校尉", "太守", "刺史", "丞相", "司馬", "司徒", "尚書令", "別駕",
    "主簿", "校尉",
];
const LOCATIONS: &[&str] = &[
    "洛陽", "長安", "許昌", "鄴城", "成都", "建業", "襄陽", "漢中", "壽春", "官渡", "赤壁",
    "街亭",
];
const TIMES: &[&str] = &[
    "建安五年", "建安十三年", "延熹二年", "中平元年", "初平三年", "興平二年", "景耀六年",
    "黃初元年",
];
const PREFIXES: &[&str] = &["", "初，", "是歲，", "後", "於是", "既而"];

/// How the scripted SLM behaves per relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlmProfile {
    /// Chance a gold triple is predicted (per relation overrides below).
    #[serde(default = "default_recall")]
    pub default_recall: f64,
    #[serde(default)]
    pub recall: BTreeMap<String, f64>,
    /// Chance of injecting one wrong triple per sample; never applied to
    /// relations with zero recall (an SLM blind to a relation emits nothing
    /// for it).
    #[serde(default = "default_fp_rate")]
    pub false_positive_rate: f64,
    #[serde(default = "default_entity_recall")]
    pub entity_recall: f64,
}

fn default_recall() -> f64 {
    0.9
}
fn default_fp_rate() -> f64 {
    0.05
}
fn default_entity_recall() -> f64 {
    1.0
}

impl Default for SlmProfile {
    fn default() -> Self {
        SlmProfile {
            default_recall: default_recall(),
            recall: BTreeMap::new(),
            false_positive_rate: default_fp_rate(),
            entity_recall: default_entity_recall(),
        }
    }
}

impl SlmProfile {
    pub fn recall_for(&self, relation: &str) -> f64 {
        self.recall
            .get(relation)
            .copied()
            .unwrap_or(self.default_recall)
    }
}

/// Per-relation sample counts plus split ratios and the SLM profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub relations: BTreeMap<String, usize>,
    #[serde(default = "default_split_ratio")]
    pub dev_ratio: f64,
    #[serde(default = "default_split_ratio")]
    pub test_ratio: f64,
    /// Entity type of the tail argument per relation; defaults to the
    /// schema's first entity type.
    #[serde(default)]
    pub tail_types: BTreeMap<String, String>,
    #[serde(default)]
    pub slm: SlmProfile,
}

fn default_split_ratio() -> f64 {
    0.2
}

#[derive(Debug, Clone)]
pub struct GeneratedFixture {
    pub corpus: Corpus,
    pub predictions: BTreeMap<String, SlmPrediction>,
}

fn pool_for(etype: &str) -> &'static [&'static str] {
    match etype {
        "Office" => OFFICES,
        "Location" => LOCATIONS,
        "Time" => TIMES,
        _ => PERSONS,
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn pick_other<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], not: &str) -> &'a str {
    loop {
        let candidate = pick(rng, pool);
        if candidate != not {
            return candidate;
        }
    }
}

struct PlannedSample {
    relation: String,
    text: String,
    head: String,
    tails: Vec<String>,
    head_type: String,
    tail_type: String,
}

fn plan_sample(
    rng: &mut ChaCha8Rng,
    relation: &RelationType,
    head_type: &str,
    tail_type: &str,
) -> PlannedSample {
    let trigger = if relation.triggers.is_empty() {
        relation.label().to_string()
    } else {
        relation.triggers[rng.gen_range(0..relation.triggers.len())].clone()
    };
    let head = pick(rng, pool_for(head_type)).to_string();
    let tail = pick(rng, pool_for(tail_type)).to_string();
    let prefix = pick(rng, PREFIXES);

    let mut tails = vec![tail.clone()];
    let mut text = format!("{prefix}{head}{trigger}{tail}");
    // occasionally a second triple of the same relation
    if rng.gen_bool(0.15) {
        let second = pick_other(rng, pool_for(tail_type), &tail).to_string();
        text.push_str(&format!("，又{trigger}{second}"));
        tails.push(second);
    }
    text.push('。');

    PlannedSample {
        relation: relation.name.clone(),
        text,
        head,
        tails,
        head_type: head_type.to_string(),
        tail_type: tail_type.to_string(),
    }
}

fn to_sample(id: String, plan: &PlannedSample) -> Sample {
    let mut gold_entities = std::collections::BTreeSet::new();
    gold_entities.insert(Entity::new(plan.head_type.clone(), plan.head.clone()));
    for tail in &plan.tails {
        gold_entities.insert(Entity::new(plan.tail_type.clone(), tail.clone()));
    }
    let gold_triples = plan
        .tails
        .iter()
        .map(|tail| Triple::new(plan.head.clone(), plan.relation.clone(), tail.clone()))
        .collect();
    Sample {
        id,
        text: plan.text.clone(),
        gold_entities,
        gold_triples,
    }
}

fn split_counts(n: usize, dev_ratio: f64, test_ratio: f64) -> (usize, usize, usize) {
    let mut dev = (n as f64 * dev_ratio).round() as usize;
    let mut test = (n as f64 * test_ratio).round() as usize;
    if n >= 3 {
        dev = dev.max(1);
        test = test.max(1);
    }
    while dev + test >= n && dev + test > 0 {
        if dev >= test && dev > 0 {
            dev -= 1;
        } else if test > 0 {
            test -= 1;
        }
    }
    (n - dev - test, dev, test)
}

fn quantized(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Prob {
    let raw = rng.gen_range(lo..hi);
    Prob::new((raw * 1e4).round() / 1e4).expect("range stays within [0, 1]")
}

fn predict(
    rng: &mut ChaCha8Rng,
    sample: &Sample,
    profile: &SlmProfile,
    head_type: &str,
) -> SlmPrediction {
    let mut pred = SlmPrediction::empty(&sample.id);
    for entity in &sample.gold_entities {
        if rng.gen_bool(profile.entity_recall.clamp(0.0, 1.0)) {
            pred.entities.push(ScoredEntity {
                entity: entity.clone(),
                prob: quantized(rng, 0.95, 1.0),
            });
        }
    }
    let mut any_recalled_relation = false;
    for triple in &sample.gold_triples {
        let recall = profile.recall_for(&triple.relation).clamp(0.0, 1.0);
        if recall > 0.0 {
            any_recalled_relation = true;
        }
        if recall > 0.0 && rng.gen_bool(recall) {
            pred.push_triple(ScoredTriple {
                triple: triple.clone(),
                prob: quantized(rng, 0.3, 1.0),
            });
        }
    }
    // wrong-head noise, only for relations the SLM does predict
    if any_recalled_relation && rng.gen_bool(profile.false_positive_rate.clamp(0.0, 1.0)) {
        if let Some(gold) = sample.gold_triples.iter().next() {
            if profile.recall_for(&gold.relation) > 0.0 {
                let wrong_head = pick_other(rng, pool_for(head_type), &gold.head);
                pred.push_triple(ScoredTriple {
                    triple: Triple::new(wrong_head, gold.relation.clone(), gold.tail.clone()),
                    prob: quantized(rng, 0.3, 0.9),
                });
            }
        }
    }
    pred
}

/// Generate a corpus and its scripted SLM predictions. Deterministic for a
/// given `(spec, schema, seed)`.
pub fn generate_fixture(
    spec: &FixtureSpec,
    schema: &RelationSchema,
    seed: u64,
) -> Result<GeneratedFixture> {
    if spec.relations.is_empty() {
        return Err(Error::SpecEmpty);
    }
    let head_type = schema
        .entity_types
        .first()
        .map(|t| t.name.clone())
        .unwrap_or_else(|| "Person".to_string());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_plans: Vec<PlannedSample> = Vec::new();
    let mut dev_plans: Vec<PlannedSample> = Vec::new();
    let mut test_plans: Vec<PlannedSample> = Vec::new();

    for (name, &count) in &spec.relations {
        let relation = schema
            .relation(name)
            .ok_or_else(|| Error::UnknownRelation(name.clone()))?
            .clone();
        let tail_type = spec
            .tail_types
            .get(name)
            .cloned()
            .unwrap_or_else(|| head_type.clone());
        let (n_train, n_dev, _) = split_counts(count, spec.dev_ratio, spec.test_ratio);
        for i in 0..count {
            let plan = plan_sample(&mut rng, &relation, &head_type, &tail_type);
            if i < n_train {
                train_plans.push(plan);
            } else if i < n_train + n_dev {
                dev_plans.push(plan);
            } else {
                test_plans.push(plan);
            }
        }
    }

    let make = |plans: &[PlannedSample], prefix: &str| -> Vec<Sample> {
        plans
            .iter()
            .enumerate()
            .map(|(i, plan)| to_sample(format!("{prefix}-{:04}", i + 1), plan))
            .collect()
    };
    let corpus = Corpus {
        train: make(&train_plans, "train"),
        dev: make(&dev_plans, "dev"),
        test: make(&test_plans, "test"),
    };

    let mut predictions = BTreeMap::new();
    for samples in [&corpus.dev, &corpus.test] {
        for sample in samples.iter() {
            let pred = predict(&mut rng, sample, &spec.slm, &head_type);
            predictions.insert(sample.id.clone(), pred);
        }
    }

    Ok(GeneratedFixture { corpus, predictions })
}

/// Generate and write the whole fixture tree:
/// `corpus/{train,dev,test}.jsonl`, `predictions/{dev,test}.jsonl`,
/// `schema.json`, and `fixture_spec.json`.
pub fn write_fixture(
    dir: impl AsRef<Path>,
    spec: &FixtureSpec,
    schema: &RelationSchema,
    seed: u64,
) -> Result<GeneratedFixture> {
    let dir = dir.as_ref();
    let generated = generate_fixture(spec, schema, seed)?;

    ingest::write_corpus(dir.join("corpus"), &generated.corpus)?;
    std::fs::create_dir_all(dir.join("predictions"))?;
    let dev_ids: std::collections::BTreeSet<&str> =
        generated.corpus.dev.iter().map(|s| s.id.as_str()).collect();
    let (dev_preds, test_preds): (BTreeMap<_, _>, BTreeMap<_, _>) = generated
        .predictions
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .partition(|(id, _)| dev_ids.contains(id.as_str()));
    ingest::write_slm_predictions(dir.join("predictions/dev.jsonl"), &dev_preds)?;
    ingest::write_slm_predictions(dir.join("predictions/test.jsonl"), &test_preds)?;
    ingest::write_schema(dir.join("schema.json"), schema)?;
    std::fs::write(
        dir.join("fixture_spec.json"),
        serde_json::to_string_pretty(&spec)?,
    )?;
    Ok(generated)
}

fn rel(
    name: &str,
    label: &str,
    domain: &str,
    definition: &str,
    triggers: &[&str],
) -> RelationType {
    RelationType {
        name: name.into(),
        label: Some(label.into()),
        definition: definition.into(),
        triggers: triggers.iter().map(|s| s.to_string()).collect(),
        aliases: vec![],
        domain: domain.into(),
    }
}

/// Built-in schema used by `generate-fixture` when no schema file is given:
/// twelve relation types across the usual domains, with trigger lexicons and
/// prompt labels.
pub fn demo_schema() -> RelationSchema {
    RelationSchema::new(
        vec![
            rel(
                "Title/Office Holding",
                "任職",
                "Politics",
                "任職是指人物承擔了某官職，或者得到封號或者諡號。",
                &["拜", "任", "封", "遷"],
            ),
            rel(
                "Affiliation",
                "歸屬",
                "Politics",
                "歸屬是指人物投靠或隸屬於另一方勢力。",
                &["攻", "率", "奔", "降", "歸"],
            ),
            rel(
                "Kill",
                "殺害",
                "War",
                "殺害是指一方導致另一方死亡的行為。",
                &["殺", "討", "謀殺", "攻殺", "斬", "誅", "刺", "刺殺", "襲殺", "射殺", "擊殺", "屠"],
            ),
            rel(
                "Attack",
                "攻伐",
                "War",
                "攻伐是指一方對另一方發動軍事進攻。",
                &["攻", "伐", "擊", "侵", "征"],
            ),
            rel(
                "Construction",
                "修建",
                "Geography",
                "修建是指人物建造城池、宮室或其他工事。",
                &["築", "建", "作", "起"],
            ),
            rel(
                "Father",
                "父親",
                "Family",
                "父親是指前者為後者的父親。",
                &["父"],
            ),
            rel(
                "Brother",
                "兄弟",
                "Family",
                "兄弟是指兩人為兄弟關係。",
                &["兄", "弟"],
            ),
            rel(
                "Marriage",
                "婚姻",
                "Family",
                "婚姻是指兩人結為夫妻。",
                &["娶", "妻", "嫁"],
            ),
            rel(
                "Fearfulness",
                "恐懼",
                "Society",
                "恐懼是指一方對另一方感到畏懼或憂慮。",
                &["恐", "懼", "憂怖"],
            ),
            rel(
                "Motherhood",
                "母親",
                "Family",
                "母親是指前者為後者的母親。",
                &["母"],
            ),
            rel(
                "Time of Death",
                "死亡時間",
                "Person Information",
                "死亡時間是指人物去世的時間。",
                &["卒於", "薨於"],
            ),
            rel(
                "Death Location",
                "死亡地點",
                "Person Information",
                "死亡地點是指人物去世的地點。",
                &["死於", "歿於"],
            ),
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
            EntityType {
                name: "Location".into(),
                label: Some("地點".into()),
            },
            EntityType {
                name: "Time".into(),
                label: Some("時間".into()),
            },
        ],
    )
    .expect("built-in schema is well-formed")
}

/// The head relations of the long-tail preset.
pub fn demo_head_relations() -> Vec<&'static str> {
    vec![
        "Title/Office Holding",
        "Affiliation",
        "Kill",
        "Attack",
        "Construction",
        "Father",
        "Brother",
        "Marriage",
    ]
}

/// The tail relations of the long-tail preset: the SLM scores zero on these.
pub fn demo_tail_relations() -> Vec<&'static str> {
    vec!["Fearfulness", "Motherhood", "Time of Death", "Death Location"]
}

/// Long-tail preset: eight head relations at 160 samples, four tail
/// relations at 24, SLM blind on the tail.
pub fn demo_fixture_spec() -> FixtureSpec {
    let mut relations = BTreeMap::new();
    for name in demo_head_relations() {
        relations.insert(name.to_string(), 160);
    }
    for name in demo_tail_relations() {
        relations.insert(name.to_string(), 24);
    }
    let mut recall = BTreeMap::new();
    for name in demo_tail_relations() {
        recall.insert(name.to_string(), 0.0);
    }
    let mut tail_types = BTreeMap::new();
    tail_types.insert("Title/Office Holding".to_string(), "Office".to_string());
    tail_types.insert("Construction".to_string(), "Location".to_string());
    tail_types.insert("Time of Death".to_string(), "Time".to_string());
    tail_types.insert("Death Location".to_string(), "Location".to_string());

    FixtureSpec {
        relations,
        dev_ratio: 0.2,
        test_ratio: 0.2,
        tail_types,
        slm: SlmProfile {
            default_recall: 0.9,
            recall,
            false_positive_rate: 0.05,
            entity_recall: 1.0,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::compute_stats;
    use tempfile::TempDir;

    fn small_spec() -> FixtureSpec {
        let mut relations = BTreeMap::new();
        relations.insert("Kill".to_string(), 50);
        relations.insert("Marriage".to_string(), 3);
        FixtureSpec {
            relations,
            dev_ratio: 0.2,
            test_ratio: 0.2,
            tail_types: BTreeMap::new(),
            slm: SlmProfile::default(),
        }
    }

    #[test]
    fn same_seed_gives_byte_identical_files() {
        let schema = demo_schema();
        let spec = small_spec();
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        write_fixture(a.path(), &spec, &schema, 7).unwrap();
        write_fixture(b.path(), &spec, &schema, 7).unwrap();
        for file in [
            "corpus/train.jsonl",
            "corpus/dev.jsonl",
            "corpus/test.jsonl",
            "predictions/dev.jsonl",
            "predictions/test.jsonl",
            "schema.json",
        ] {
            let left = std::fs::read(a.path().join(file)).unwrap();
            let right = std::fs::read(b.path().join(file)).unwrap();
            assert_eq!(left, right, "{file} differs between identical runs");
        }
    }

    #[test]
    fn different_seeds_differ() {
        let schema = demo_schema();
        let spec = small_spec();
        let a = generate_fixture(&spec, &schema, 1).unwrap();
        let b = generate_fixture(&spec, &schema, 2).unwrap();
        assert_ne!(a.corpus, b.corpus);
    }

    #[test]
    fn stats_mark_small_relations_as_tail() {
        let schema = demo_schema();
        let generated = generate_fixture(&small_spec(), &schema, 7).unwrap();
        let stats = compute_stats(&generated.corpus, 100);
        assert!(stats.tail_relations.contains("Marriage"));
        assert_eq!(stats.per_relation_counts["Marriage"], 3);
    }

    #[test]
    fn stats_echo_the_requested_distribution() {
        let schema = demo_schema();
        let spec = small_spec();
        let generated = generate_fixture(&spec, &schema, 11).unwrap();
        let stats = compute_stats(&generated.corpus, 100);
        // triple counts can exceed sample counts (second-triple samples),
        // sample counts per relation match the spec exactly
        let mut per_relation_samples: BTreeMap<String, usize> = BTreeMap::new();
        for s in generated.corpus.iter_all() {
            for name in s.gold_relations() {
                *per_relation_samples.entry(name).or_default() += 1;
            }
        }
        for (name, &count) in &spec.relations {
            assert_eq!(per_relation_samples[name], count, "{name}");
            assert!(stats.per_relation_counts[name] >= count);
        }
        assert_eq!(stats.n_samples, 53);
    }

    #[test]
    fn zero_recall_relation_has_no_predicted_triples() {
        let schema = demo_schema();
        let mut spec = small_spec();
        spec.slm.recall.insert("Marriage".to_string(), 0.0);
        let generated = generate_fixture(&spec, &schema, 13).unwrap();
        for pred in generated.predictions.values() {
            assert!(pred
                .triples
                .iter()
                .all(|st| st.triple.relation != "Marriage"));
        }
    }

    #[test]
    fn planted_triggers_appear_in_texts() {
        let schema = demo_schema();
        let generated = generate_fixture(&small_spec(), &schema, 17).unwrap();
        for sample in generated.corpus.iter_all() {
            for name in sample.gold_relations() {
                let relation = schema.relation(&name).unwrap();
                assert!(
                    relation.triggers.iter().any(|w| sample.text.contains(w.as_str())),
                    "{} lacks a {} trigger",
                    sample.text,
                    name
                );
            }
        }
    }

    #[test]
    fn empty_spec_rejected() {
        let schema = demo_schema();
        let spec = FixtureSpec {
            relations: BTreeMap::new(),
            dev_ratio: 0.2,
            test_ratio: 0.2,
            tail_types: BTreeMap::new(),
            slm: SlmProfile::default(),
        };
        assert!(matches!(
            generate_fixture(&spec, &schema, 1),
            Err(Error::SpecEmpty)
        ));
    }

    #[test]
    fn every_split_populated_for_reasonable_counts() {
        let schema = demo_schema();
        let generated = generate_fixture(&small_spec(), &schema, 23).unwrap();
        assert!(!generated.corpus.train.is_empty());
        assert!(!generated.corpus.dev.is_empty());
        assert!(!generated.corpus.test.is_empty());
        // Marriage (count 3) lands one sample in each split
        let marriage_in = |split: &[Sample]| {
            split
                .iter()
                .filter(|s| s.gold_relations().contains("Marriage"))
                .count()
        };
        assert_eq!(marriage_in(&generated.corpus.train), 1);
        assert_eq!(marriage_in(&generated.corpus.dev), 1);
        assert_eq!(marriage_in(&generated.corpus.test), 1);
    }

    #[test]
    fn generated_files_reload_cleanly() {
        let schema = demo_schema();
        let dir = TempDir::new().unwrap();
        let generated = write_fixture(dir.path(), &small_spec(), &schema, 29).unwrap();

        let reloaded_schema = ingest::load_schema(dir.path().join("schema.json")).unwrap();
        let corpus = ingest::load_corpus(dir.path().join("corpus"), &reloaded_schema).unwrap();
        assert_eq!(corpus, generated.corpus);

        let dev =
            ingest::load_slm_predictions(dir.path().join("predictions/dev.jsonl"), &corpus, &reloaded_schema)
                .unwrap();
        for sample in &corpus.dev {
            assert_eq!(dev[&sample.id], generated.predictions[&sample.id]);
        }
    }
}
