//! Deterministic scripted backend for offline runs and tests.
//!
//! Answers come from a script keyed by sample id or by prompt hash, with an
//! optional default. The behavior-profile constructor scripts the backend
//! from gold annotations: relations in the "correct" set are answered with
//! their gold triples, everything else is garbled into parseable but wrong
//! triples, emulating a collaborator that is strong exactly where the SLM
//! is weak.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{prompt_hash, LlmBackend};
use crate::parse::render_gold_answer;
use crate::prompt::{PromptBundle, L_GOLD_ENT, L_GOLD_REL};
use crate::types::{RelationSchema, Sample, Triple};

/// Serializable script: explicit answers plus an optional default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub by_sample: BTreeMap<String, String>,
    #[serde(default)]
    pub by_prompt_hash: BTreeMap<String, String>,
    #[serde(default)]
    pub default: Option<String>,
}

pub struct ScriptedBackend {
    model: String,
    script: MockScript,
    calls: AtomicU64,
}

impl ScriptedBackend {
    pub fn new(model: impl Into<String>, script: MockScript) -> Self {
        ScriptedBackend {
            model: model.into(),
            script,
            calls: AtomicU64::new(0),
        }
    }

    /// Script gold-derived answers for `samples`: relations in
    /// `correct_relations` answer with the gold triples, other relations get
    /// a garbled head so the triple parses but never matches gold.
    pub fn from_profile(
        model: impl Into<String>,
        samples: &[Sample],
        schema: &RelationSchema,
        correct_relations: &BTreeSet<String>,
    ) -> Self {
        let mut by_sample = BTreeMap::new();
        for sample in samples {
            let mut answered = sample.clone();
            answered.gold_triples = sample
                .gold_triples
                .iter()
                .map(|t| {
                    if correct_relations.contains(&t.relation) {
                        t.clone()
                    } else {
                        Triple::new(format!("{}公", t.head), t.relation.clone(), t.tail.clone())
                    }
                })
                .collect();
            let text = render_gold_answer(&answered, schema, "綜合示例與關係定義，判斷如下。");
            by_sample.insert(sample.id.clone(), text);
        }
        ScriptedBackend::new(
            model,
            MockScript {
                by_sample,
                by_prompt_hash: BTreeMap::new(),
                default: None,
            },
        )
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmBackend for ScriptedBackend {
    fn model_name(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &PromptBundle) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let Some(answer) = self.script.by_prompt_hash.get(&prompt_hash(&prompt.text)) {
            return Ok(answer.clone());
        }
        if let Some(answer) = self.script.by_sample.get(&prompt.sample_id) {
            return Ok(answer.clone());
        }
        match &self.script.default {
            Some(answer) => Ok(answer.clone()),
            None => Err(Error::UnscriptedSample(prompt.sample_id.clone())),
        }
    }
}

/// Empty-answer text a default script can use: parseable, no entities, no
/// triples.
pub fn empty_answer() -> String {
    format!("{L_GOLD_ENT}\n{{}}\n{L_GOLD_REL}\n{{}}\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_llm_output;
    use crate::types::{Entity, EntityType, RelationType};
    use std::collections::BTreeSet;

    fn schema() -> RelationSchema {
        RelationSchema::new(
            vec![
                RelationType {
                    name: "Kill".into(),
                    label: Some("殺害".into()),
                    definition: "殺害是指一方導致另一方死亡。".into(),
                    triggers: vec![],
                    aliases: vec![],
                    domain: String::new(),
                },
                RelationType {
                    name: "Marriage".into(),
                    label: Some("婚姻".into()),
                    definition: "婚姻是指兩人結為夫妻。".into(),
                    triggers: vec![],
                    aliases: vec![],
                    domain: String::new(),
                },
            ],
            vec![EntityType {
                name: "Person".into(),
                label: Some("人物".into()),
            }],
        )
        .unwrap()
    }

    fn sample(id: &str, gold: &[(&str, &str, &str)]) -> Sample {
        Sample {
            id: id.into(),
            text: "甲殺乙。".into(),
            gold_entities: BTreeSet::from([Entity::new("Person", "甲")]),
            gold_triples: gold
                .iter()
                .map(|(h, r, t)| Triple::new(*h, *r, *t))
                .collect(),
        }
    }

    fn bundle(id: &str) -> PromptBundle {
        PromptBundle {
            sample_id: id.into(),
            text: format!("prompt {id}"),
            sections: vec![],
            token_estimate: 0,
        }
    }

    #[test]
    fn profile_answers_gold_for_correct_relations() {
        let s = schema();
        let samples = vec![sample("s1", &[("甲", "Kill", "乙")])];
        let backend = ScriptedBackend::from_profile(
            "mock",
            &samples,
            &s,
            &BTreeSet::from(["Kill".to_string()]),
        );
        let answer = backend.complete(&bundle("s1")).unwrap();
        let parsed = parse_llm_output("s1", &answer, &s);
        assert_eq!(parsed.triples, vec![Triple::new("甲", "Kill", "乙")]);
        assert!(!parsed.explanation.is_empty());
    }

    #[test]
    fn profile_garbles_other_relations_but_stays_parseable() {
        let s = schema();
        let samples = vec![sample("s1", &[("甲", "Kill", "乙")])];
        let backend = ScriptedBackend::from_profile("mock", &samples, &s, &BTreeSet::new());
        let answer = backend.complete(&bundle("s1")).unwrap();
        let parsed = parse_llm_output("s1", &answer, &s);
        assert_eq!(parsed.triples.len(), 1);
        assert_ne!(parsed.triples[0], Triple::new("甲", "Kill", "乙"));
        assert_eq!(parsed.triples[0].relation, "Kill");
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn unscripted_sample_without_default_errors() {
        let backend = ScriptedBackend::new("mock", MockScript::default());
        let err = backend.complete(&bundle("ghost")).unwrap_err();
        assert!(matches!(err, Error::UnscriptedSample(id) if id == "ghost"));

        let with_default = ScriptedBackend::new(
            "mock",
            MockScript {
                default: Some(empty_answer()),
                ..MockScript::default()
            },
        );
        assert!(with_default.complete(&bundle("ghost")).is_ok());
    }

    #[test]
    fn prompt_hash_script_takes_precedence() {
        let prompt = bundle("s1");
        let mut script = MockScript::default();
        script.by_sample.insert("s1".into(), "by sample".into());
        script
            .by_prompt_hash
            .insert(prompt_hash(&prompt.text), "by hash".into());
        let backend = ScriptedBackend::new("mock", script);
        assert_eq!(backend.complete(&prompt).unwrap(), "by hash");
    }

    #[test]
    fn scripted_runs_are_reproducible() {
        let s = schema();
        let samples = vec![
            sample("s1", &[("甲", "Kill", "乙")]),
            sample("s2", &[("丙", "Marriage", "丁")]),
        ];
        let correct = BTreeSet::from(["Marriage".to_string()]);
        let a = ScriptedBackend::from_profile("mock", &samples, &s, &correct);
        let b = ScriptedBackend::from_profile("mock", &samples, &s, &correct);
        for id in ["s1", "s2"] {
            assert_eq!(
                a.complete(&bundle(id)).unwrap(),
                b.complete(&bundle(id)).unwrap()
            );
        }
    }
}
