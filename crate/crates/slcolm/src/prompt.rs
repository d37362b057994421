//! Prompt assembly: demonstrations, task description, candidate relation
//! definitions, and the target block with the SLM's predictions.
//!
//! The prompt shows structured blocks as JSON objects grouped by entity type
//! / relation label, and asks the model to answer in the same grouped format
//! after writing an explanation. Section order is fixed: demonstrations,
//! task description, definitions, target block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::DemonstrationSet;
use crate::types::{Entity, RelationSchema, Sample, ScoredEntity, ScoredTriple, SlmPrediction, Triple};
use crate::candidates::CandidateSet;

pub const L_INPUT: &str = "輸入句子為：";
pub const L_PRED_ENT: &str = "模型預測的實體如下：";
pub const L_PRED_REL: &str = "模型預測的關係如下：";
pub const L_GOLD_ENT: &str = "真實的實體：";
pub const L_GOLD_REL: &str = "真實的關係：";
pub const L_DEFS: &str = "給你一些關係類型解釋：";

pub const DEFAULT_MAX_PROMPT_CHARS: usize = 8000;

/// Ablation toggles for prompt construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    /// Dem.: include demonstration examples.
    pub include_demos: bool,
    /// Ref.: include the SLM's predictions (in demos and the target block).
    pub include_slm_ref: bool,
    /// Def.: include candidate relation definitions.
    pub include_defs: bool,
    /// Suppresses demonstrations regardless of `include_demos`.
    pub zero_shot: bool,
    /// Character budget; least-similar demonstrations are dropped first
    /// until the prompt fits.
    pub max_prompt_chars: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            include_demos: true,
            include_slm_ref: true,
            include_defs: true,
            zero_shot: false,
            max_prompt_chars: DEFAULT_MAX_PROMPT_CHARS,
        }
    }
}

impl PromptConfig {
    pub fn effective_demos(&self) -> bool {
        self.include_demos && !self.zero_shot
    }
}

/// Section labels, in prompt order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Demonstrations,
    TaskDescription,
    Definitions,
    Target,
}

/// A fully assembled prompt. The section strings concatenate exactly to
/// `text`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub sample_id: String,
    pub text: String,
    pub sections: Vec<(Section, String)>,
    /// Character count; the only length estimate used.
    pub token_estimate: usize,
}

impl PromptBundle {
    pub fn section(&self, which: Section) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| *s == which)
            .map(|(_, text)| text.as_str())
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

/// `{"label": [item, ...], ...}` with groups in schema declaration order and
/// items in input order.
fn render_grouped<T>(
    items: &[T],
    group_key: impl Fn(&T) -> String,
    order: impl Fn(&str) -> usize,
    label: impl Fn(&str) -> String,
    render_item: impl Fn(&T) -> String,
) -> String {
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    for item in items {
        let key = group_key(item);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, list)) => list.push(render_item(item)),
            None => groups.push((key, vec![render_item(item)])),
        }
    }
    groups.sort_by_key(|(k, _)| order(k));
    let parts: Vec<String> = groups
        .iter()
        .map(|(k, list)| format!("{}: [{}]", json_str(&label(k)), list.join(", ")))
        .collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn render_gold_entities(entities: &[Entity], schema: &RelationSchema) -> String {
    render_grouped(
        entities,
        |e| e.etype.clone(),
        |k| {
            schema
                .entity_types
                .iter()
                .position(|t| t.name == k)
                .unwrap_or(usize::MAX)
        },
        |k| schema.entity_label_for(k).to_string(),
        |e| json_str(&e.surface),
    )
}

pub fn render_gold_triples(triples: &[Triple], schema: &RelationSchema) -> String {
    render_grouped(
        triples,
        |t| t.relation.clone(),
        |k| schema.relation_order(k),
        |k| schema.label_for(k).to_string(),
        |t| format!("[{}, {}]", json_str(&t.head), json_str(&t.tail)),
    )
}

fn render_scored_entities(entities: &[ScoredEntity], schema: &RelationSchema) -> String {
    render_grouped(
        entities,
        |e| e.entity.etype.clone(),
        |k| {
            schema
                .entity_types
                .iter()
                .position(|t| t.name == k)
                .unwrap_or(usize::MAX)
        },
        |k| schema.entity_label_for(k).to_string(),
        |e| format!("[{}, {}]", json_str(&e.entity.surface), e.prob.to_decimal_string()),
    )
}

fn render_scored_triples(triples: &[ScoredTriple], schema: &RelationSchema) -> String {
    render_grouped(
        triples,
        |t| t.triple.relation.clone(),
        |k| schema.relation_order(k),
        |k| schema.label_for(k).to_string(),
        |t| {
            format!(
                "[[{}, {}], {}]",
                json_str(&t.triple.head),
                json_str(&t.triple.tail),
                t.prob.to_decimal_string()
            )
        },
    )
}

/// One demonstration block: input sentence, the SLM's scored predictions
/// (when `include_slm_ref`), then the gold entities and relations.
pub fn render_demo(
    sample: &Sample,
    slm: &SlmPrediction,
    include_slm_ref: bool,
    schema: &RelationSchema,
) -> String {
    let mut out = String::new();
    out.push_str(L_INPUT);
    out.push('\n');
    out.push_str(&sample.text);
    out.push('\n');
    if include_slm_ref {
        out.push_str(L_PRED_ENT);
        out.push('\n');
        out.push_str(&render_scored_entities(&slm.entities, schema));
        out.push('\n');
        out.push_str(L_PRED_REL);
        out.push('\n');
        out.push_str(&render_scored_triples(&slm.triples, schema));
        out.push('\n');
    }
    let gold_entities: Vec<Entity> = sample.gold_entities.iter().cloned().collect();
    let gold_triples: Vec<Triple> = sample.gold_triples.iter().cloned().collect();
    out.push_str(L_GOLD_ENT);
    out.push('\n');
    out.push_str(&render_gold_entities(&gold_entities, schema));
    out.push('\n');
    out.push_str(L_GOLD_REL);
    out.push('\n');
    out.push_str(&render_gold_triples(&gold_triples, schema));
    out.push('\n');
    out
}

/// The task description: modify-and-supplement instruction, the full
/// relation label list in declaration order, the fallback rule, and the
/// explanation-first answer format.
pub fn render_task_description(schema: &RelationSchema) -> String {
    let labels: Vec<&str> = schema.relations.iter().map(|r| r.label()).collect();
    let mut out = String::new();
    out.push_str("現在請你在模型預測的結果上進行修改和補充，根據以上示例和關係定義，輸出以下句子中表達的真實的關係實體對。\n");
    out.push_str(&format!("關係類型包含：{}。\n", labels.join("、")));
    out.push_str("如果都不屬於以上關係，則歸屬為「其他」關係。\n");
    out.push_str(&format!(
        "請先輸出你的解釋，再按照示例相同的格式輸出「{}」和「{}」兩個部分。\n",
        L_GOLD_ENT.trim_end_matches('：'),
        L_GOLD_REL.trim_end_matches('：')
    ));
    out
}

/// One definition line per candidate relation, in candidate-set order.
/// Empty candidate set renders nothing.
pub fn render_definitions(cands: &CandidateSet, schema: &RelationSchema) -> Result<String> {
    if cands.relations.is_empty() {
        return Ok(String::new());
    }
    let mut out = String::new();
    out.push_str(L_DEFS);
    out.push('\n');
    for name in &cands.relations {
        let relation = schema
            .relation(name)
            .ok_or_else(|| Error::UndefinedRelation(name.clone()))?;
        if relation.definition.trim().is_empty() {
            return Err(Error::UndefinedRelation(name.clone()));
        }
        out.push_str(&relation.definition);
        out.push('\n');
    }
    Ok(out)
}

/// The target block: input sentence plus, when `include_slm_ref`, the SLM's
/// scored predictions for it.
fn render_target(
    sample: &Sample,
    slm: &SlmPrediction,
    include_slm_ref: bool,
    schema: &RelationSchema,
) -> String {
    let mut out = String::new();
    out.push_str(L_INPUT);
    out.push('\n');
    out.push_str(&sample.text);
    out.push('\n');
    if include_slm_ref {
        out.push_str(L_PRED_ENT);
        out.push('\n');
        out.push_str(&render_scored_entities(&slm.entities, schema));
        out.push('\n');
        out.push_str(L_PRED_REL);
        out.push('\n');
        out.push_str(&render_scored_triples(&slm.triples, schema));
        out.push('\n');
    }
    out
}

fn assemble_once(
    sample: &Sample,
    demos: &[(Sample, Option<SlmPrediction>)],
    cands: &CandidateSet,
    slm: &SlmPrediction,
    config: &PromptConfig,
    schema: &RelationSchema,
) -> Result<PromptBundle> {
    let mut sections: Vec<(Section, String)> = Vec::new();

    if config.effective_demos() && !demos.is_empty() {
        let blocks: Vec<String> = demos
            .iter()
            .map(|(demo, pred)| {
                let empty = SlmPrediction::empty(&demo.id);
                render_demo(
                    demo,
                    pred.as_ref().unwrap_or(&empty),
                    config.include_slm_ref,
                    schema,
                )
            })
            .collect();
        sections.push((Section::Demonstrations, format!("{}\n", blocks.join("\n"))));
    }

    sections.push((Section::TaskDescription, format!("{}\n", render_task_description(schema))));

    if config.include_defs {
        let defs = render_definitions(cands, schema)?;
        if !defs.is_empty() {
            sections.push((Section::Definitions, format!("{defs}\n")));
        }
    }

    sections.push((Section::Target, render_target(sample, slm, config.include_slm_ref, schema)));

    let text: String = sections.iter().map(|(_, s)| s.as_str()).collect();
    let token_estimate = text.chars().count();
    Ok(PromptBundle {
        sample_id: sample.id.clone(),
        text,
        sections,
        token_estimate,
    })
}

/// Assemble the full prompt. Byte-deterministic for fixed inputs; when the
/// character budget is exceeded, demonstrations are dropped from the end of
/// the list (least similar first) until the prompt fits.
pub fn assemble(
    sample: &Sample,
    demos: &DemonstrationSet,
    cands: &CandidateSet,
    slm: &SlmPrediction,
    config: &PromptConfig,
    schema: &RelationSchema,
) -> Result<PromptBundle> {
    let mut kept: &[(Sample, Option<SlmPrediction>)] = &demos.demos;
    loop {
        let bundle = assemble_once(sample, kept, cands, slm, config, schema)?;
        if bundle.token_estimate <= config.max_prompt_chars || kept.is_empty() {
            return Ok(bundle);
        }
        kept = &kept[..kept.len() - 1];
    }
}
