//! Parsing free-form model output back into entities, triples, and an
//! explanation.
//!
//! The answer grammar is the same grouped-map format the prompt demonstrates:
//! an entity map `{"人物": ["夏侯淵", ...]}` and a relation map
//! `{"任職": [["頭", "尾"], ...]}`. Chain-of-thought text may contain
//! intermediate maps, so the last well-formed map of each kind wins and
//! everything before the first map is the explanation. Full-width
//! punctuation is normalized before structural parsing; parsing never fails
//! on arbitrary text.

use serde_json::Value;

use crate::prompt::{L_GOLD_ENT, L_GOLD_REL};
use crate::types::{
    triple_key, Entity, LlmResponse, RelationSchema, Sample, Triple, OTHER_RELATION,
};

/// 1:1 full-width / CJK punctuation to ASCII for structure detection.
fn normalize_char(c: char) -> char {
    match c {
        '“' | '”' | '„' | '‟' | '＂' | '「' | '」' | '『' | '』' | '‘' | '’' | '＇' => '"',
        '：' | '﹕' | '︰' => ':',
        '，' | '、' | '﹐' => ',',
        '［' | '【' | '〔' => '[',
        '］' | '】' | '〕' => ']',
        '｛' | '﹛' => '{',
        '｝' | '﹜' => '}',
        '．' => '.',
        '０'..='９' => char::from_u32('0' as u32 + (c as u32 - '０' as u32)).unwrap_or(c),
        _ => c,
    }
}

/// Spans (in char indices) of balanced top-level `{...}` regions, honoring
/// JSON string quoting and escapes.
fn scan_objects(chars: &[char]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' if depth > 0 => in_string = true,
            '{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            '}' => {
                if depth > 0 {
                    depth -= 1;
                    if depth == 0 {
                        spans.push((start, i + 1));
                    }
                }
            }
            _ => {}
        }
    }
    spans
}

fn as_prob_like(v: &Value) -> bool {
    match v {
        Value::Number(_) => true,
        Value::String(s) => s.trim().parse::<f64>().is_ok(),
        _ => false,
    }
}

fn as_pair(v: &Value) -> Option<(String, String)> {
    let arr = v.as_array()?;
    if arr.len() != 2 {
        return None;
    }
    Some((arr[0].as_str()?.to_string(), arr[1].as_str()?.to_string()))
}

#[derive(Debug, PartialEq)]
enum MapKind {
    Entities,
    Relations,
}

/// Entity item: `"surface"` or `["surface", prob]`.
fn fits_entity_item(v: &Value) -> bool {
    match v {
        Value::String(_) => true,
        Value::Array(a) => a.len() == 2 && a[0].is_string() && as_prob_like(&a[1]),
        _ => false,
    }
}

/// Relation item: `["head", "tail"]` or `[["head", "tail"], prob]`.
fn fits_relation_item(v: &Value) -> bool {
    match v {
        Value::Array(a) if a.len() == 2 => {
            (a[0].is_string() && a[1].is_string())
                || (as_pair(&a[0]).is_some() && as_prob_like(&a[1]))
        }
        _ => false,
    }
}

/// Classify a parsed object as an entity or relation map. Maps whose items
/// all fit both shapes (string-probability ambiguity) count as entity maps;
/// maps with no items at all are unclassifiable.
fn classify(v: &Value) -> Option<MapKind> {
    let obj = v.as_object()?;
    let mut any_item = false;
    let mut all_entity = true;
    let mut all_relation = true;
    for group in obj.values() {
        let arr = group.as_array()?;
        for item in arr {
            any_item = true;
            all_entity &= fits_entity_item(item);
            all_relation &= fits_relation_item(item);
        }
    }
    if !any_item {
        return None;
    }
    match (all_entity, all_relation) {
        (true, _) => Some(MapKind::Entities),
        (false, true) => Some(MapKind::Relations),
        _ => None,
    }
}

fn extract_entities(v: &Value, schema: &RelationSchema, warnings: &mut Vec<String>) -> Vec<Entity> {
    let mut out = Vec::new();
    let Some(obj) = v.as_object() else {
        return out;
    };
    for (label, group) in obj {
        let etype = match schema.resolve_entity_type(label) {
            Some(t) => t.name.clone(),
            None => {
                warnings.push(format!("unknown entity type label {label:?}"));
                label.trim().to_string()
            }
        };
        let Some(items) = group.as_array() else {
            continue;
        };
        for item in items {
            let surface = match item {
                Value::String(s) => s.clone(),
                Value::Array(a) => match a.first().and_then(|x| x.as_str()) {
                    Some(s) => s.to_string(),
                    None => continue,
                },
                _ => continue,
            };
            let entity = Entity::new(etype.clone(), surface);
            if !entity.surface.is_empty() && !out.contains(&entity) {
                out.push(entity);
            }
        }
    }
    out
}

fn extract_triples(v: &Value, schema: &RelationSchema, warnings: &mut Vec<String>) -> Vec<Triple> {
    let mut out: Vec<Triple> = Vec::new();
    let Some(obj) = v.as_object() else {
        return out;
    };
    for (label, group) in obj {
        let relation = match schema.resolve_relation(label) {
            Some(r) => r.name.clone(),
            None => {
                warnings.push(format!(
                    "unknown relation label {label:?} coerced to {OTHER_RELATION:?}"
                ));
                OTHER_RELATION.to_string()
            }
        };
        let Some(items) = group.as_array() else {
            continue;
        };
        for item in items {
            let pair = match item {
                Value::Array(a) if a.len() == 2 && a[0].is_array() => as_pair(&a[0]),
                other => as_pair(other),
            };
            let Some((head, tail)) = pair else { continue };
            let triple = Triple::new(head, relation.clone(), tail);
            if triple.head.is_empty() || triple.tail.is_empty() {
                continue;
            }
            if !out.iter().any(|t| triple_key(t) == triple_key(&triple)) {
                out.push(triple);
            }
        }
    }
    out
}

fn strip_trailing_labels(text: &str) -> String {
    let mut s = text.trim().to_string();
    let labels = [
        L_GOLD_ENT,
        L_GOLD_REL,
        "真實的實體:",
        "真實的關係:",
        "真實的實體",
        "真實的關係",
    ];
    loop {
        let before = s.len();
        for label in labels {
            if let Some(stripped) = s.strip_suffix(label) {
                s = stripped.trim_end().to_string();
            }
        }
        if s.len() == before {
            return s;
        }
    }
}

/// Parse raw model output. Never fails: unparseable text yields empty sets,
/// the whole text as explanation, and a warning.
pub fn parse_llm_output(sample_id: &str, raw: &str, schema: &RelationSchema) -> LlmResponse {
    let raw_chars: Vec<char> = raw.chars().collect();
    let normalized: Vec<char> = raw_chars.iter().map(|&c| normalize_char(c)).collect();
    let spans = scan_objects(&normalized);

    let mut warnings = Vec::new();
    let mut last_entities: Option<(usize, Value)> = None;
    let mut last_relations: Option<(usize, Value)> = None;
    let mut first_map_start: Option<usize> = None;

    for (start, end) in spans {
        let raw_text: String = raw_chars[start..end].iter().collect();
        let norm_text: String = normalized[start..end].iter().collect();
        // Strict parse of the raw span first so exotic characters inside
        // surfaces survive; fall back to the normalized text.
        let value = serde_json::from_str::<Value>(&raw_text)
            .or_else(|_| serde_json::from_str::<Value>(&norm_text));
        let Ok(value) = value else { continue };
        let Some(kind) = classify(&value) else {
            continue;
        };
        first_map_start.get_or_insert(start);
        match kind {
            MapKind::Entities => last_entities = Some((start, value)),
            MapKind::Relations => last_relations = Some((start, value)),
        }
    }

    let entities = last_entities
        .as_ref()
        .map(|(_, v)| extract_entities(v, schema, &mut warnings))
        .unwrap_or_default();
    let triples = last_relations
        .as_ref()
        .map(|(_, v)| extract_triples(v, schema, &mut warnings))
        .unwrap_or_default();

    let explanation = match first_map_start {
        Some(pos) => strip_trailing_labels(&raw_chars[..pos].iter().collect::<String>()),
        None => {
            warnings.push("no structured answer found".to_string());
            raw.trim().to_string()
        }
    };

    LlmResponse {
        sample_id: sample_id.to_string(),
        explanation,
        entities,
        triples,
        raw: raw.to_string(),
        warnings,
    }
}

/// Render a gold answer block in the exact grammar the parser accepts; used
/// by the scripted backend and the round-trip tests.
pub fn render_gold_answer(sample: &Sample, schema: &RelationSchema, explanation: &str) -> String {
    let entities: Vec<Entity> = sample.gold_entities.iter().cloned().collect();
    let triples: Vec<Triple> = sample.gold_triples.iter().cloned().collect();
    let mut out = String::new();
    if !explanation.is_empty() {
        out.push_str(explanation);
        out.push('\n');
    }
    out.push_str(L_GOLD_ENT);
    out.push('\n');
    out.push_str(&crate::prompt::render_gold_entities(&entities, schema));
    out.push('\n');
    out.push_str(L_GOLD_REL);
    out.push('\n');
    out.push_str(&crate::prompt::render_gold_triples(&triples, schema));
    out.push('\n');
    out
}
