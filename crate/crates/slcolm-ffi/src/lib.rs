//! C ABI over the pipeline's pure operations: schema loading, answer
//! parsing, triple merging, scoring, and text similarity.
//!
//! Conventions:
//!
//! - Handles (`SlcolmSchema`) are opaque; free them with the matching
//!   `*_free` function.
//! - Structured inputs and outputs cross the boundary as UTF-8 JSON strings;
//!   returned strings are owned by the caller and must be released with
//!   [`slcolm_string_free`].
//! - Every fallible function returns a [`SlcolmStatus`]; on failure the
//!   thread-local message from [`slcolm_last_error`] describes the cause.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use serde::Deserialize;

use slcolm::eval::score_triples;
use slcolm::merge::{merge, MergeMode, MergePolicy};
use slcolm::parse::parse_llm_output;
use slcolm::retrieval::{cosine, SparseVec};
use slcolm::types::{Prob, RelationSchema, Sample, ScoredTriple, Triple};

/// Result codes for every fallible FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlcolmStatus {
    Ok = 0,
    /// A required pointer was null or an argument was out of range.
    InvalidArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Reading or writing a file failed.
    Io = 3,
    /// A JSON argument did not match the expected shape.
    InvalidJson = 4,
    /// Validation inside the pipeline rejected the input.
    Rejected = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

/// Message describing the most recent failure on this thread, or null.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slcolm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|s| s.as_ptr())
            .unwrap_or(ptr::null())
    })
}

/// Opaque relation schema handle.
pub struct SlcolmSchema {
    inner: RelationSchema,
}

fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, SlcolmStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(SlcolmStatus::InvalidArgument);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        SlcolmStatus::InvalidUtf8
    })
}

fn give_string(out: *mut *mut c_char, value: String) -> SlcolmStatus {
    if out.is_null() {
        set_error("null output pointer");
        return SlcolmStatus::InvalidArgument;
    }
    match CString::new(value.replace('\0', " ")) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            SlcolmStatus::Ok
        }
        Err(_) => {
            set_error("output contained an interior NUL");
            SlcolmStatus::Rejected
        }
    }
}

/// Load a relation schema from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slcolm_schema_load(
    path: *const c_char,
    out: *mut *mut SlcolmSchema,
) -> SlcolmStatus {
    let path = match read_str(path) {
        Ok(s) => s,
        Err(status) => return status,
    };
    if out.is_null() {
        set_error("null output pointer");
        return SlcolmStatus::InvalidArgument;
    }
    match slcolm::ingest::load_schema(path) {
        Ok(schema) => {
            *out = Box::into_raw(Box::new(SlcolmSchema { inner: schema }));
            SlcolmStatus::Ok
        }
        Err(slcolm::Error::Io(e)) => {
            set_error(format!("cannot read {path}: {e}"));
            SlcolmStatus::Io
        }
        Err(slcolm::Error::Json(e)) => {
            set_error(format!("bad schema JSON: {e}"));
            SlcolmStatus::InvalidJson
        }
        Err(e) => {
            set_error(e.to_string());
            SlcolmStatus::Rejected
        }
    }
}

/// The built-in demo schema.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn slcolm_schema_demo(out: *mut *mut SlcolmSchema) -> SlcolmStatus {
    if out.is_null() {
        set_error("null output pointer");
        return SlcolmStatus::InvalidArgument;
    }
    *out = Box::into_raw(Box::new(SlcolmSchema {
        inner: slcolm::fixture::demo_schema(),
    }));
    SlcolmStatus::Ok
}

/// Release a schema handle. Null is a no-op.
///
/// # Safety
/// `schema` must have come from a `slcolm_schema_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn slcolm_schema_free(schema: *mut SlcolmSchema) {
    if !schema.is_null() {
        drop(Box::from_raw(schema));
    }
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have been returned by a `slcolm_*` function.
#[no_mangle]
pub unsafe extern "C" fn slcolm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse raw model output into entities, triples, and an explanation.
/// `out_json` receives the full parsed answer:
/// `{"sample_id", "explanation", "entities", "triples", "raw", "warnings"}`.
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn slcolm_parse_output(
    schema: *const SlcolmSchema,
    sample_id: *const c_char,
    raw: *const c_char,
    out_json: *mut *mut c_char,
) -> SlcolmStatus {
    if schema.is_null() {
        set_error("null schema handle");
        return SlcolmStatus::InvalidArgument;
    }
    let sample_id = match read_str(sample_id) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let raw = match read_str(raw) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let parsed = parse_llm_output(sample_id, raw, &(*schema).inner);
    match serde_json::to_string(&parsed) {
        Ok(json) => give_string(out_json, json),
        Err(e) => {
            set_error(e.to_string());
            SlcolmStatus::Rejected
        }
    }
}

#[derive(Deserialize)]
struct ScoredTripleRow {
    head: String,
    relation: String,
    tail: String,
    prob: Prob,
}

#[derive(Deserialize)]
struct TripleRow {
    head: String,
    relation: String,
    tail: String,
}

/// Fuse SLM and LLM triples for one sample.
///
/// `y_star_json`: `[{"head","relation","tail","prob"}]` (prob as decimal
/// string or number). `y_prime_json`: `[{"head","relation","tail"}]`.
/// `worst_set_json`: JSON array of relation names; required for mode 3, may
/// be null otherwise. `out_json` receives
/// `[{"head","relation","tail","source"}]` sorted by triple.
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn slcolm_merge_triples(
    mode: u8,
    prob_threshold: f64,
    worst_set_json: *const c_char,
    y_star_json: *const c_char,
    y_prime_json: *const c_char,
    out_json: *mut *mut c_char,
) -> SlcolmStatus {
    let mode = match MergeMode::try_from(mode) {
        Ok(m) => m,
        Err(e) => {
            set_error(e);
            return SlcolmStatus::InvalidArgument;
        }
    };
    let worst_set: Vec<String> = if worst_set_json.is_null() {
        Vec::new()
    } else {
        let text = match read_str(worst_set_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => {
                set_error(format!("bad worst_set JSON: {e}"));
                return SlcolmStatus::InvalidJson;
            }
        }
    };
    let y_star_text = match read_str(y_star_json) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let y_prime_text = match read_str(y_prime_json) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let y_star_rows: Vec<ScoredTripleRow> = match serde_json::from_str(y_star_text) {
        Ok(v) => v,
        Err(e) => {
            set_error(format!("bad y_star JSON: {e}"));
            return SlcolmStatus::InvalidJson;
        }
    };
    let y_prime_rows: Vec<TripleRow> = match serde_json::from_str(y_prime_text) {
        Ok(v) => v,
        Err(e) => {
            set_error(format!("bad y_prime JSON: {e}"));
            return SlcolmStatus::InvalidJson;
        }
    };

    let y_star: Vec<ScoredTriple> = y_star_rows
        .into_iter()
        .map(|r| ScoredTriple {
            triple: Triple::new(r.head, r.relation, r.tail),
            prob: r.prob,
        })
        .collect();
    let y_prime: Vec<Triple> = y_prime_rows
        .into_iter()
        .map(|r| Triple::new(r.head, r.relation, r.tail))
        .collect();

    let policy = MergePolicy {
        mode,
        prob_threshold,
        worst_k: worst_set.len().max(1),
        worst_set,
    };
    if let Err(e) = policy.validate() {
        set_error(e.to_string());
        return SlcolmStatus::Rejected;
    }

    let merged = merge(&y_star, &y_prime, &policy);
    let rows: Vec<serde_json::Value> = merged
        .triples
        .iter()
        .map(|t| {
            serde_json::json!({
                "head": t.head,
                "relation": t.relation,
                "tail": t.tail,
                "source": merged.provenance[t],
            })
        })
        .collect();
    match serde_json::to_string(&rows) {
        Ok(json) => give_string(out_json, json),
        Err(e) => {
            set_error(e.to_string());
            SlcolmStatus::Rejected
        }
    }
}

#[derive(Deserialize)]
struct GoldRow {
    id: String,
    #[serde(default)]
    triples: Vec<TripleRow>,
}

/// Score predictions against gold triples.
///
/// `pred_json`: `{"<sample id>": [{"head","relation","tail"}]}`.
/// `gold_json`: `[{"id", "triples": [...]}]`. `out_json` receives the full
/// evaluation report (micro/macro P/R/F1 and per-relation counts).
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn slcolm_score_triples(
    pred_json: *const c_char,
    gold_json: *const c_char,
    out_json: *mut *mut c_char,
) -> SlcolmStatus {
    let pred_text = match read_str(pred_json) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let gold_text = match read_str(gold_json) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let pred_rows: BTreeMap<String, Vec<TripleRow>> = match serde_json::from_str(pred_text) {
        Ok(v) => v,
        Err(e) => {
            set_error(format!("bad pred JSON: {e}"));
            return SlcolmStatus::InvalidJson;
        }
    };
    let gold_rows: Vec<GoldRow> = match serde_json::from_str(gold_text) {
        Ok(v) => v,
        Err(e) => {
            set_error(format!("bad gold JSON: {e}"));
            return SlcolmStatus::InvalidJson;
        }
    };

    let pred: BTreeMap<String, BTreeSet<Triple>> = pred_rows
        .into_iter()
        .map(|(id, rows)| {
            (
                id,
                rows.into_iter()
                    .map(|r| Triple::new(r.head, r.relation, r.tail))
                    .collect(),
            )
        })
        .collect();
    let samples: Vec<Sample> = gold_rows
        .into_iter()
        .map(|row| Sample {
            id: row.id,
            text: String::new(),
            gold_entities: BTreeSet::new(),
            gold_triples: row
                .triples
                .into_iter()
                .map(|r| Triple::new(r.head, r.relation, r.tail))
                .collect(),
        })
        .collect();

    match score_triples(&pred, &samples) {
        Ok(report) => match serde_json::to_string(&report) {
            Ok(json) => give_string(out_json, json),
            Err(e) => {
                set_error(e.to_string());
                SlcolmStatus::Rejected
            }
        },
        Err(e) => {
            set_error(e.to_string());
            SlcolmStatus::Rejected
        }
    }
}

/// Character-bigram cosine similarity of two texts, in [0, 1].
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn slcolm_text_similarity(
    a: *const c_char,
    b: *const c_char,
    out: *mut f64,
) -> SlcolmStatus {
    let a = match read_str(a) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let b = match read_str(b) {
        Ok(s) => s,
        Err(status) => return status,
    };
    if out.is_null() {
        set_error("null output pointer");
        return SlcolmStatus::InvalidArgument;
    }
    *out = cosine(&SparseVec::from_text(a), &SparseVec::from_text(b));
    SlcolmStatus::Ok
}
