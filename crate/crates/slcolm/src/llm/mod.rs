//! Pluggable large-model clients: an OpenAI-compatible HTTP backend, a
//! deterministic scripted mock, and a persistent response cache keyed on
//! `(model, prompt bytes)`.

mod cache;
mod http;
mod mock;

pub use cache::{CachedBackend, ResponseCache};
pub use http::{HttpBackend, HttpBackendConfig};
pub use mock::{empty_answer, MockScript, ScriptedBackend};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::prompt::PromptBundle;

/// A completion backend. Implementations must be shareable across the
/// request pool.
pub trait LlmBackend: Send + Sync {
    /// Model identifier; part of the cache key so ablation variants never
    /// cross-contaminate.
    fn model_name(&self) -> &str;

    fn complete(&self, prompt: &PromptBundle) -> Result<String>;

    /// Actual network requests performed so far (zero for offline backends).
    fn network_requests(&self) -> u64 {
        0
    }
}

/// Content-address for a `(model, prompt)` pair: SHA-256 over the model name
/// and the exact prompt bytes.
pub fn prompt_cache_key(model: &str, prompt_text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model.as_bytes());
    hasher.update(b"\n");
    hasher.update(prompt_text.as_bytes());
    hex::encode(hasher.finalize())
}

/// SHA-256 of the prompt text alone; used by prompt-keyed mock scripts and
/// the run manifest.
pub fn prompt_hash(prompt_text: &str) -> String {
    hex::encode(Sha256::digest(prompt_text.as_bytes()))
}

/// Complete every prompt with at most `max_concurrent` requests in flight.
/// Results come back in prompt order regardless of completion order.
pub fn complete_all(
    backend: &dyn LlmBackend,
    prompts: &[PromptBundle],
    max_concurrent: usize,
) -> Result<Vec<String>> {
    let workers = max_concurrent.max(1).min(prompts.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<String>>>> =
        Mutex::new((0..prompts.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= prompts.len() {
                    break;
                }
                let outcome = backend.complete(&prompts[i]);
                results.lock().expect("result slot poisoned")[i] = Some(outcome);
            });
        }
    });

    results
        .into_inner()
        .expect("result slots poisoned")
        .into_iter()
        .map(|slot| slot.expect("every prompt was scheduled"))
        .collect()
}
