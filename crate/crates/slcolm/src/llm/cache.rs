//! Persistent response cache: one content-addressed JSON file per
//! `(model, prompt)` pair. Reads are lock-free; writes go through a mutex
//! and a tempfile rename so concurrent writers never interleave.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::llm::{prompt_cache_key, LlmBackend};
use crate::prompt::PromptBundle;

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    model: String,
    timestamp_unix: u64,
    response: String,
}

pub struct ResponseCache {
    dir: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
    write_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(ResponseCache {
            dir,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            write_lock: Mutex::new(()),
        })
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let text = std::fs::read_to_string(self.path_for(key)).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        Some(entry.response)
    }

    pub fn put(&self, key: &str, model: &str, response: &str) -> Result<()> {
        let entry = CacheEntry {
            key: key.to_string(),
            model: model.to_string(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            response: response.to_string(),
        };
        let _guard = self.write_lock.lock().expect("cache write lock poisoned");
        let tmp = self.dir.join(format!(".{key}.tmp"));
        std::fs::write(&tmp, serde_json::to_string(&entry)?)?;
        std::fs::rename(&tmp, self.path_for(key))?;
        Ok(())
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::SeqCst)
    }
}

/// Cache-first wrapper around any backend: on a hit the inner backend is
/// never consulted; on a miss the response is stored before returning.
pub struct CachedBackend<B> {
    inner: B,
    cache: ResponseCache,
}

impl<B: LlmBackend> CachedBackend<B> {
    pub fn new(inner: B, cache: ResponseCache) -> Self {
        CachedBackend { inner, cache }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: LlmBackend> LlmBackend for CachedBackend<B> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }

    fn complete(&self, prompt: &PromptBundle) -> Result<String> {
        let key = prompt_cache_key(self.inner.model_name(), &prompt.text);
        if let Some(response) = self.cache.get(&key) {
            self.cache.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(response);
        }
        self.cache.misses.fetch_add(1, Ordering::SeqCst);
        let response = self.inner.complete(prompt)?;
        self.cache.put(&key, self.inner.model_name(), &response)?;
        Ok(response)
    }

    fn network_requests(&self) -> u64 {
        self.inner.network_requests()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU64;
    use tempfile::TempDir;

    struct CountingBackend {
        calls: AtomicU64,
    }

    impl LlmBackend for CountingBackend {
        fn model_name(&self) -> &str {
            "counting"
        }
        fn complete(&self, prompt: &PromptBundle) -> crate::error::Result<String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(format!("answer to {}", prompt.sample_id))
        }
        fn network_requests(&self) -> u64 {
            self.calls.load(Ordering::SeqCst)
        }
    }

    fn bundle(id: &str, text: &str) -> PromptBundle {
        PromptBundle {
            sample_id: id.into(),
            text: text.into(),
            sections: vec![],
            token_estimate: text.chars().count(),
        }
    }

    #[test]
    fn second_identical_call_is_served_from_cache() {
        let dir = TempDir::new().unwrap();
        let backend = CachedBackend::new(
            CountingBackend {
                calls: AtomicU64::new(0),
            },
            ResponseCache::open(dir.path()).unwrap(),
        );
        let prompt = bundle("s1", "the prompt");
        let first = backend.complete(&prompt).unwrap();
        let second = backend.complete(&prompt).unwrap();
        assert_eq!(first, second);
        assert_eq!(backend.network_requests(), 1);
        assert_eq!(backend.cache().hits(), 1);
        assert_eq!(backend.cache().misses(), 1);
    }

    #[test]
    fn cache_survives_reopening() {
        let dir = TempDir::new().unwrap();
        let prompt = bundle("s1", "persistent prompt");
        {
            let backend = CachedBackend::new(
                CountingBackend {
                    calls: AtomicU64::new(0),
                },
                ResponseCache::open(dir.path()).unwrap(),
            );
            backend.complete(&prompt).unwrap();
        }
        let backend = CachedBackend::new(
            CountingBackend {
                calls: AtomicU64::new(0),
            },
            ResponseCache::open(dir.path()).unwrap(),
        );
        assert_eq!(backend.complete(&prompt).unwrap(), "answer to s1");
        assert_eq!(backend.network_requests(), 0);
    }

    #[test]
    fn distinct_prompts_do_not_collide() {
        let dir = TempDir::new().unwrap();
        let backend = CachedBackend::new(
            CountingBackend {
                calls: AtomicU64::new(0),
            },
            ResponseCache::open(dir.path()).unwrap(),
        );
        backend.complete(&bundle("a", "prompt one")).unwrap();
        backend.complete(&bundle("b", "prompt two")).unwrap();
        assert_eq!(backend.network_requests(), 2);
    }
}
