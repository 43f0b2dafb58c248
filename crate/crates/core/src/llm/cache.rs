use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{sha256_hex, ChatRequest, LlmError};

pub const CACHE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub text: String,
    /// Hex SHA-256 of `text`, checked on every read.
    pub text_sha256: String,
}

/// On-disk layout of one cache or replay-fixture file, `<hash>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub schema: u32,
    pub request_hash: String,
    pub request: ChatRequest,
    pub response: CachedResponse,
}

impl CacheEntry {
    pub fn new(request: &ChatRequest, text: &str) -> Self {
        Self {
            schema: CACHE_SCHEMA,
            request_hash: request.cache_key(),
            request: request.clone(),
            response: CachedResponse {
                text: text.to_string(),
                text_sha256: sha256_hex(text.as_bytes()),
            },
        }
    }
}

/// Append-only directory with one JSON file per request hash.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.path_for(key).is_file()
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, LlmError> {
        let path = self.path_for(key);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let entry: CacheEntry = serde_json::from_str(&text)
            .map_err(|e| LlmError::CacheCorrupt(key.to_string(), e.to_string()))?;
        if entry.request_hash != key {
            return Err(LlmError::CacheCorrupt(
                key.to_string(),
                format!("file holds request {}", entry.request_hash),
            ));
        }
        if sha256_hex(entry.response.text.as_bytes()) != entry.response.text_sha256 {
            return Err(LlmError::CacheCorrupt(
                key.to_string(),
                "response text does not match its stored hash".into(),
            ));
        }
        Ok(Some(entry))
    }

    /// Writes the entry under a temporary name and links it into place.
    /// An existing entry for the same key wins; the write is then a no-op.
    pub fn put(&self, key: &str, request: &ChatRequest, text: &str) -> Result<(), LlmError> {
        std::fs::create_dir_all(&self.dir)?;
        let final_path = self.path_for(key);
        if final_path.exists() {
            return Ok(());
        }
        let entry = CacheEntry::new(request, text);
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or_default();
        let tmp = self
            .dir
            .join(format!(".{key}.{}.{nanos}.tmp", std::process::id()));
        {
            let mut f = std::fs::File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, &entry).map_err(std::io::Error::other)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        let linked = std::fs::hard_link(&tmp, &final_path);
        let _ = std::fs::remove_file(&tmp);
        match linked {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Ok(()),
            Err(e) => Err(e.into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_first_writer_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path().join("c"));
        let req = ChatRequest::new("m", "s", "u");
        let key = req.cache_key();
        assert!(cache.get(&key).unwrap().is_none());
        cache.put(&key, &req, "first").unwrap();
        cache.put(&key, &req, "second").unwrap();
        assert_eq!(cache.get(&key).unwrap().unwrap().response.text, "first");
        let leftovers = std::fs::read_dir(cache.dir()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn tampered_text_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let req = ChatRequest::new("m", "s", "u");
        let key = req.cache_key();
        cache.put(&key, &req, "genuine").unwrap();
        let path = cache.path_for(&key);
        let tampered = std::fs::read_to_string(&path)
            .unwrap()
            .replace("genuine", "forged");
        std::fs::write(&path, tampered).unwrap();
        assert!(matches!(cache.get(&key), Err(LlmError::CacheCorrupt(..))));
    }
}
