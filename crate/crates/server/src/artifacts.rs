//! Rendered images addressed by the content hash of the upload they came from,
//! held in a byte-capped LRU.

use std::sync::Arc;

use indexmap::IndexMap;
use parking_lot::Mutex;
use sha2::{Digest, Sha256};

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn artifact_url(hash: &str, name: &str) -> String {
    format!("/artifacts/{hash}/{name}.png")
}

struct Inner {
    /// Least recently used first.
    entries: IndexMap<String, Arc<Vec<u8>>>,
    bytes: usize,
}

pub struct ArtifactCache {
    capacity: usize,
    inner: Mutex<Inner>,
}

impl ArtifactCache {
    pub fn new(capacity_bytes: usize) -> Self {
        Self { capacity: capacity_bytes, inner: Mutex::new(Inner { entries: IndexMap::new(), bytes: 0 }) }
    }

    fn key(hash: &str, name: &str) -> String {
        format!("{hash}/{name}")
    }

    /// Store a PNG and return its URL. An entry larger than the whole cache is not kept.
    pub fn put(&self, hash: &str, name: &str, png: Vec<u8>) -> String {
        let key = Self::key(hash, name);
        let mut inner = self.inner.lock();
        if let Some(old) = inner.entries.shift_remove(&key) {
            inner.bytes -= old.len();
        }
        if png.len() <= self.capacity {
            inner.bytes += png.len();
            inner.entries.insert(key, Arc::new(png));
            while inner.bytes > self.capacity {
                let (_, evicted) = inner.entries.shift_remove_index(0).expect("nonempty while over capacity");
                inner.bytes -= evicted.len();
            }
        }
        artifact_url(hash, name)
    }

    pub fn get(&self, hash: &str, name: &str) -> Option<Arc<Vec<u8>>> {
        let key = Self::key(hash, name);
        let mut inner = self.inner.lock();
        let value = inner.entries.shift_remove(&key)?;
        inner.entries.insert(key, value.clone());
        Some(value)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn size_bytes(&self) -> usize {
        self.inner.lock().bytes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evicts_least_recently_used_first() {
        let c = ArtifactCache::new(10);
        c.put("h", "a", vec![0; 4]);
        c.put("h", "b", vec![0; 4]);
        assert!(c.get("h", "a").is_some());
        c.put("h", "c", vec![0; 4]);
        assert!(c.get("h", "b").is_none());
        assert!(c.get("h", "a").is_some());
        assert!(c.get("h", "c").is_some());
        assert_eq!(c.size_bytes(), 8);
    }

    #[test]
    fn replacing_an_entry_updates_the_size() {
        let c = ArtifactCache::new(100);
        c.put("h", "a", vec![0; 40]);
        let url = c.put("h", "a", vec![1; 10]);
        assert_eq!(url, "/artifacts/h/a.png");
        assert_eq!(c.size_bytes(), 10);
        assert_eq!(c.get("h", "a").unwrap()[0], 1);
        c.put("h", "huge", vec![0; 101]);
        assert!(c.get("h", "huge").is_none());
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(content_hash(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
