//! Client-side cache of instance data, evicting least recently used entries.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;

use super::{ObjectId, Version};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub inserts: u64,
    pub evictions: u64,
}

#[derive(Debug, Clone)]
pub struct InstanceCache {
    capacity: usize,
    used: usize,
    tick: u64,
    entries: BTreeMap<(ObjectId, Version), (Arc<[u8]>, u64)>,
    lru: BTreeMap<u64, (ObjectId, Version)>,
    stats: CacheStats,
}

impl InstanceCache {
    /// `capacity` in bytes of instance data.
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            used: 0,
            tick: 0,
            entries: BTreeMap::new(),
            lru: BTreeMap::new(),
            stats: CacheStats::default(),
        }
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn used_bytes(&self) -> usize {
        self.used
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores a copy; entries larger than the whole cache are ignored.
    pub fn insert(&mut self, id: ObjectId, version: Version, data: Arc<[u8]>) {
        if data.len() > self.capacity {
            return;
        }
        self.remove(id, version);
        self.tick += 1;
        self.used += data.len();
        self.entries.insert((id, version), (data, self.tick));
        self.lru.insert(self.tick, (id, version));
        self.stats.inserts += 1;
        while self.used > self.capacity {
            let (_, key) = self.lru.pop_first().expect("non-empty while over capacity");
            let (d, _) = self.entries.remove(&key).expect("lru and entries agree");
            self.used -= d.len();
            self.stats.evictions += 1;
        }
    }

    fn remove(&mut self, id: ObjectId, version: Version) {
        if let Some((d, t)) = self.entries.remove(&(id, version)) {
            self.used -= d.len();
            self.lru.remove(&t);
        }
    }

    pub fn get(&mut self, id: ObjectId, version: Version) -> Option<Arc<[u8]>> {
        let Some((data, t)) = self.entries.get_mut(&(id, version)) else {
            self.stats.misses += 1;
            return None;
        };
        self.lru.remove(t);
        self.tick += 1;
        *t = self.tick;
        self.lru.insert(self.tick, (id, version));
        self.stats.hits += 1;
        Some(data.clone())
    }

    /// Oldest and newest cached version of `id`.
    pub fn versions(&self, id: ObjectId) -> Option<(Version, Version)> {
        let mut it = self.entries.range((id, Version(0))..=(id, Version(u64::MAX))).map(|(k, _)| k.1);
        let first = it.next()?;
        Some((first, it.last().unwrap_or(first)))
    }

    pub fn contains(&self, id: ObjectId, version: Version) -> bool {
        self.entries.contains_key(&(id, version))
    }
}
