//! Bounded per-object version history kept by masters.

use alloc::collections::VecDeque;
use alloc::sync::Arc;

use super::Version;

/// Retained instance and delta payloads of the most recent versions.
#[derive(Debug, Clone)]
pub struct VersionHistory {
    depth: usize,
    entries: VecDeque<(Version, Arc<[u8]>, Option<Arc<[u8]>>)>,
}

impl VersionHistory {
    pub const DEFAULT_DEPTH: usize = 60;

    /// `depth` 0 keeps only the newest entry, which unbuffered objects need
    /// to serve mappings at their head version.
    pub fn new(depth: usize) -> Self {
        Self { depth: depth.max(1), entries: VecDeque::new() }
    }

    /// Records `version`; `delta` is the change from the previous version.
    pub fn push(&mut self, version: Version, instance: Arc<[u8]>, delta: Option<Arc<[u8]>>) {
        debug_assert!(self.head().is_none_or(|h| h.next() == version));
        self.entries.push_back((version, instance, delta));
        while self.entries.len() > self.depth {
            self.entries.pop_front();
        }
    }

    pub fn oldest(&self) -> Option<Version> {
        self.entries.front().map(|e| e.0)
    }

    pub fn head(&self) -> Option<Version> {
        self.entries.back().map(|e| e.0)
    }

    fn index(&self, v: Version) -> Option<usize> {
        let oldest = self.oldest()?;
        let i = v.0.checked_sub(oldest.0)? as usize;
        (i < self.entries.len()).then_some(i)
    }

    pub fn instance(&self, v: Version) -> Option<&Arc<[u8]>> {
        self.index(v).map(|i| &self.entries[i].1)
    }

    pub fn delta(&self, v: Version) -> Option<&Arc<[u8]>> {
        self.index(v).and_then(|i| self.entries[i].2.as_ref())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn keeps_newest_depth() {
        let mut h = VersionHistory::new(3);
        for v in 0..10u64 {
            h.push(Version(v), Arc::from(vec![v as u8]), None);
        }
        assert_eq!(h.oldest(), Some(Version(7)));
        assert_eq!(h.head(), Some(Version(9)));
        assert_eq!(&h.instance(Version(8)).unwrap()[..], &[8]);
        assert!(h.instance(Version(6)).is_none());
        assert!(h.instance(Version(10)).is_none());
    }
}
